//! Lower bound machinery.
//!
//! With `m = 2n` cells of weight `1/m`, the deficiency is bounded below by
//! `E P(PBin(r(N_1), …, r(N_m)) >= l) - E P(PBin(r(N'_1), …, r(N'_m)) >= l)`
//! for `N ~ Mult(n, 1/m)`, `N' ~ Mult(n + 1, 1/m)` and `r` the per-cell Bayes
//! risk curve. The exact path enumerates both multinomials. The Monte Carlo
//! path couples `N' = N + I` with `I ~ Mult(1, 1/m)` and integrates `I` out
//! through the shift identity, so that each sampled `N` contributes
//! `Σ_i (r(N_i) - r(N_i + 1)) / m · P(PBin(r(N_j), j ≠ i) = l - 1)`.

use rand::Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::experiment::check_floor_ratio;
use crate::mc::{chunked_moments, McEstimate};
use crate::pbin::{
    binomial_pmf, check_enumeration_guard, convolve_bernoullis, for_each_multinomial,
    multinomial_sample, pbin_grouped, MultinomialSpec, Pmf,
};
use crate::stream::tag;

/// Minimum Bayes risks `r(0), r(1), …` for one hypercube cell under a uniform prior.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskCurve {
    pub r: f64,
    pub values: Vec<f64>,
}

impl RiskCurve {
    /// `r(n)`, which must lie inside the computed range.
    pub fn at(&self, n: usize) -> f64 {
        self.values[n]
    }

    pub fn n_max(&self) -> usize {
        self.values.len() - 1
    }
}

/// `r(n) = ½ Σ_k min(Bin(n, 1/2r)(k), Bin(n, 1 - 1/2r)(k))`; `k` counts
/// observations in the left half of the cell.
pub fn bayes_risk_curve(r: f64, n_max: usize) -> Result<RiskCurve> {
    check_floor_ratio(r)?;
    let q = 1.0 / (2.0 * r);
    let mut values = Vec::with_capacity(n_max + 1);
    let mut running = 0.5;
    for n in 0..=n_max {
        let pmf = binomial_pmf(n as u64, q);
        let risk = 0.5 * pmf.iter().zip(pmf.iter().rev()).map(|(a, b)| a.min(*b)).sum::<f64>();
        // The true curve is nonincreasing; the running minimum only absorbs rounding.
        running = f64::min(running, risk);
        values.push(running);
    }
    values[0] = 0.5;
    Ok(RiskCurve { r, values })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    #[serde(rename = "mc")]
    MonteCarlo,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::MonteCarlo => "mc",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CubeLowerResult {
    pub n: usize,
    pub m: usize,
    /// Threshold maximising the per-threshold difference.
    pub l_star: usize,
    /// `per_l[l_star - 1]`.
    pub delta: f64,
    /// Best average of two adjacent thresholds, `max_l (δ(l) + δ(l - 1)) / 2`.
    pub delta_avg_paper: f64,
    /// `per_l[l - 1]` is the difference at threshold `l = 1..=m`.
    pub per_l: Vec<f64>,
    /// Interval half-widths matching `per_l`; zero on the exact path.
    pub ci: Vec<f64>,
    pub method: Method,
}

impl CubeLowerResult {
    pub fn ci_at_star(&self) -> f64 {
        self.ci[self.l_star - 1]
    }

    fn from_deltas(n: usize, m: usize, est: Vec<McEstimate>, method: Method) -> Self {
        let per_l: Vec<f64> = est.iter().map(|e| e.estimate).collect();
        let ci = est.iter().map(|e| e.half_width).collect();
        let (mut l_star, mut delta) = (1, f64::NEG_INFINITY);
        for (i, &d) in per_l.iter().enumerate() {
            if d > delta {
                (l_star, delta) = (i + 1, d);
            }
        }
        let delta_avg_paper = if per_l.len() < 2 {
            delta
        } else {
            per_l
                .windows(2)
                .map(|w| 0.5 * (w[0] + w[1]))
                .fold(f64::NEG_INFINITY, f64::max)
        };
        Self {
            n,
            m,
            l_star,
            delta,
            delta_avg_paper,
            per_l,
            ci,
            method,
        }
    }
}

/// Expected survival curve `l ↦ E P(PBin(r(N)) >= l)`, `l = 1..=m`, by enumeration.
fn expected_survivals(trials: usize, m: usize, risks: &RiskCurve) -> Result<Vec<f64>> {
    let spec = MultinomialSpec::uniform(trials, m)?;
    let mut acc = vec![0.0; m];
    let mut probs = vec![0.0; m];
    for_each_multinomial(&spec, |counts, w| {
        for (p, &c) in probs.iter_mut().zip(counts) {
            *p = risks.at(c);
        }
        let pmf = Pmf::new(convolve_bernoullis(&probs)).expect("pbin pmf is normalised");
        for (l, a) in acc.iter_mut().enumerate() {
            *a += w * pmf.survival(l as i64 + 1);
        }
    })?;
    Ok(acc)
}

fn cube_lower_exact(n: usize, m: usize, risks: &RiskCurve) -> Result<CubeLowerResult> {
    check_enumeration_guard(n + 1, m)?;
    let before = expected_survivals(n, m, risks)?;
    let after = expected_survivals(n + 1, m, risks)?;
    let est = before
        .iter()
        .zip(&after)
        .map(|(a, b)| McEstimate::exact(a - b))
        .collect();
    Ok(CubeLowerResult::from_deltas(n, m, est, Method::Exact))
}

/// Conditional threshold differences given one count vector, added into `out[l - 1]`.
fn coupled_deltas(counts: &[usize], risks: &RiskCurve, out: &mut [f64]) {
    let m = counts.len();
    let max_count = counts.iter().copied().max().unwrap_or(0);
    let mut profile = vec![0usize; max_count + 1];
    for &c in counts {
        profile[c] += 1;
    }
    let groups: Vec<(usize, f64)> = profile
        .iter()
        .enumerate()
        .map(|(k, &c)| (c, risks.at(k)))
        .collect();
    let full = pbin_grouped(&groups);
    for (k, &(c, risk)) in groups.iter().enumerate() {
        let gain = risk - risks.at(k + 1);
        if c == 0 || gain <= 0.0 {
            continue;
        }
        let coef = c as f64 / m as f64 * gain;
        let rest = full.remove_bernoulli(risk);
        // out[l - 1] += coef · P(rest = l - 1)
        for (i, &p) in rest.mass.iter().enumerate() {
            if let Some(o) = out.get_mut(rest.offset + i) {
                *o += coef * p;
            }
        }
    }
}

fn cube_lower_mc(
    n: usize,
    m: usize,
    risks: &RiskCurve,
    samples: usize,
    seed: u64,
) -> Result<CubeLowerResult> {
    if samples < 2 {
        return invalid("Monte Carlo path needs at least 2 count samples");
    }
    let moments = chunked_moments(samples, m, seed, tag("lower/cube_lower"), |rng, out| {
        let mut counts = vec![0usize; m];
        for _ in 0..n {
            counts[rng.random_range(0..m)] += 1;
        }
        coupled_deltas(&counts, risks, out);
    });
    Ok(CubeLowerResult::from_deltas(
        n,
        m,
        moments.estimates(),
        Method::MonteCarlo,
    ))
}

/// Which evaluation route `cube_lower` takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    /// Exact when both multinomials fit under the enumeration guard.
    Auto,
    Exact,
    MonteCarlo,
}

/// Threshold differences for `2n` uniform cells, choosing the route automatically.
pub fn cube_lower(n: usize, r: f64, mc_samples: usize, seed: u64) -> Result<CubeLowerResult> {
    cube_lower_with(n, r, mc_samples, seed, Route::Auto)
}

pub fn cube_lower_with(
    n: usize,
    r: f64,
    mc_samples: usize,
    seed: u64,
    route: Route,
) -> Result<CubeLowerResult> {
    if n == 0 {
        return invalid("need n >= 1");
    }
    let m = 2 * n;
    let risks = bayes_risk_curve(r, n + 1)?;
    match route {
        Route::Exact => cube_lower_exact(n, m, &risks),
        Route::MonteCarlo => cube_lower_mc(n, m, &risks, mc_samples, seed),
        Route::Auto => match cube_lower_exact(n, m, &risks) {
            Err(Error::EnumerationGuard { .. }) => cube_lower_mc(n, m, &risks, mc_samples, seed),
            other => other,
        },
    }
}

/// `αβ / (12√2 · √(n + 1))`.
pub fn thm2_bound(alpha: f64, beta: f64, n: u64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return invalid(format!("alpha must lie in (0, 1], got {alpha}"));
    }
    if !(beta > 0.0 && beta <= 1.0) {
        return invalid(format!("beta must lie in (0, 1], got {beta}"));
    }
    if n == 0 {
        return invalid("need n >= 1");
    }
    Ok(alpha * beta / (12.0 * std::f64::consts::SQRT_2 * ((n + 1) as f64).sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixedPbinMass {
    pub k_star: usize,
    pub mass: f64,
    /// `masses[k] = E P(PBin(f(N_1), …, f(N_m)) = k)`.
    pub masses: Vec<f64>,
    pub ci: Vec<f64>,
    pub method: Method,
}

fn check_monotone(table: &[f64]) -> Result<()> {
    let up = table.windows(2).all(|w| w[0] <= w[1]);
    let down = table.windows(2).all(|w| w[0] >= w[1]);
    if !(up || down) {
        return invalid("function table must be monotone");
    }
    if table.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return invalid("function values must lie in [0, 1]");
    }
    Ok(())
}

/// Largest point mass of the mixed Poisson-binomial `PBin(f(N_1), …, f(N_m))`,
/// `N ~ Mult(n, weights)`, with the same `f` in every cell.
pub fn mixedpbin_mass(
    n: usize,
    weights: &[f64],
    f: &[f64],
    mc_samples: usize,
    seed: u64,
) -> Result<MixedPbinMass> {
    let spec = MultinomialSpec::new(n, weights.to_vec())?;
    if f.len() < n + 1 {
        return invalid(format!("function table needs {} entries, got {}", n + 1, f.len()));
    }
    check_monotone(f)?;
    let m = spec.cells();
    let mut probs = vec![0.0; m];
    let mut acc = vec![0.0; m + 1];
    let (est, method) = match for_each_multinomial(&spec, |counts, w| {
        for (p, &c) in probs.iter_mut().zip(counts) {
            *p = f[c];
        }
        for (a, x) in acc.iter_mut().zip(convolve_bernoullis(&probs)) {
            *a += w * x;
        }
    }) {
        Ok(()) => (acc.into_iter().map(McEstimate::exact).collect::<Vec<_>>(), Method::Exact),
        Err(Error::EnumerationGuard { .. }) => {
            if mc_samples < 2 {
                return invalid("Monte Carlo path needs at least 2 count samples");
            }
            let moments = chunked_moments(mc_samples, m + 1, seed, tag("lower/mixedpbin"), |rng, out| {
                let counts = multinomial_sample(&spec, rng);
                let probs: Vec<f64> = counts.iter().map(|&c| f[c]).collect();
                out.copy_from_slice(&convolve_bernoullis(&probs));
            });
            (moments.estimates(), Method::MonteCarlo)
        }
        Err(e) => return Err(e),
    };
    let (k_star, best) = est
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (k, e)| {
            if e.estimate > acc.1 {
                (k, e.estimate)
            } else {
                acc
            }
        });
    Ok(MixedPbinMass {
        k_star,
        mass: best,
        masses: est.iter().map(|e| e.estimate).collect(),
        ci: est.iter().map(|e| e.half_width).collect(),
        method,
    })
}

fn check_risks(risks: &[f64]) -> Result<()> {
    if risks.iter().any(|r| !(0.0..=1.0).contains(r)) {
        return invalid("risks must lie in [0, 1]");
    }
    Ok(())
}

const MIN_TRIALS: usize = 10_000;

/// Fraction of trials in which at least `l` of the independent per-cell tests err.
pub fn simulate_multitest_risk(risks: &[f64], l: usize, trials: usize, seed: u64) -> Result<f64> {
    check_risks(risks)?;
    if l < 1 || l > risks.len() {
        return invalid(format!("threshold {l} outside 1..={}", risks.len()));
    }
    if trials < MIN_TRIALS {
        return invalid(format!("need at least {MIN_TRIALS} trials, got {trials}"));
    }
    let moments = chunked_moments(trials, 1, seed, tag("lower/multitest"), |rng, out| {
        let errors = risks.iter().filter(|&&p| rng.random::<f64>() < p).count();
        out[0] = if errors >= l { 1.0 } else { 0.0 };
    });
    Ok(moments.estimates()[0].estimate)
}

/// Error frequency of the procedure that first picks a component by `weights`
/// and then errs with that component's risk.
pub fn simulate_mixture_risk(
    component_risks: &[f64],
    weights: &[f64],
    trials: usize,
    seed: u64,
) -> Result<f64> {
    check_risks(component_risks)?;
    if component_risks.len() != weights.len() || weights.is_empty() {
        return invalid("need one weight per component");
    }
    MultinomialSpec::new(1, weights.to_vec())?;
    if trials < MIN_TRIALS {
        return invalid(format!("need at least {MIN_TRIALS} trials, got {trials}"));
    }
    let cumulative: Vec<f64> = weights
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w;
            Some(*acc)
        })
        .collect();
    let last = weights.len() - 1;
    let moments = chunked_moments(trials, 1, seed, tag("lower/mixture"), |rng, out| {
        let u: f64 = rng.random();
        let i = cumulative.partition_point(|&c| c <= u).min(last);
        out[0] = if rng.random::<f64>() < component_risks[i] {
            1.0
        } else {
            0.0
        };
    });
    Ok(moments.estimates()[0].estimate)
}

/// `r(0) - r(1)`, which equals `α / 2` for the hypercube cell pair.
pub fn first_step_gain(curve: &RiskCurve) -> f64 {
    curve.at(0) - curve.at(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tolerance::EXACT;

    #[test]
    fn risk_curve_examples() {
        let c = bayes_risk_curve(2.0, 6).unwrap();
        assert_eq!(c.at(0), 0.5);
        assert!((c.at(1) - 0.25).abs() < EXACT);
        assert!((c.at(2) - 0.25).abs() < EXACT);
        assert!((c.at(3) - 0.15625).abs() < EXACT);
        assert!((c.at(5) - 53.0 / 512.0).abs() < EXACT);
        let c4 = bayes_risk_curve(4.0, 3).unwrap();
        assert!((c4.at(3) - 11.0 / 256.0).abs() < EXACT);
        assert!(bayes_risk_curve(1.0, 3).is_err());
    }

    #[test]
    fn risk_curve_first_step() {
        for r in [1.5, 2.0, 4.0, 10.0] {
            let c = bayes_risk_curve(r, 1).unwrap();
            assert!((c.at(1) - 1.0 / (2.0 * r)).abs() < EXACT);
            assert!((first_step_gain(&c) - (1.0 - 1.0 / r) / 2.0).abs() < EXACT);
        }
    }

    #[test]
    fn cube_lower_n1_matches_enumeration() {
        let res = cube_lower(1, 2.0, 0, 0).unwrap();
        assert_eq!(res.method, Method::Exact);
        assert_eq!(res.m, 2);
        assert!((res.per_l[0] - 0.09375).abs() < EXACT);
        assert!((res.per_l[1] - 0.03125).abs() < EXACT);
        assert_eq!(res.l_star, 1);
        assert!((res.delta_avg_paper - 0.0625).abs() < EXACT);
        assert!(res.delta >= thm2_bound(0.5, 1.0, 1).unwrap());
    }

    #[test]
    fn cube_lower_small_n_frozen() {
        // Exact rationals from an independent brute-force enumeration.
        let want2 = [147.0 / 4096.0, 273.0 / 4096.0, 153.0 / 4096.0, 27.0 / 4096.0];
        let res = cube_lower(2, 2.0, 0, 0).unwrap();
        for (g, w) in res.per_l.iter().zip(want2) {
            assert!((g - w).abs() < EXACT);
        }
        assert_eq!(res.l_star, 2);
        let want3 = [
            105.0 / 8192.0,
            9395.0 / 221184.0,
            5935.0 / 110592.0,
            395.0 / 12288.0,
            2015.0 / 221184.0,
            215.0 / 221184.0,
        ];
        let res = cube_lower(3, 2.0, 0, 0).unwrap();
        for (g, w) in res.per_l.iter().zip(want3) {
            assert!((g - w).abs() < EXACT);
        }
        let res = cube_lower(2, 1.5, 0, 0).unwrap();
        assert!((res.per_l[1] - 0.042534722222222224).abs() < EXACT);
    }

    #[test]
    fn mc_route_agrees_with_exact() {
        for (n, r) in [(1usize, 2.0), (2, 2.0), (3, 4.0), (4, 1.5)] {
            let exact = cube_lower_with(n, r, 0, 0, Route::Exact).unwrap();
            let mc = cube_lower_with(n, r, 20_000, 5, Route::MonteCarlo).unwrap();
            for l in 0..2 * n {
                let diff = (exact.per_l[l] - mc.per_l[l]).abs();
                assert!(diff <= mc.ci[l] + 1e-12, "n={n} r={r} l={}: {diff} > {}", l + 1, mc.ci[l]);
            }
        }
    }

    #[test]
    fn auto_route_switches_at_guard() {
        assert_eq!(cube_lower(4, 2.0, 100, 1).unwrap().method, Method::Exact);
        assert_eq!(cube_lower(8, 2.0, 100, 1).unwrap().method, Method::MonteCarlo);
        assert!(cube_lower(0, 2.0, 100, 1).is_err());
    }

    #[test]
    fn thm2_examples() {
        assert!((thm2_bound(0.5, 1.0, 1).unwrap() - 0.5 / (12.0 * 2f64.sqrt() * 2f64.sqrt())).abs() < 1e-15);
        assert!((thm2_bound(0.5, 1.0, 1).unwrap() - 0.020833).abs() < 1e-6);
        assert!(((1.0 - 0.5) / (12.0 * 2f64.sqrt()) - 0.029463).abs() < 1e-6);
        assert!(thm2_bound(1e-300, 1.0, 1).unwrap() < 1e-300);
        assert!(thm2_bound(0.0, 1.0, 1).is_err());
        assert!(thm2_bound(0.5, -1.0, 1).is_err());
        assert!(thm2_bound(0.5, 1.0, 0).is_err());
    }

    #[test]
    fn mixedpbin_examples() {
        let res = mixedpbin_mass(1, &[1.0], &[0.5, 0.5], 0, 0).unwrap();
        assert!((res.mass - 0.5).abs() < EXACT);
        assert!(res.mass >= 1.0 / 3.0);

        let curve = bayes_risk_curve(2.0, 1).unwrap();
        let res = mixedpbin_mass(1, &[0.5, 0.5], &curve.values, 0, 0).unwrap();
        for (g, w) in res.masses.iter().zip([0.375, 0.5, 0.125]) {
            assert!((g - w).abs() < EXACT);
        }
        assert_eq!(res.k_star, 1);
        assert!(res.mass >= 1.0 / (3.0 * 2f64.sqrt()));

        let res = mixedpbin_mass(3, &[0.25; 4], &[1.0; 4], 0, 0).unwrap();
        assert_eq!(res.k_star, 4);
        assert!((res.mass - 1.0).abs() < EXACT);

        assert!(mixedpbin_mass(2, &[0.5, 0.5], &[0.1, 0.5, 0.2], 0, 0).is_err());
        assert!(mixedpbin_mass(2, &[0.5, 0.5], &[0.1, 0.5], 0, 0).is_err());
    }

    #[test]
    fn mixedpbin_mc_matches_exact() {
        let curve = bayes_risk_curve(2.0, 2).unwrap();
        let exact = mixedpbin_mass(2, &[0.25; 4], &curve.values, 0, 0).unwrap();
        for (g, w) in exact.masses.iter().zip([0.12890625, 0.359375, 0.3515625, 0.140625, 0.01953125]) {
            assert!((g - w).abs() < EXACT);
        }
        let curve = bayes_risk_curve(2.0, 9).unwrap();
        let big = mixedpbin_mass(9, &[1.0 / 16.0; 16], &curve.values, 20_000, 3).unwrap();
        assert_eq!(big.method, Method::MonteCarlo);
        let total: f64 = big.masses.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn simulation_examples() {
        let est = simulate_multitest_risk(&[0.5, 0.5], 1, 1_000_000, 1).unwrap();
        assert!((est - 0.75).abs() <= 4.0 * (0.75f64 * 0.25 / 1e6).sqrt());
        assert_eq!(simulate_multitest_risk(&[0.0, 0.0, 0.0], 2, 10_000, 1).unwrap(), 0.0);
        let est = simulate_multitest_risk(&[0.25, 0.5], 2, 1_000_000, 2).unwrap();
        assert!((est - 0.125).abs() <= 4.0 * (0.125f64 * 0.875 / 1e6).sqrt());
        assert!(simulate_multitest_risk(&[0.5], 1, 9_999, 1).is_err());
        assert!(simulate_multitest_risk(&[0.5], 2, 10_000, 1).is_err());

        let est = simulate_mixture_risk(&[0.1, 0.3], &[0.5, 0.5], 1_000_000, 3).unwrap();
        assert!((est - 0.2).abs() <= 4.0 * (0.2f64 * 0.8 / 1e6).sqrt());
        let est = simulate_mixture_risk(&[0.37], &[1.0], 100_000, 4).unwrap();
        assert!((est - 0.37).abs() <= 4.0 * (0.37f64 * 0.63 / 1e5).sqrt());
        assert_eq!(simulate_mixture_risk(&[0.0, 0.0], &[0.3, 0.7], 10_000, 5).unwrap(), 0.0);
        assert!(simulate_mixture_risk(&[0.1], &[0.5, 0.5], 10_000, 5).is_err());
    }
}
