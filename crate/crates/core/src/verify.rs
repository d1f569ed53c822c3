//! Self-checks run by `lecam verify`: lemma identities, oracle equivalences
//! and the ordering of the bound chain.

use rand::Rng;

use crate::experiment::{make_hypercube_density, richness_witness, tv_distance, HypercubeSpec};
use crate::lower::{
    bayes_risk_curve, cube_lower, cube_lower_with, simulate_mixture_risk, simulate_multitest_risk,
    thm2_bound, Route,
};
use crate::pbin::{
    multinomial_enumerate, pbin_pmf, pbin_shift_difference, pbin_survival, MultinomialSpec,
    PBinParams,
};
use crate::stream::{child_stream, tag, RandomStream};
use crate::tolerance::{ENUMERATION_SUM, EXACT};
use crate::upper::{
    chi2_radius, exact_mad, hoeffding_certificate, mattner_floor, mc_mad, thm1_bound,
    uniform_ratio, CsCertificate, TwoLevelRatio,
};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Check = fn(&Budget, &mut RandomStream) -> Result<String, String>;

/// Sizes of the randomised checks.
#[derive(Debug, Clone, Copy)]
pub struct Budget {
    pub instances: usize,
    pub max_k: u64,
    pub trials: usize,
    pub mc_runs: usize,
}

impl Budget {
    pub fn quick() -> Self {
        Self {
            instances: 100,
            max_k: 128,
            trials: 100_000,
            mc_runs: 20,
        }
    }

    pub fn full() -> Self {
        Self {
            instances: 1000,
            max_k: 1024,
            trials: 1_000_000,
            mc_runs: 200,
        }
    }
}

const CHECKS: &[(&str, Check)] = &[
    ("pbin-matches-enumeration", pbin_matches_enumeration),
    ("pbin-shift-identity", shift_identity),
    ("pbin-stochastic-order", stochastic_order),
    ("multinomial-sums-to-one", multinomial_sums),
    ("hypercube-tv-hamming", hypercube_tv),
    ("richness-witness", witness),
    ("ratio-unit-mean", ratio_mean),
    ("upper-closed-form-dominates", upper_dominates),
    ("mad-above-floor", mad_above_floor),
    ("chi2-radius-quadrature", chi2_quadrature),
    ("mc-mad-coverage", mc_mad_coverage),
    ("risk-curve", risk_curve),
    ("cube-lower-spot", cube_lower_spot),
    ("cube-lower-routes-agree", cube_lower_routes),
    ("multitest-simulation", multitest_simulation),
    ("mixture-simulation", mixture_simulation),
];

pub fn run_checks(budget: &Budget, seed: u64) -> Vec<CheckOutcome> {
    CHECKS
        .iter()
        .enumerate()
        .map(|(i, (name, check))| {
            let mut rng = child_stream(seed, tag("verify"), i as u64);
            let (passed, detail) = match check(budget, &mut rng) {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            CheckOutcome {
                name,
                passed,
                detail,
            }
        })
        .collect()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_probs(rng: &mut RandomStream, max_len: usize) -> Vec<f64> {
    let m = rng.random_range(0..=max_len);
    (0..m).map(|_| rng.random::<f64>()).collect()
}

fn brute_pmf(p: &[f64]) -> Vec<f64> {
    let mut mass = vec![0.0; p.len() + 1];
    for mask in 0u32..(1 << p.len()) {
        let prob: f64 = p
            .iter()
            .enumerate()
            .map(|(i, &pi)| if mask >> i & 1 == 1 { pi } else { 1.0 - pi })
            .product();
        mass[mask.count_ones() as usize] += prob;
    }
    mass
}

fn pbin_matches_enumeration(b: &Budget, rng: &mut RandomStream) -> Result<String, String> {
    let mut worst = 0.0f64;
    for _ in 0..b.instances / 2 {
        let p = random_probs(rng, 12);
        let got = pbin_pmf(&PBinParams::new(p.clone()).map_err(|e| e.to_string())?);
        for (g, w) in got.mass().iter().zip(brute_pmf(&p)) {
            worst = worst.max((g - w).abs());
        }
    }
    ensure(worst <= EXACT, || format!("max error {worst:e}"))?;
    Ok(format!("max error {worst:.1e}"))
}

fn shift_identity(b: &Budget, rng: &mut RandomStream) -> Result<String, String> {
    let mut worst = 0.0f64;
    for _ in 0..b.instances {
        let rest = random_probs(rng, 9);
        let (x, y): (f64, f64) = (rng.random(), rng.random());
        if x == y {
            continue;
        }
        let l = rng.random_range(1..=rest.len() as i64 + 1);
        let params = PBinParams::new(rest).map_err(|e| e.to_string())?;
        let (lhs, rhs) =
            pbin_shift_difference(&params, x.max(y), x.min(y), l).map_err(|e| e.to_string())?;
        worst = worst.max((lhs - rhs).abs());
    }
    ensure(worst <= EXACT, || format!("max gap {worst:e}"))?;
    Ok(format!("max gap {worst:.1e}"))
}

fn stochastic_order(b: &Budget, rng: &mut RandomStream) -> Result<String, String> {
    for _ in 0..b.instances {
        let mut p = random_probs(rng, 10);
        if p.is_empty() {
            continue;
        }
        let before = PBinParams::new(p.clone()).map_err(|e| e.to_string())?;
        let i = rng.random_range(0..p.len());
        p[i] *= rng.random::<f64>();
        let after = PBinParams::new(p).map_err(|e| e.to_string())?;
        for l in 0..=before.len() as i64 {
            let (s0, s1) = (pbin_survival(&before, l), pbin_survival(&after, l));
            ensure(s1 <= s0 + EXACT, || format!("survival rose at l={l}: {s0} -> {s1}"))?;
        }
    }
    Ok("lowering a probability never raised a survival".into())
}

fn multinomial_sums(_: &Budget, rng: &mut RandomStream) -> Result<String, String> {
    for _ in 0..20 {
        let m = rng.random_range(1..=5);
        let raw: Vec<f64> = (0..m).map(|_| rng.random::<f64>() + 0.01).collect();
        let total: f64 = raw.iter().sum();
        let mut w: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let fix = 1.0 - w.iter().sum::<f64>();
        w[0] += fix;
        let spec = MultinomialSpec::new(rng.random_range(0..=8), w).map_err(|e| e.to_string())?;
        let sum: f64 = multinomial_enumerate(&spec)
            .map_err(|e| e.to_string())?
            .iter()
            .map(|x| x.1)
            .sum();
        ensure((sum - 1.0).abs() <= ENUMERATION_SUM, || format!("sum {sum}"))?;
    }
    Ok("20 random enumerations".into())
}

fn hypercube_tv(b: &Budget, rng: &mut RandomStream) -> Result<String, String> {
    for _ in 0..b.instances / 10 {
        let r = 1.0 + 9.0 * rng.random::<f64>() + 1e-3;
        let m = rng.random_range(1..=16);
        let bits: Vec<u8> = (0..m).map(|_| rng.random_range(0..=1)).collect();
        let other: Vec<u8> = bits
            .iter()
            .map(|&x| if rng.random::<bool>() { 1 - x } else { x })
            .collect();
        let k = bits.iter().zip(&other).filter(|(a, b)| a != b).count();
        let f = make_hypercube_density(&HypercubeSpec::new(r, bits).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let g = make_hypercube_density(&HypercubeSpec::new(r, other).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let want = k as f64 * (1.0 - 1.0 / r) / m as f64;
        let got = tv_distance(&f, &g);
        ensure((got - want).abs() <= EXACT, || format!("tv {got} vs {want}"))?;
        ensure(f.respects_floor(1.0 / r), || "density below 1/r".into())?;
    }
    Ok("tv equals hamming distance times (1 - 1/r) / m".into())
}

fn witness(_: &Budget, _: &mut RandomStream) -> Result<String, String> {
    for &r in &[1.01, 1.5, 2.0, 4.0] {
        for m in [1usize, 2, 5, 8] {
            let w = richness_witness(r, m).map_err(|e| e.to_string())?;
            ensure((w.alpha - (1.0 - 1.0 / r)).abs() <= EXACT, || "alpha".into())?;
            let bits: Vec<u8> = (0..m).map(|j| (j % 2) as u8).collect();
            let a = w.assemble(&bits).map_err(|e| e.to_string())?;
            let b = make_hypercube_density(&HypercubeSpec::new(r, bits).map_err(|e| e.to_string())?)
                .map_err(|e| e.to_string())?;
            ensure(tv_distance(&a, &b) <= EXACT, || format!("r={r} m={m}: reassembly differs"))?;
        }
    }
    Ok("witnesses verified for 16 (r, m)".into())
}

fn ratio_mean(b: &Budget, rng: &mut RandomStream) -> Result<String, String> {
    for _ in 0..b.instances / 10 {
        let pieces = rng.random_range(1..=8);
        let mut bp: Vec<f64> = (0..pieces - 1).map(|_| rng.random::<f64>()).collect();
        bp.push(0.0);
        bp.push(1.0);
        bp.sort_by(f64::total_cmp);
        bp.dedup();
        let values: Vec<f64> = (0..bp.len() - 1).map(|_| 0.1 + rng.random::<f64>()).collect();
        let f = crate::StepDensity::normalized(bp, values).map_err(|e| e.to_string())?;
        let mean = uniform_ratio(&f).map_err(|e| e.to_string())?.mean_under(&f);
        ensure((mean - 1.0).abs() <= EXACT, || format!("mean {mean}"))?;
    }
    Ok("likelihood ratio has unit mean".into())
}

fn cube_ratio(r: f64) -> Result<TwoLevelRatio, String> {
    let f = make_hypercube_density(&HypercubeSpec::new(r, vec![0]).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    uniform_ratio(&f)
        .map_err(|e| e.to_string())?
        .two_level
        .ok_or_else(|| "not two-level".to_string())
}

fn upper_dominates(b: &Budget, _: &mut RandomStream) -> Result<String, String> {
    let mut slack = f64::INFINITY;
    for &r in &[1.5, 2.0, 4.0] {
        let ratio = cube_ratio(r)?;
        let cert = hoeffding_certificate(r).map_err(|e| e.to_string())?;
        for k in 1..=b.max_k {
            let half = exact_mad(&ratio, k).map_err(|e| e.to_string())? / 2.0;
            let bound = thm1_bound(&cert, k - 1);
            ensure(half < bound, || format!("r={r} k={k}: {half} >= {bound}"))?;
            slack = slack.min(bound / half);
        }
    }
    Ok(format!("smallest bound/surrogate ratio {slack:.3}"))
}

fn mad_above_floor(b: &Budget, _: &mut RandomStream) -> Result<String, String> {
    for &r in &[1.5, 2.0, 4.0] {
        let ratio = cube_ratio(r)?;
        for k in 1..=b.max_k {
            let mad = exact_mad(&ratio, k).map_err(|e| e.to_string())?;
            let floor = mattner_floor(&ratio, k).map_err(|e| e.to_string())?;
            ensure(mad >= floor, || format!("r={r} k={k}: {mad} < {floor}"))?;
        }
    }
    Ok("exact deviation never below the floor".into())
}

fn chi2_quadrature(_: &Budget, _: &mut RandomStream) -> Result<String, String> {
    for &(c, s) in &[(2.0, 0.5), (1.0, 1.0), (3.0, 0.08)] {
        let lo = (f64::ln(c) / s).sqrt();
        let hi = lo + 40.0 / s.sqrt();
        let steps = 100_000;
        let h = (hi - lo) / steps as f64;
        let f = |x: f64| 2.0 * s * c * x.powi(3) * (-s * x * x).exp();
        let inner: f64 = (1..steps)
            .map(|i| f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 })
            .sum();
        let quad = (f(lo) + f(hi) + inner) * h / 3.0;
        let cert = CsCertificate::new(c, s).map_err(|e| e.to_string())?;
        let closed = chi2_radius(&cert);
        ensure((quad - closed).abs() <= 1e-8 * closed.max(1.0), || {
            format!("C={c} s={s}: {closed} vs {quad}")
        })?;
    }
    Ok("closed form matches Simpson quadrature".into())
}

fn mc_mad_coverage(b: &Budget, rng: &mut RandomStream) -> Result<String, String> {
    let f = make_hypercube_density(&HypercubeSpec::new(2.0, vec![0, 1]).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let ratio = cube_ratio(2.0)?;
    let mut covered = 0;
    for _ in 0..b.mc_runs {
        let k = rng.random_range(1..=8);
        let est = mc_mad(&f, k, 10_000, rng.random()).map_err(|e| e.to_string())?;
        if est.contains(exact_mad(&ratio, k as u64).map_err(|e| e.to_string())?) {
            covered += 1;
        }
    }
    let need = (b.mc_runs as f64 * 0.99).floor() as usize;
    let need = if b.mc_runs < 100 { b.mc_runs - 1 } else { need };
    ensure(covered >= need, || format!("{covered}/{} intervals covered", b.mc_runs))?;
    Ok(format!("{covered}/{} intervals covered", b.mc_runs))
}

fn risk_curve(_: &Budget, _: &mut RandomStream) -> Result<String, String> {
    let c = bayes_risk_curve(2.0, 256).map_err(|e| e.to_string())?;
    ensure(c.at(0) == 0.5, || "r(0) != 0.5".into())?;
    ensure((c.at(1) - 0.25).abs() <= EXACT, || "r(1)".into())?;
    ensure((c.at(3) - 0.15625).abs() <= EXACT, || "r(3)".into())?;
    ensure(c.values.windows(2).all(|w| w[1] <= w[0]), || "not monotone".into())?;
    Ok("r(0)=1/2, r(1)=1/4, r(3)=5/32, nonincreasing to 256".into())
}

fn cube_lower_spot(_: &Budget, _: &mut RandomStream) -> Result<String, String> {
    let res = cube_lower(1, 2.0, 0, 0).map_err(|e| e.to_string())?;
    ensure((res.per_l[0] - 0.09375).abs() <= EXACT, || format!("delta {}", res.per_l[0]))?;
    for n in 1..=4 {
        let res = cube_lower(n, 2.0, 0, 0).map_err(|e| e.to_string())?;
        let bound = thm2_bound(0.5, 1.0, n as u64).map_err(|e| e.to_string())?;
        ensure(res.delta >= bound, || format!("n={n}: {} < {bound}", res.delta))?;
        ensure(res.per_l.iter().all(|&d| d >= -EXACT), || format!("n={n}: negative delta"))?;
    }
    Ok("n=1 delta 0.09375; closed form below for n <= 4".into())
}

fn cube_lower_routes(b: &Budget, rng: &mut RandomStream) -> Result<String, String> {
    for (n, r) in [(2usize, 2.0), (3, 1.5)] {
        let exact = cube_lower_with(n, r, 0, 0, Route::Exact).map_err(|e| e.to_string())?;
        let mc = cube_lower_with(n, r, b.trials / 10, rng.random(), Route::MonteCarlo)
            .map_err(|e| e.to_string())?;
        for l in 0..2 * n {
            ensure((exact.per_l[l] - mc.per_l[l]).abs() <= mc.ci[l] + EXACT, || {
                format!("n={n} l={}: {} vs {}", l + 1, exact.per_l[l], mc.per_l[l])
            })?;
        }
    }
    Ok("exact and Monte Carlo routes agree".into())
}

fn multitest_simulation(b: &Budget, rng: &mut RandomStream) -> Result<String, String> {
    for _ in 0..5 {
        let m = rng.random_range(1..=6);
        let risks: Vec<f64> = (0..m).map(|_| 0.5 * rng.random::<f64>()).collect();
        let l = rng.random_range(1..=m);
        let want = pbin_survival(&PBinParams::new(risks.clone()).map_err(|e| e.to_string())?, l as i64);
        let got = simulate_multitest_risk(&risks, l, b.trials, rng.random()).map_err(|e| e.to_string())?;
        let se = (want * (1.0 - want) / b.trials as f64).sqrt();
        ensure((got - want).abs() <= 4.0 * se, || format!("{got} vs {want}"))?;
    }
    Ok("error counts follow the Poisson-binomial law".into())
}

fn mixture_simulation(b: &Budget, rng: &mut RandomStream) -> Result<String, String> {
    for _ in 0..5 {
        let m = rng.random_range(1..=5);
        let risks: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
        let raw: Vec<f64> = (0..m).map(|_| rng.random::<f64>() + 0.01).collect();
        let total: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let want: f64 = risks.iter().zip(&w).map(|(r, w)| r * w).sum();
        let got = simulate_mixture_risk(&risks, &w, b.trials, rng.random()).map_err(|e| e.to_string())?;
        let se = (want * (1.0 - want) / b.trials as f64).sqrt();
        ensure((got - want).abs() <= 4.0 * se, || format!("{got} vs {want}"))?;
    }
    Ok("mixture risk equals the weighted average".into())
}
