//! Binomial, Poisson-binomial and Multinomial distributions.
//!
//! Poisson-binomial pmfs are built by the O(m²) convolution recursion in
//! `f64`; the grouped variant used by the lower-bound Monte Carlo convolves
//! whole Binomial blocks and trims tails below [`TAIL_TRIM`].

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use statrs::function::factorial::{ln_binomial, ln_factorial};

use crate::error::{invalid, Error, Result};
use crate::tolerance::{ENUMERATION_GUARD, ENUMERATION_SUM, EXACT, TAIL_TRIM};

fn check_probability(p: f64, what: &str) -> Result<()> {
    if p.is_finite() && (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        invalid(format!("{what} must lie in [0, 1], got {p}"))
    }
}

/// Success probabilities of independent, not necessarily identical, Bernoulli trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PBinParams {
    probs: Vec<f64>,
}

impl PBinParams {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        for &p in &probs {
            check_probability(p, "success probability")?;
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// A copy with `p` appended.
    pub fn with(&self, p: f64) -> Result<Self> {
        let mut probs = self.probs.clone();
        probs.push(p);
        Self::new(probs)
    }
}

impl TryFrom<Vec<f64>> for PBinParams {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<PBinParams> for Vec<f64> {
    fn from(p: PBinParams) -> Self {
        p.probs
    }
}

/// A probability mass function on `0..len`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pmf {
    mass: Vec<f64>,
}

impl Pmf {
    pub fn new(mass: Vec<f64>) -> Result<Self> {
        if mass.is_empty() {
            return invalid("pmf needs at least one entry");
        }
        if mass.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
            return invalid("pmf entries must be finite and nonnegative");
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > EXACT {
            return invalid(format!("pmf sums to {total}, not 1"));
        }
        Ok(Self { mass })
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// Probability of `k`, zero outside the support.
    pub fn at(&self, k: i64) -> f64 {
        usize::try_from(k)
            .ok()
            .and_then(|k| self.mass.get(k))
            .copied()
            .unwrap_or(0.0)
    }

    /// `P(X >= l)`, summing the shorter tail.
    pub fn survival(&self, l: i64) -> f64 {
        let len = self.mass.len() as i64;
        if l <= 0 {
            return 1.0;
        }
        if l >= len {
            return 0.0;
        }
        let l = l as usize;
        let upper = &self.mass[l..];
        if upper.len() <= l {
            upper.iter().sum::<f64>().min(1.0)
        } else {
            (1.0 - self.mass[..l].iter().sum::<f64>()).clamp(0.0, 1.0)
        }
    }

    /// All survivals `P(X >= l)` for `l = 0..=len`.
    pub fn survivals(&self) -> Vec<f64> {
        (0..=self.mass.len() as i64).map(|l| self.survival(l)).collect()
    }
}

/// Pmf of `PBin(p_1, …, p_m)` by iterative convolution.
pub fn pbin_pmf(params: &PBinParams) -> Pmf {
    Pmf {
        mass: convolve_bernoullis(params.probs()),
    }
}

pub(crate) fn convolve_bernoullis(probs: &[f64]) -> Vec<f64> {
    let mut mass = Vec::with_capacity(probs.len() + 1);
    mass.push(1.0);
    for &p in probs {
        mass.push(0.0);
        for k in (1..mass.len()).rev() {
            mass[k] = mass[k] * (1.0 - p) + mass[k - 1] * p;
        }
        mass[0] *= 1.0 - p;
    }
    mass
}

pub fn pbin_survival(params: &PBinParams, l: i64) -> f64 {
    pbin_pmf(params).survival(l)
}

/// Both sides of the single-coordinate shift identity
/// `P(S + B(p) >= l) - P(S + B(p') >= l) = P(S = l - 1) (p - p')`,
/// where `S ~ PBin(rest)`.
pub fn pbin_shift_difference(
    rest: &PBinParams,
    p: f64,
    p_prime: f64,
    l: i64,
) -> Result<(f64, f64)> {
    check_probability(p, "p")?;
    check_probability(p_prime, "p_prime")?;
    if p <= p_prime {
        return invalid(format!("need p > p_prime, got {p} <= {p_prime}"));
    }
    if l < 1 || l > rest.len() as i64 + 1 {
        return invalid(format!("threshold {l} outside 1..={}", rest.len() + 1));
    }
    let lhs = pbin_survival(&rest.with(p)?, l) - pbin_survival(&rest.with(p_prime)?, l);
    let rhs = pbin_pmf(rest).at(l - 1) * (p - p_prime);
    Ok((lhs, rhs))
}

/// Binomial(n, p) pmf on `0..=n`.
pub fn binomial_pmf(n: u64, p: f64) -> Vec<f64> {
    let len = n as usize + 1;
    if p <= 0.0 {
        let mut v = vec![0.0; len];
        v[0] = 1.0;
        return v;
    }
    if p >= 1.0 {
        let mut v = vec![0.0; len];
        v[len - 1] = 1.0;
        return v;
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    (0..=n)
        .map(|k| (ln_binomial(n, k) + k as f64 * lp + (n - k) as f64 * lq).exp())
        .collect()
}

/// A pmf stored as `mass[i] = P(X = offset + i)`; mass outside is below [`TAIL_TRIM`].
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct TrimmedPmf {
    pub offset: usize,
    pub mass: Vec<f64>,
}

impl TrimmedPmf {
    pub fn point(at: usize) -> Self {
        Self {
            offset: at,
            mass: vec![1.0],
        }
    }

    #[cfg(test)]
    pub fn at(&self, k: usize) -> f64 {
        k.checked_sub(self.offset)
            .and_then(|i| self.mass.get(i))
            .copied()
            .unwrap_or(0.0)
    }

    /// Binomial(n, p), built outward from the mode by ratio recursion.
    pub fn binomial(n: usize, p: f64) -> Self {
        if n == 0 || p <= 0.0 {
            return Self::point(0);
        }
        if p >= 1.0 {
            return Self::point(n);
        }
        let mode = (((n + 1) as f64 * p).floor() as usize).min(n);
        let at_mode = (ln_binomial(n as u64, mode as u64)
            + mode as f64 * p.ln()
            + (n - mode) as f64 * (-p).ln_1p())
        .exp();
        let odds = p / (1.0 - p);
        let mut up = vec![at_mode];
        let mut k = mode;
        while k < n {
            let next = up[up.len() - 1] * (n - k) as f64 / (k + 1) as f64 * odds;
            if next < TAIL_TRIM {
                break;
            }
            up.push(next);
            k += 1;
        }
        let mut down = Vec::new();
        let mut k = mode;
        let mut cur = at_mode;
        while k > 0 {
            cur *= k as f64 / ((n - k + 1) as f64 * odds);
            if cur < TAIL_TRIM {
                break;
            }
            down.push(cur);
            k -= 1;
        }
        let offset = mode - down.len();
        down.reverse();
        down.extend(up);
        Self { offset, mass: down }
    }

    pub fn convolve(&self, other: &Self) -> Self {
        let mut mass = vec![0.0; self.mass.len() + other.mass.len() - 1];
        for (i, &a) in self.mass.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (o, &b) in mass[i..].iter_mut().zip(&other.mass) {
                *o += a * b;
            }
        }
        Self {
            offset: self.offset + other.offset,
            mass,
        }
        .trimmed()
    }

    fn trimmed(mut self) -> Self {
        let start = self
            .mass
            .iter()
            .position(|&x| x >= TAIL_TRIM)
            .unwrap_or(0);
        let end = self
            .mass
            .iter()
            .rposition(|&x| x >= TAIL_TRIM)
            .map_or(self.mass.len(), |e| e + 1)
            .max(start + 1);
        self.mass.truncate(end);
        self.mass.drain(..start);
        self.offset += start;
        self
    }

    /// Removes one independent Bernoulli(p) summand: the `G` with `G * B(p) = self`.
    pub fn remove_bernoulli(&self, p: f64) -> Self {
        if p <= 0.0 {
            return self.clone();
        }
        if p >= 1.0 {
            return Self {
                offset: self.offset.saturating_sub(1),
                mass: self.mass.clone(),
            };
        }
        let len = self.mass.len();
        if len == 1 {
            return self.clone();
        }
        let mut g = vec![0.0; len - 1];
        if p <= 0.5 {
            // Forward recursion: error gain p / (1 - p) <= 1.
            let q = 1.0 - p;
            let mut prev = 0.0;
            for (t, gt) in g.iter_mut().enumerate() {
                *gt = ((self.mass[t] - p * prev) / q).max(0.0);
                prev = *gt;
            }
            Self {
                offset: self.offset,
                mass: g,
            }
        } else {
            let q = 1.0 - p;
            let mut next = 0.0;
            for t in (0..len - 1).rev() {
                g[t] = ((self.mass[t + 1] - q * next) / p).max(0.0);
                next = g[t];
            }
            Self {
                offset: self.offset,
                mass: g,
            }
        }
    }
}

/// `PBin` of `count` copies of each probability, grouped into Binomial blocks.
pub(crate) fn pbin_grouped(groups: &[(usize, f64)]) -> TrimmedPmf {
    groups
        .iter()
        .filter(|(c, _)| *c > 0)
        .fold(TrimmedPmf::point(0), |acc, &(c, p)| {
            acc.convolve(&TrimmedPmf::binomial(c, p))
        })
}

/// `Mult(trials, weights)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultinomialSpec {
    trials: usize,
    weights: Vec<f64>,
}

impl MultinomialSpec {
    pub fn new(trials: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return invalid("multinomial needs at least one cell");
        }
        for &w in &weights {
            check_probability(w, "multinomial weight")?;
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > EXACT {
            return invalid(format!("multinomial weights sum to {total}, not 1"));
        }
        Ok(Self { trials, weights })
    }

    pub fn uniform(trials: usize, cells: usize) -> Result<Self> {
        if cells == 0 {
            return invalid("multinomial needs at least one cell");
        }
        Self::new(trials, vec![1.0 / cells as f64; cells])
    }

    pub fn trials(&self) -> usize {
        self.trials
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn cells(&self) -> usize {
        self.weights.len()
    }
}

/// Number of compositions of `n` into `m` nonnegative parts, `C(n + m - 1, m - 1)`.
pub fn composition_count(n: usize, m: usize) -> f64 {
    if m == 0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let k = (m - 1).min(n);
    (0..k).fold(1.0, |acc, i| acc * (n + m - 1 - i) as f64 / (i + 1) as f64).round()
}

pub fn check_enumeration_guard(n: usize, m: usize) -> Result<()> {
    let count = composition_count(n, m);
    if count > ENUMERATION_GUARD {
        Err(Error::EnumerationGuard {
            count,
            guard: ENUMERATION_GUARD,
        })
    } else {
        Ok(())
    }
}

/// Draws one count vector by sequential conditional Binomials.
pub fn multinomial_sample<R: Rng + ?Sized>(spec: &MultinomialSpec, rng: &mut R) -> Vec<usize> {
    let mut counts = vec![0; spec.cells()];
    let mut left = spec.trials as u64;
    let mut mass_left = 1.0;
    let last = spec.cells() - 1;
    for (i, &w) in spec.weights.iter().enumerate() {
        if left == 0 {
            break;
        }
        if i == last {
            counts[i] = left as usize;
            break;
        }
        let p = if mass_left > 0.0 {
            (w / mass_left).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let k = Binomial::new(left, p).map_or(0, |b| b.sample(rng));
        counts[i] = k as usize;
        left -= k;
        mass_left -= w;
    }
    counts
}

/// Calls `visit(counts, probability)` for every composition of the trials,
/// in lexicographically decreasing order of the count vector.
pub fn for_each_multinomial<F>(spec: &MultinomialSpec, mut visit: F) -> Result<()>
where
    F: FnMut(&[usize], f64),
{
    check_enumeration_guard(spec.trials, spec.cells())?;
    let ln_w: Vec<f64> = spec.weights.iter().map(|w| w.ln()).collect();
    let mut counts = vec![0; spec.cells()];
    let base = ln_factorial(spec.trials as u64);
    recurse(spec, &ln_w, 0, spec.trials, base, &mut counts, &mut visit);
    Ok(())
}

fn recurse<F: FnMut(&[usize], f64)>(
    spec: &MultinomialSpec,
    ln_w: &[f64],
    cell: usize,
    left: usize,
    ln_prob: f64,
    counts: &mut [usize],
    visit: &mut F,
) {
    let last = counts.len() - 1;
    let term = |k: usize| {
        if k == 0 {
            0.0
        } else {
            k as f64 * ln_w[cell] - ln_factorial(k as u64)
        }
    };
    if cell == last {
        counts[cell] = left;
        let lp = ln_prob + term(left);
        visit(counts, if lp.is_nan() { 0.0 } else { lp.exp() });
        return;
    }
    for k in (0..=left).rev() {
        counts[cell] = k;
        recurse(spec, ln_w, cell + 1, left - k, ln_prob + term(k), counts, visit);
    }
    counts[cell] = 0;
}

/// All compositions of the trials with their exact multinomial probabilities.
pub fn multinomial_enumerate(spec: &MultinomialSpec) -> Result<Vec<(Vec<usize>, f64)>> {
    let mut out = Vec::new();
    for_each_multinomial(spec, |c, p| out.push((c.to_vec(), p)))?;
    debug_assert!((out.iter().map(|(_, p)| p).sum::<f64>() - 1.0).abs() <= ENUMERATION_SUM);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(v: &[f64]) -> PBinParams {
        PBinParams::new(v.to_vec()).unwrap()
    }

    /// Brute force over all 2^m outcomes.
    fn enumerate_pmf(p: &[f64]) -> Vec<f64> {
        let m = p.len();
        let mut mass = vec![0.0; m + 1];
        for mask in 0u32..(1 << m) {
            let mut prob = 1.0;
            for (i, &pi) in p.iter().enumerate() {
                prob *= if mask >> i & 1 == 1 { pi } else { 1.0 - pi };
            }
            mass[mask.count_ones() as usize] += prob;
        }
        mass
    }

    #[test]
    fn pmf_examples() {
        assert_eq!(pbin_pmf(&params(&[])).mass(), &[1.0]);
        assert_eq!(pbin_pmf(&params(&[0.5, 0.5])).mass(), &[0.25, 0.5, 0.25]);
        let got = pbin_pmf(&params(&[0.1, 0.2, 0.3]));
        let want = enumerate_pmf(&[0.1, 0.2, 0.3]);
        for (g, w) in got.mass().iter().zip(&want) {
            assert!((g - w).abs() < 1e-15);
        }
        for (g, w) in got.mass().iter().zip(&[0.504, 0.398, 0.092, 0.006]) {
            assert!((g - w).abs() < EXACT);
        }
    }

    #[test]
    fn rejects_bad_probability() {
        assert!(PBinParams::new(vec![0.5, 1.5]).is_err());
        assert!(PBinParams::new(vec![-0.1]).is_err());
        assert!(PBinParams::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn survival_examples() {
        assert!((pbin_survival(&params(&[0.25, 0.5]), 1) - 0.625).abs() < EXACT);
        assert_eq!(pbin_survival(&params(&[0.25, 0.5]), 3), 0.0);
        assert_eq!(pbin_survival(&params(&[1.0, 1.0]), 2), 1.0);
        assert_eq!(pbin_survival(&params(&[0.3]), 0), 1.0);
        assert_eq!(pbin_survival(&params(&[0.3]), -4), 1.0);
    }

    #[test]
    fn shift_difference_examples() {
        let (l, r) = pbin_shift_difference(&params(&[]), 1.0, 0.0, 1).unwrap();
        assert_eq!((l, r), (1.0, 1.0));
        let (l, r) = pbin_shift_difference(&params(&[0.5]), 0.8, 0.3, 1).unwrap();
        assert!((l - 0.25).abs() < EXACT && (r - 0.25).abs() < EXACT);

        let rest = [0.1, 0.2, 0.3, 0.4];
        let (l, r) = pbin_shift_difference(&params(&rest), 0.9, 0.1, 2).unwrap();
        let mut with_p = rest.to_vec();
        with_p.push(0.9);
        let mut with_q = rest.to_vec();
        with_q.push(0.1);
        let brute = enumerate_pmf(&with_p)[2..].iter().sum::<f64>()
            - enumerate_pmf(&with_q)[2..].iter().sum::<f64>();
        assert!((l - brute).abs() < EXACT);
        assert!((l - r).abs() < EXACT);
    }

    #[test]
    fn shift_difference_rejects() {
        assert!(pbin_shift_difference(&params(&[0.5]), 0.3, 0.3, 1).is_err());
        assert!(pbin_shift_difference(&params(&[0.5]), 0.3, 0.4, 1).is_err());
        assert!(pbin_shift_difference(&params(&[0.5]), 0.6, 0.4, 3).is_err());
        assert!(pbin_shift_difference(&params(&[0.5]), 0.6, 0.4, 0).is_err());
    }

    #[test]
    fn binomial_matches_convolution() {
        for &(n, p) in &[(0u64, 0.3), (1, 0.25), (7, 0.4), (30, 0.9), (5, 0.0), (5, 1.0)] {
            let a = binomial_pmf(n, p);
            let b = convolve_bernoullis(&vec![p; n as usize]);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-13, "n={n} p={p}");
            }
        }
    }

    #[test]
    fn grouped_matches_plain() {
        let groups = [(40, 0.5), (17, 0.25), (3, 0.15625), (0, 0.1), (5, 0.01)];
        let flat: Vec<f64> = groups
            .iter()
            .flat_map(|&(c, p)| std::iter::repeat_n(p, c))
            .collect();
        let plain = convolve_bernoullis(&flat);
        let grouped = pbin_grouped(&groups);
        for (k, &x) in plain.iter().enumerate() {
            assert!((x - grouped.at(k)).abs() < 1e-14, "k={k}");
        }
        // Remove one summand of each kind and compare with direct construction.
        for (i, &(c, p)) in groups.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let mut fewer = groups;
            fewer[i].0 -= 1;
            let direct = pbin_grouped(&fewer);
            let removed = grouped.remove_bernoulli(p);
            for k in 0..plain.len() {
                assert!((direct.at(k) - removed.at(k)).abs() < 1e-13, "group {i} k={k}");
            }
        }
    }

    #[test]
    fn remove_bernoulli_above_half() {
        let full = TrimmedPmf {
            offset: 0,
            mass: convolve_bernoullis(&[0.2, 0.9, 0.7]),
        };
        let g = full.remove_bernoulli(0.9);
        let want = convolve_bernoullis(&[0.2, 0.7]);
        for (k, w) in want.iter().enumerate() {
            assert!((g.at(k) - w).abs() < 1e-14);
        }
    }

    #[test]
    fn multinomial_enumerate_examples() {
        let e = multinomial_enumerate(&MultinomialSpec::new(1, vec![0.5, 0.5]).unwrap()).unwrap();
        assert_eq!(e, vec![(vec![1, 0], 0.5), (vec![0, 1], 0.5)]);
        let e = multinomial_enumerate(&MultinomialSpec::new(2, vec![0.5, 0.5]).unwrap()).unwrap();
        let probs: Vec<f64> = e.iter().map(|x| x.1).collect();
        for (g, w) in probs.iter().zip(&[0.25, 0.5, 0.25]) {
            assert!((g - w).abs() < EXACT);
        }
        let e = multinomial_enumerate(&MultinomialSpec::new(3, vec![0.2, 0.3, 0.5]).unwrap())
            .unwrap();
        assert_eq!(e.len(), 10);
        let p111 = e.iter().find(|(c, _)| c == &[1, 1, 1]).unwrap().1;
        assert!((p111 - 6.0 * 0.2 * 0.3 * 0.5).abs() < EXACT);
        let total: f64 = e.iter().map(|x| x.1).sum();
        assert!((total - 1.0).abs() < ENUMERATION_SUM);
    }

    #[test]
    fn multinomial_zero_weight_cells() {
        let e = multinomial_enumerate(&MultinomialSpec::new(3, vec![0.0, 1.0]).unwrap()).unwrap();
        for (c, p) in e {
            let want = if c == [0, 3] { 1.0 } else { 0.0 };
            assert!((p - want).abs() < EXACT, "{c:?}");
        }
    }

    #[test]
    fn enumeration_guard() {
        assert_eq!(composition_count(3, 3), 10.0);
        assert_eq!(composition_count(0, 5), 1.0);
        assert_eq!(composition_count(8, 16), 490_314.0);
        let spec = MultinomialSpec::uniform(9, 16).unwrap();
        assert!(matches!(
            multinomial_enumerate(&spec),
            Err(Error::EnumerationGuard { .. })
        ));
    }

    #[test]
    fn multinomial_sample_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let spec = MultinomialSpec::new(0, vec![0.3, 0.7]).unwrap();
        assert_eq!(multinomial_sample(&spec, &mut rng), vec![0, 0]);
        let spec = MultinomialSpec::new(5, vec![1.0, 0.0]).unwrap();
        assert_eq!(multinomial_sample(&spec, &mut rng), vec![5, 0]);
        let spec = MultinomialSpec::new(100_000, vec![0.5, 0.5]).unwrap();
        let c = multinomial_sample(&spec, &mut rng);
        assert_eq!(c.iter().sum::<usize>(), 100_000);
        assert!((c[0] as f64 - 50_000.0).abs() <= 3.0 * (100_000.0f64 * 0.25).sqrt());
    }

    #[test]
    fn multinomial_frequencies_match_enumeration() {
        let spec = MultinomialSpec::new(3, vec![0.2, 0.3, 0.5]).unwrap();
        let table = multinomial_enumerate(&spec).unwrap();
        let draws = 1_000_000usize;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut hits = std::collections::HashMap::new();
        for _ in 0..draws {
            *hits.entry(multinomial_sample(&spec, &mut rng)).or_insert(0usize) += 1;
        }
        for (c, p) in table {
            let freq = *hits.get(&c).unwrap_or(&0) as f64 / draws as f64;
            let se = (p * (1.0 - p) / draws as f64).sqrt();
            assert!((freq - p).abs() <= 4.0 * se, "{c:?}: {freq} vs {p}");
        }
    }

    proptest! {
        #[test]
        fn pmf_matches_enumeration(p in prop::collection::vec(0.0f64..=1.0, 0..=12)) {
            let got = pbin_pmf(&params(&p));
            for (g, w) in got.mass().iter().zip(enumerate_pmf(&p)) {
                prop_assert!((g - w).abs() <= EXACT);
            }
        }

        #[test]
        fn pmf_permutation_invariant(mut p in prop::collection::vec(0.0f64..=1.0, 1..=12), seed: u64) {
            let a = pbin_pmf(&params(&p));
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rand::seq::SliceRandom::shuffle(p.as_mut_slice(), &mut rng);
            let b = pbin_pmf(&params(&p));
            for (x, y) in a.mass().iter().zip(b.mass()) {
                prop_assert!((x - y).abs() <= EXACT);
            }
        }

        #[test]
        fn survival_stochastically_monotone(
            p in prop::collection::vec(0.0f64..=1.0, 1..=10),
            idx in 0usize..10,
            shrink in 0.0f64..=1.0,
        ) {
            let i = idx % p.len();
            let mut lower = p.clone();
            lower[i] *= shrink;
            let a = pbin_pmf(&params(&p));
            let b = pbin_pmf(&params(&lower));
            for l in 0..=p.len() as i64 + 1 {
                prop_assert!(b.survival(l) <= a.survival(l) + EXACT);
            }
        }

        #[test]
        fn shift_identity(
            rest in prop::collection::vec(0.0f64..=1.0, 0..=9),
            a in 0.0f64..=1.0,
            b in 0.0f64..=1.0,
            l_raw in 1usize..=10,
        ) {
            prop_assume!(a != b);
            let (p, q) = if a > b { (a, b) } else { (b, a) };
            let l = (l_raw % (rest.len() + 1) + 1) as i64;
            let (lhs, rhs) = pbin_shift_difference(&params(&rest), p, q, l).unwrap();
            prop_assert!((lhs - rhs).abs() <= EXACT);
        }
    }
}
