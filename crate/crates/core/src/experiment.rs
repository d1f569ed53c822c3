//! Step densities on `[0, 1]` and the hypercube family built from the
//! two-level cell densities `(1/r, 2 - 1/r)` and `(2 - 1/r, 1/r)`.
//!
//! Pieces are half-open on the right, `[b_i, b_{i+1})`, except the last,
//! which is closed.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::tolerance::EXACT;

/// A piecewise-constant probability density on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawStepDensity")]
pub struct StepDensity {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
    #[serde(skip)]
    cdf: Vec<f64>,
}

#[derive(Deserialize)]
struct RawStepDensity {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
    #[serde(default)]
    normalize: bool,
}

impl TryFrom<RawStepDensity> for StepDensity {
    type Error = Error;

    fn try_from(raw: RawStepDensity) -> Result<Self> {
        if raw.normalize {
            Self::normalized(raw.breakpoints, raw.values)
        } else {
            Self::new(raw.breakpoints, raw.values)
        }
    }
}

fn check_shape(breakpoints: &[f64], values: &[f64]) -> Result<()> {
    if breakpoints.len() < 2 || values.len() + 1 != breakpoints.len() {
        return invalid(format!(
            "need k+1 breakpoints for k values (k >= 1), got {} and {}",
            breakpoints.len(),
            values.len()
        ));
    }
    if breakpoints[0] != 0.0 || breakpoints[breakpoints.len() - 1] != 1.0 {
        return invalid("breakpoints must start at 0 and end at 1");
    }
    if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
        return invalid("breakpoints must be strictly increasing");
    }
    if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return invalid("heights must be finite and nonnegative");
    }
    Ok(())
}

fn cumulative(breakpoints: &[f64], values: &[f64]) -> Vec<f64> {
    let mut cdf = Vec::with_capacity(breakpoints.len());
    cdf.push(0.0);
    let mut acc = 0.0;
    for (w, v) in breakpoints.windows(2).zip(values) {
        acc += v * (w[1] - w[0]);
        cdf.push(acc);
    }
    cdf
}

impl StepDensity {
    /// Validates the shape and rejects inputs whose integral is not 1 within [`EXACT`].
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_shape(&breakpoints, &values)?;
        let cdf = cumulative(&breakpoints, &values);
        let total = cdf[cdf.len() - 1];
        if (total - 1.0).abs() > EXACT {
            return invalid(format!("density integrates to {total}, not 1"));
        }
        Ok(Self {
            breakpoints,
            values,
            cdf,
        })
    }

    /// Like [`StepDensity::new`], but rescales the heights when the integral is off.
    pub fn normalized(breakpoints: Vec<f64>, mut values: Vec<f64>) -> Result<Self> {
        check_shape(&breakpoints, &values)?;
        let total = cumulative(&breakpoints, &values)[values.len()];
        if !(total > 0.0) {
            return invalid("density has zero mass");
        }
        if (total - 1.0).abs() > EXACT {
            values.iter_mut().for_each(|v| *v /= total);
        }
        Self::new(breakpoints, values)
    }

    pub fn uniform() -> Self {
        Self::new(vec![0.0, 1.0], vec![1.0]).expect("uniform density is valid")
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn pieces(&self) -> usize {
        self.values.len()
    }

    /// Index of the piece containing `x` (clamped into `[0, 1]`).
    pub fn piece_of(&self, x: f64) -> usize {
        let inner = &self.breakpoints[1..self.breakpoints.len() - 1];
        inner.partition_point(|&b| b <= x)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.values[self.piece_of(x)]
    }

    pub fn min_height(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Whether every height is at least `floor` (up to [`EXACT`]).
    pub fn respects_floor(&self, floor: f64) -> bool {
        self.min_height() >= floor - EXACT
    }

    /// Probability of `[a, b]`.
    pub fn integral(&self, a: f64, b: f64) -> Result<f64> {
        density_integral(self, a, b)
    }

    /// `sum_j w_j f_j` on the merged breakpoint grid.
    pub fn mixture(weights: &[f64], parts: &[StepDensity]) -> Result<Self> {
        if weights.len() != parts.len() || parts.is_empty() {
            return invalid("mixture needs one weight per component");
        }
        let grid = merged_grid(parts.iter());
        let values = grid
            .windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                weights.iter().zip(parts).map(|(p, f)| p * f.eval(mid)).sum()
            })
            .collect();
        Self::new(grid, values)
    }
}

fn merged_grid<'a>(densities: impl Iterator<Item = &'a StepDensity>) -> Vec<f64> {
    let mut grid: Vec<f64> = densities
        .flat_map(|f| f.breakpoints.iter().copied())
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// Selects one vertex of the hypercube family on a regular mesh of `m` cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypercubeSpec {
    pub r: f64,
    pub m: usize,
    pub bits: Vec<u8>,
}

impl HypercubeSpec {
    pub fn new(r: f64, bits: Vec<u8>) -> Result<Self> {
        let spec = Self {
            r,
            m: bits.len(),
            bits,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        check_floor_ratio(self.r)?;
        if self.m == 0 {
            return invalid("hypercube needs m >= 1 cells");
        }
        if self.bits.len() != self.m {
            return invalid(format!("expected {} bits, got {}", self.m, self.bits.len()));
        }
        if self.bits.iter().any(|&b| b > 1) {
            return invalid("bits must be 0 or 1");
        }
        Ok(())
    }
}

pub(crate) fn check_floor_ratio(r: f64) -> Result<()> {
    if r.is_finite() && r > 1.0 {
        Ok(())
    } else {
        invalid(format!("r must be a finite value > 1, got {r}"))
    }
}

/// The two heights of cell `bit`: low-then-high for 0, high-then-low for 1.
fn cell_heights(r: f64, bit: u8) -> [f64; 2] {
    let (low, high) = (1.0 / r, 2.0 - 1.0 / r);
    if bit == 0 {
        [low, high]
    } else {
        [high, low]
    }
}

fn half_cell_grid(m: usize) -> Vec<f64> {
    let pieces = 2 * m;
    (0..=pieces).map(|k| k as f64 / pieces as f64).collect()
}

pub fn make_hypercube_density(spec: &HypercubeSpec) -> Result<StepDensity> {
    spec.validate()?;
    let values = spec
        .bits
        .iter()
        .flat_map(|&b| cell_heights(spec.r, b))
        .collect();
    StepDensity::new(half_cell_grid(spec.m), values)
}

/// Exact `P_f([a, b])`.
pub fn density_integral(f: &StepDensity, a: f64, b: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) {
        return invalid(format!("interval [{a}, {b}] not inside [0, 1]"));
    }
    if a > b {
        return invalid(format!("interval endpoints out of order: {a} > {b}"));
    }
    Ok(f.breakpoints
        .windows(2)
        .zip(&f.values)
        .map(|(w, v)| v * (w[1].min(b) - w[0].max(a)).max(0.0))
        .sum())
}

/// One draw by inverse CDF; pieces of zero mass are never selected.
pub fn sample_point<R: Rng + ?Sized>(f: &StepDensity, rng: &mut R) -> f64 {
    let total = f.cdf[f.cdf.len() - 1];
    let u = rng.random::<f64>() * total;
    let last_positive = f.values.iter().rposition(|&v| v > 0.0).unwrap_or(0);
    // First piece whose upper cdf value exceeds u.
    let j = f.cdf[1..].partition_point(|&c| c <= u).min(last_positive);
    let (lo, hi) = (f.breakpoints[j], f.breakpoints[j + 1]);
    (lo + (u - f.cdf[j]) / f.values[j]).clamp(lo, hi)
}

pub fn sample_density<R: Rng + ?Sized>(f: &StepDensity, n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| sample_point(f, rng)).collect()
}

/// Exact total variation distance `½ ∫ |f - g|`.
pub fn tv_distance(f: &StepDensity, g: &StepDensity) -> f64 {
    let grid = merged_grid([f, g].into_iter());
    let l1: f64 = grid
        .windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            (f.eval(mid) - g.eval(mid)).abs() * (w[1] - w[0])
        })
        .sum();
    (0.5 * l1).clamp(0.0, 1.0)
}

/// Partition, weights and per-cell density pairs certifying `(m, alpha, beta)`-richness.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RichnessWitness {
    pub m: usize,
    pub alpha: f64,
    pub beta: f64,
    pub cell_boundaries: Vec<f64>,
    pub weights: Vec<f64>,
    /// `pairs[j] = (Q_j0, Q_j1)`, normalised densities supported on cell `j`.
    pub pairs: Vec<(StepDensity, StepDensity)>,
}

impl RichnessWitness {
    /// `sum_j w_j Q_{j, bits_j}`.
    pub fn assemble(&self, bits: &[u8]) -> Result<StepDensity> {
        if bits.len() != self.m || bits.iter().any(|&b| b > 1) {
            return invalid("bit vector does not match the witness");
        }
        let parts: Vec<StepDensity> = self
            .pairs
            .iter()
            .zip(bits)
            .map(|((q0, q1), &b)| if b == 0 { q0.clone() } else { q1.clone() })
            .collect();
        StepDensity::mixture(&self.weights, &parts)
    }

    /// Re-checks the weight and separation conditions by exact computation.
    pub fn verify(&self) -> Result<()> {
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > EXACT {
            return invalid(format!("cell weights sum to {total}"));
        }
        let floor = self.beta / self.m as f64;
        if self.weights.iter().any(|&w| w < floor - EXACT) {
            return invalid("a cell weight falls below beta / m");
        }
        for (j, (q0, q1)) in self.pairs.iter().enumerate() {
            let tv = tv_distance(q0, q1);
            if tv < self.alpha - EXACT {
                return invalid(format!("cell {j}: pair distance {tv} below alpha"));
            }
        }
        Ok(())
    }
}

fn cell_density(m: usize, j: usize, heights: [f64; 2]) -> Result<StepDensity> {
    let grid = half_cell_grid(m);
    let (lo, mid, hi) = (grid[2 * j], grid[2 * j + 1], grid[2 * j + 2]);
    let scale = m as f64;
    let mut breakpoints = Vec::with_capacity(5);
    let mut values = Vec::with_capacity(4);
    if j > 0 {
        breakpoints.push(0.0);
        values.push(0.0);
    }
    breakpoints.extend([lo, mid]);
    values.extend([scale * heights[0], scale * heights[1]]);
    breakpoints.push(hi);
    if j + 1 < m {
        values.push(0.0);
        breakpoints.push(1.0);
    }
    StepDensity::new(breakpoints, values)
}

/// The regular-mesh witness with uniform weights.
pub fn richness_witness(r: f64, m: usize) -> Result<RichnessWitness> {
    check_floor_ratio(r)?;
    if m == 0 {
        return invalid("richness needs m >= 1");
    }
    let pairs = (0..m)
        .map(|j| Ok((cell_density(m, j, cell_heights(r, 0))?, cell_density(m, j, cell_heights(r, 1))?)))
        .collect::<Result<Vec<_>>>()?;
    let grid = half_cell_grid(m);
    let witness = RichnessWitness {
        m,
        alpha: 1.0 - 1.0 / r,
        beta: 1.0,
        cell_boundaries: grid.iter().step_by(2).copied().collect(),
        weights: vec![1.0 / m as f64; m],
        pairs,
    };
    witness.verify()?;
    Ok(witness)
}
