//! Upper bound machinery.
//!
//! The kernel `K` splices one uniform draw into an `n`-sample at a uniformly
//! random position. With `g = dλ/dP_f = 1/f`, twice the total variation
//! between `K P_f^n` and `P_f^(n+1)` is the mean absolute deviation
//! `E|mean(g(ξ_1..ξ_k)) - 1|` with `k = n + 1`.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::experiment::{check_floor_ratio, sample_point, StepDensity};
use crate::mc::{chunked_moments, McEstimate};
use crate::pbin::binomial_pmf;
use crate::stream::tag;
use crate::tolerance::EXACT;

/// Constants `(C, s)` of the concentration bound
/// `P(|Σ g(ξ_i) - n| > nt) <= C exp(-s n t²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsCertificate {
    c: f64,
    s: f64,
}

impl CsCertificate {
    pub fn new(c: f64, s: f64) -> Result<Self> {
        if !(c.is_finite() && c >= 1.0) {
            return invalid(format!("certificate needs C >= 1, got {c}"));
        }
        if !(s.is_finite() && s > 0.0) {
            return invalid(format!("certificate needs s > 0, got {s}"));
        }
        Ok(Self { c, s })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn s(&self) -> f64 {
        self.s
    }
}

/// A likelihood ratio taking value `high` with probability `q` and `low` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoLevelRatio {
    pub high: f64,
    pub low: f64,
    pub q: f64,
}

impl TwoLevelRatio {
    pub fn new(high: f64, low: f64, q: f64) -> Result<Self> {
        if !(high > low && low >= 0.0 && high.is_finite()) {
            return invalid(format!("need high > low >= 0, got {high}, {low}"));
        }
        if !(0.0..=1.0).contains(&q) {
            return invalid(format!("q must lie in [0, 1], got {q}"));
        }
        let mean = q * high + (1.0 - q) * low;
        if (mean - 1.0).abs() > EXACT {
            return invalid(format!("likelihood ratio has mean {mean}, not 1"));
        }
        Ok(Self { high, low, q })
    }

    /// `E|g - 1|`.
    pub fn abs_deviation(&self) -> f64 {
        self.q * (self.high - 1.0).abs() + (1.0 - self.q) * (self.low - 1.0).abs()
    }
}

/// The step function `1/f` and its two-level summary when `f` has two heights.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformRatio {
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
    pub two_level: Option<TwoLevelRatio>,
}

impl UniformRatio {
    /// `∫ g dP_f`, which is 1 for a genuine likelihood ratio.
    pub fn mean_under(&self, f: &StepDensity) -> f64 {
        self.breakpoints
            .windows(2)
            .zip(&self.values)
            .map(|(w, g)| {
                let mid = 0.5 * (w[0] + w[1]);
                g * f.eval(mid) * (w[1] - w[0])
            })
            .sum()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

/// Likelihood ratio of the uniform measure against `P_f`.
pub fn uniform_ratio(f: &StepDensity) -> Result<UniformRatio> {
    if f.min_height() <= 0.0 {
        return invalid("density must be strictly positive for a bounded ratio");
    }
    let values: Vec<f64> = f.values().iter().map(|h| 1.0 / h).collect();
    let mut levels: Vec<f64> = f.values().to_vec();
    levels.sort_by(f64::total_cmp);
    levels.dedup_by(|a, b| (*a - *b).abs() <= EXACT);
    let two_level = if levels.len() == 2 {
        let low_height = levels[0];
        // The ratio is high exactly where the density is low.
        let q: f64 = f
            .breakpoints()
            .windows(2)
            .zip(f.values())
            .filter(|(_, h)| (**h - low_height).abs() <= EXACT)
            .map(|(w, h)| h * (w[1] - w[0]))
            .sum();
        Some(TwoLevelRatio::new(1.0 / levels[0], 1.0 / levels[1], q)?)
    } else {
        None
    };
    Ok(UniformRatio {
        breakpoints: f.breakpoints().to_vec(),
        values,
        two_level,
    })
}

/// Hoeffding certificate for ratios bounded in `(0, r]`: `(2, 2/r²)`.
pub fn hoeffding_certificate(r: f64) -> Result<CsCertificate> {
    check_floor_ratio(r)?;
    CsCertificate::new(2.0, 2.0 / (r * r))
}

/// `C √(π / 4s) / √(n + 1)`.
pub fn thm1_bound(cert: &CsCertificate, n: u64) -> f64 {
    cert.c * (PI / (4.0 * cert.s)).sqrt() / ((n + 1) as f64).sqrt()
}

/// `E|mean of k ratios - 1|`, exact through the Binomial count of high values.
pub fn exact_mad(ratio: &TwoLevelRatio, k: u64) -> Result<f64> {
    if k == 0 {
        return invalid("need k >= 1 observations");
    }
    let kf = k as f64;
    Ok(binomial_pmf(k, ratio.q)
        .iter()
        .enumerate()
        .map(|(j, p)| {
            let j = j as f64;
            p * ((j * ratio.high + (kf - j) * ratio.low) / kf - 1.0).abs()
        })
        .sum())
}

/// Monte Carlo estimate of `E|mean of k ratios - 1|` under `P_f`.
pub fn mc_mad(f: &StepDensity, k: usize, draws: usize, seed: u64) -> Result<McEstimate> {
    if draws < 100 {
        return invalid(format!("need at least 100 draws, got {draws}"));
    }
    if k == 0 {
        return invalid("need k >= 1 observations");
    }
    let ratio = uniform_ratio(f)?;
    let moments = chunked_moments(draws, 1, seed, tag("upper/mc_mad"), |rng, out| {
        let sum: f64 = (0..k)
            .map(|_| ratio.values[f.piece_of(sample_point(f, rng))])
            .sum();
        out[0] = (sum / k as f64 - 1.0).abs();
    });
    Ok(moments.estimates()[0])
}

/// Splices one uniform point into `sample` at a uniformly random position.
pub fn inject_kernel<R: Rng + ?Sized>(sample: &[f64], rng: &mut R) -> Vec<f64> {
    let pos = rng.random_range(0..=sample.len());
    let y: f64 = rng.random();
    let mut out = Vec::with_capacity(sample.len() + 1);
    out.extend_from_slice(&sample[..pos]);
    out.push(y);
    out.extend_from_slice(&sample[pos..]);
    out
}

/// Lower limit `E|g - 1| / √(2k)` on the mean absolute deviation of `k` ratios.
pub fn mattner_floor(ratio: &TwoLevelRatio, k: u64) -> Result<f64> {
    if k == 0 {
        return invalid("need k >= 1 observations");
    }
    Ok(ratio.abs_deviation() / (2.0 * k as f64).sqrt())
}

/// `∫_{√(log C / s)}^∞ x² · 2sxC e^{-sx²} dx = (1 + log C) / s`.
pub fn chi2_radius(cert: &CsCertificate) -> f64 {
    (1.0 + cert.c.ln()) / cert.s
}
