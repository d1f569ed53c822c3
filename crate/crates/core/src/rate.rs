//! Sweeps over `n`, power-law fits and the consolidated report.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::experiment::{make_hypercube_density, HypercubeSpec};
use crate::lower::{cube_lower, thm2_bound, Method};
use crate::mc::McEstimate;
use crate::report::{csv, Cell};
use crate::stream::sub_seed;
use crate::tolerance::EXACT;
use crate::upper::{
    exact_mad, hoeffding_certificate, mattner_floor, mc_mad, thm1_bound, uniform_ratio,
};

/// Fixed Monte Carlo budgets and the master seed of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    /// Count vectors sampled per `n` when the lower bound cannot be enumerated.
    pub lower_mc_samples: usize,
    /// Draws for the Monte Carlo check of the upper surrogate; 0 skips it.
    pub upper_mc_draws: usize,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            lower_mc_samples: 100_000,
            upper_mc_draws: 0,
            seed: 0,
        }
    }
}

/// Bounds and surrogates for one `(r, n)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub r: f64,
    pub n: usize,
    pub m: usize,
    pub l_star: usize,
    /// Largest threshold difference of the mixed Poisson-binomial survivals.
    pub lower: f64,
    pub lower_avg_paper: f64,
    pub lower_ci: f64,
    pub lower_method: Method,
    pub lower_closed: f64,
    /// Half the exact mean absolute deviation: the kernel's total variation.
    pub upper_exact: f64,
    pub upper_closed: f64,
    pub mattner_floor_half: f64,
    pub upper_mc: Option<McEstimate>,
}

impl BoundReport {
    /// The orderings every report must satisfy.
    pub fn check_orderings(&self) -> std::result::Result<(), String> {
        if self.lower_closed > self.lower + self.lower_ci + EXACT {
            return Err(format!(
                "n={}: closed-form lower {} exceeds threshold difference {} + {}",
                self.n, self.lower_closed, self.lower, self.lower_ci
            ));
        }
        if self.upper_exact > self.upper_closed + EXACT {
            return Err(format!(
                "n={}: kernel distance {} exceeds closed-form upper {}",
                self.n, self.upper_exact, self.upper_closed
            ));
        }
        if self.lower - self.lower_ci > self.upper_exact + EXACT {
            return Err(format!(
                "n={}: lower {} - {} above upper {}",
                self.n, self.lower, self.lower_ci, self.upper_exact
            ));
        }
        if self.mattner_floor_half > self.upper_exact + EXACT {
            return Err(format!("n={}: kernel distance below its floor", self.n));
        }
        Ok(())
    }
}

pub fn bound_report(r: f64, n: usize, config: &SweepConfig) -> Result<BoundReport> {
    if n == 0 {
        return invalid("need n >= 1");
    }
    let density = make_hypercube_density(&HypercubeSpec::new(r, vec![0])?)?;
    let ratio = uniform_ratio(&density)?
        .two_level
        .expect("hypercube densities have two levels");
    let k = n as u64 + 1;
    let cert = hoeffding_certificate(r)?;
    let lower = cube_lower(
        n,
        r,
        config.lower_mc_samples,
        sub_seed(config.seed, "sweep/lower", n as u64),
    )?;
    let upper_mc = if config.upper_mc_draws > 0 {
        let e = mc_mad(
            &density,
            n + 1,
            config.upper_mc_draws,
            sub_seed(config.seed, "sweep/upper", n as u64),
        )?;
        Some(McEstimate {
            estimate: e.estimate / 2.0,
            half_width: e.half_width / 2.0,
        })
    } else {
        None
    };
    Ok(BoundReport {
        r,
        n,
        m: lower.m,
        l_star: lower.l_star,
        lower: lower.delta,
        lower_avg_paper: lower.delta_avg_paper,
        lower_ci: lower.ci_at_star(),
        lower_method: lower.method,
        lower_closed: thm2_bound(1.0 - 1.0 / r, 1.0, n as u64)?,
        upper_exact: exact_mad(&ratio, k)? / 2.0,
        upper_closed: thm1_bound(&cert, n as u64),
        mattner_floor_half: mattner_floor(&ratio, k)? / 2.0,
        upper_mc,
    })
}

/// One report per `n`; entries run in parallel with per-`n` derived seeds.
pub fn bound_sweep(r: f64, n_values: &[usize], config: &SweepConfig) -> Result<Vec<BoundReport>> {
    if n_values.is_empty() {
        return invalid("sweep needs at least one n");
    }
    if n_values.windows(2).any(|w| w[0] >= w[1]) {
        return invalid("sweep n values must be strictly increasing");
    }
    n_values
        .par_iter()
        .map(|&n| bound_report(r, n, config))
        .collect()
}

/// Least-squares line through `(log(n + 1), log value)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub exponent: f64,
    pub amplitude: f64,
    /// Largest absolute log-scale residual on the fitted points.
    pub residual: f64,
    pub n_min: u64,
    pub n_max: u64,
}

impl RateFit {
    pub fn predict(&self, n: u64) -> f64 {
        self.amplitude * ((n + 1) as f64).powf(self.exponent)
    }
}

pub fn rate_fit(points: &[(u64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return invalid(format!("rate fit needs at least 3 points, got {}", points.len()));
    }
    if points.iter().any(|&(_, v)| !(v > 0.0 && v.is_finite())) {
        return invalid("rate fit needs positive finite values");
    }
    let xs: Vec<f64> = points.iter().map(|&(n, _)| ((n + 1) as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, v)| v.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return invalid("rate fit needs at least two distinct n");
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - (intercept + slope * x)).abs())
        .fold(0.0, f64::max);
    Ok(RateFit {
        exponent: slope,
        amplitude: intercept.exp(),
        residual,
        n_min: points.iter().map(|p| p.0).min().unwrap_or(0),
        n_max: points.iter().map(|p| p.0).max().unwrap_or(0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UpperLower {
    pub upper: f64,
    pub lower: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub r: f64,
    pub exponent_upper: f64,
    pub exponent_lower: f64,
    pub amplitudes: UpperLower,
    pub residuals: UpperLower,
    pub n_min: u64,
    pub n_max: u64,
}

pub fn summarize(reports: &[BoundReport]) -> Result<SweepSummary> {
    let upper = rate_fit(&reports.iter().map(|b| (b.n as u64, b.upper_exact)).collect::<Vec<_>>())?;
    let lower = rate_fit(&reports.iter().map(|b| (b.n as u64, b.lower)).collect::<Vec<_>>())?;
    Ok(SweepSummary {
        r: reports[0].r,
        exponent_upper: upper.exponent,
        exponent_lower: lower.exponent,
        amplitudes: UpperLower {
            upper: upper.amplitude,
            lower: lower.amplitude,
        },
        residuals: UpperLower {
            upper: upper.residual,
            lower: lower.residual,
        },
        n_min: upper.n_min,
        n_max: upper.n_max,
    })
}

pub const SWEEP_COLUMNS: &[&str] = &[
    "r",
    "n",
    "m",
    "l_star",
    "lower",
    "lower_avg_paper",
    "lower_ci",
    "lower_method",
    "lower_closed",
    "upper_exact",
    "upper_closed",
    "mattner_floor_half",
    "upper_mc",
    "upper_mc_ci",
];

pub fn sweep_csv(reports: &[BoundReport]) -> String {
    csv(
        SWEEP_COLUMNS,
        reports.iter().map(|b| {
            vec![
                b.r.into(),
                b.n.into(),
                b.m.into(),
                b.l_star.into(),
                b.lower.into(),
                b.lower_avg_paper.into(),
                b.lower_ci.into(),
                b.lower_method.as_str().into(),
                b.lower_closed.into(),
                b.upper_exact.into(),
                b.upper_closed.into(),
                b.mattner_floor_half.into(),
                Cell::from(b.upper_mc.map(|e| e.estimate)),
                Cell::from(b.upper_mc.map(|e| e.half_width)),
            ]
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let pts: Vec<(u64, f64)> = [1u64, 3, 7, 20, 100]
            .iter()
            .map(|&n| (n, 7.0 / ((n + 1) as f64).sqrt()))
            .collect();
        let fit = rate_fit(&pts).unwrap();
        assert!((fit.exponent + 0.5).abs() < 1e-9);
        assert!((fit.amplitude - 7.0).abs() < 1e-9);
        assert!(fit.residual < 1e-9);
        assert!((fit.predict(20) - pts[3].1).abs() < 1e-9);
        assert_eq!((fit.n_min, fit.n_max), (1, 100));
    }

    #[test]
    fn constant_sequence() {
        let fit = rate_fit(&[(1, 3.0), (2, 3.0), (9, 3.0)]).unwrap();
        assert!(fit.exponent.abs() < 1e-9);
    }

    #[test]
    fn fit_rejects() {
        assert!(rate_fit(&[(1, 1.0), (2, 1.0)]).is_err());
        assert!(rate_fit(&[(1, 1.0), (2, 0.0), (3, 1.0)]).is_err());
        assert!(rate_fit(&[(1, 1.0), (1, 2.0), (1, 3.0)]).is_err());
    }

    #[test]
    fn report_n1() {
        let rep = bound_report(2.0, 1, &SweepConfig::default()).unwrap();
        assert_eq!(rep.lower_method, Method::Exact);
        assert!((rep.lower - 0.09375).abs() < EXACT);
        assert!(rep.lower >= 0.0208 - rep.lower_ci);
        assert!((rep.upper_closed - 2.5066282746310002 / 2f64.sqrt()).abs() < 1e-12);
        assert!((rep.upper_exact - 0.1875).abs() < EXACT);
        rep.check_orderings().unwrap();
    }

    #[test]
    fn closed_forms_over_sweep() {
        let cfg = SweepConfig {
            lower_mc_samples: 2_000,
            ..SweepConfig::default()
        };
        let reps = bound_sweep(2.0, &[3, 7, 15, 31], &cfg).unwrap();
        let want = [0.014731, 0.010417, 0.0073657, 0.0052083];
        for (rep, w) in reps.iter().zip(want) {
            assert!((rep.lower_closed - w).abs() < 1e-6, "{}", rep.lower_closed);
            let scaled = rep.upper_closed * ((rep.n + 1) as f64).sqrt();
            assert!((scaled - 2.0 * (std::f64::consts::PI / 2.0).sqrt()).abs() < 1e-12);
            rep.check_orderings().unwrap();
        }
        assert!(bound_sweep(2.0, &[], &cfg).is_err());
        assert!(bound_sweep(2.0, &[4, 2], &cfg).is_err());
    }
}
