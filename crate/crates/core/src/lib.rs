//! Numerical bounds on the deficiency between `n` and `n + 1` i.i.d.
//! observations of a nonparametric density experiment on `[0, 1]`.
//!
//! The crate is organised bottom-up:
//!
//! * [`pbin`]: exact Binomial, Poisson-binomial and Multinomial computations.
//! * [`experiment`]: step densities, the hypercube family and its richness witness.
//! * [`upper`]: the observation-injection kernel, mean absolute deviation of the
//!   likelihood-ratio average, certificates and the closed-form upper bound.
//! * [`lower`]: per-cell Bayes risks, the mixed Poisson-binomial threshold
//!   difference and the closed-form lower bound.
//! * [`rate`]: sweeps over `n`, log-log rate fits and report emission.
//! * [`cli`] / [`verify`]: the `lecam` command line front end.

pub mod cli;
pub mod error;
pub mod experiment;
pub mod lower;
pub mod mc;
pub mod pbin;
pub mod rate;
pub mod report;
pub mod stream;
pub mod tolerance;
pub mod upper;
pub mod verify;

pub use error::{Error, Result};
pub use experiment::{HypercubeSpec, RichnessWitness, StepDensity};
pub use lower::{CubeLowerResult, Method, RiskCurve};
pub use mc::McEstimate;
pub use pbin::{MultinomialSpec, PBinParams, Pmf};
pub use rate::{BoundReport, RateFit, SweepConfig};

pub use upper::{CsCertificate, TwoLevelRatio};
