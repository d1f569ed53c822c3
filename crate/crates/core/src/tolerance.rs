//! Central numeric constants shared by the library, the verifier and tests.

/// Slack for identities that hold exactly in real arithmetic.
pub const EXACT: f64 = 1e-12;

/// Slack for sums taken over whole enumerations.
pub const ENUMERATION_SUM: f64 = 1e-10;

/// Largest number of multinomial compositions enumerated exactly.
pub const ENUMERATION_GUARD: f64 = 1e6;

/// Width multiplier of every reported confidence interval (3 sigma).
pub const CI_Z: f64 = 3.0;

/// Draws per Monte Carlo chunk. Every chunk owns one derived random stream.
pub const MC_CHUNK: usize = 4096;

/// Probability mass below which convolution tails are dropped in the grouped
/// Poisson-binomial path.
pub const TAIL_TRIM: f64 = 1e-30;
