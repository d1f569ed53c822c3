//! The `lecam` command line front end.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::json;

use crate::error::Error;
use crate::experiment::{
    density_integral, make_hypercube_density, sample_density, tv_distance, HypercubeSpec,
    StepDensity,
};
use crate::lower::{bayes_risk_curve, cube_lower, mixedpbin_mass, thm2_bound};
use crate::pbin::{pbin_pmf, pbin_shift_difference, pbin_survival, PBinParams};
use crate::rate::{bound_sweep, summarize, sweep_csv, SweepConfig};
use crate::report::{csv, fmt_short, Cell};
use crate::stream::{child_stream, tag};
use crate::upper::{
    chi2_radius, exact_mad, hoeffding_certificate, mattner_floor, mc_mad, thm1_bound,
    uniform_ratio, CsCertificate,
};
use crate::verify::{run_checks, Budget};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_VERIFY_FAILED: i32 = 2;
pub const EXIT_IO: i32 = 3;

const SWEEP_HELP: &str = "\
CSV columns (numbers carry 17 significant digits):
  r                   density floor parameter; every density is >= 1/r
  n                   sample size; bounds compare n with n+1 observations
  m                   number of hypercube cells, 2n
  l_star              threshold maximising the survival difference
  lower               max over l of E P(PBin(r(N)) >= l) - E P(PBin(r(N')) >= l)
  lower_avg_paper     best average of the differences at two adjacent thresholds
  lower_ci            3-sigma half-width of `lower` (0 when exact)
  lower_method        exact | mc
  lower_closed        (1 - 1/r) / (12 sqrt(2) sqrt(n+1))
  upper_exact         total variation of the injection kernel, E|mean ratio - 1| / 2
  upper_closed        sqrt(pi/2) r / sqrt(n+1)
  mattner_floor_half  E|g - 1| / (2 sqrt(2(n+1)))
  upper_mc            Monte Carlo estimate of upper_exact (empty unless --mc-upper)
  upper_mc_ci         3-sigma half-width of upper_mc

With --format json the output is {\"rows\": [...], \"summary\": {r, exponent_upper,
exponent_lower, amplitudes, residuals, n_min, n_max}}; exponents are least-squares
slopes of log(value) against log(n+1).

Exit codes: 0 success, 1 invalid arguments, 2 verify failure, 3 I/O failure.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
    Json,
}

/// Everything one invocation needs.
#[derive(Debug, Parser)]
#[command(name = "lecam", version, about = "Bounds on the value of one more observation", after_help = SWEEP_HELP)]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,

    /// Master seed; every random stream is derived from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads (0 = one per core). Output does not depend on it.
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,

    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Output format; each command has its own default.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Poisson-binomial pmf, survival and shift identity.
    #[command(subcommand)]
    Pbin(PbinCommand),
    /// Build, sample and compare step densities.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
    /// Upper-bound quantities.
    #[command(subcommand)]
    Upper(UpperCommand),
    /// Lower-bound quantities.
    #[command(subcommand)]
    Lower(LowerCommand),
    /// Bound sweep over n with power-law fits.
    #[command(after_help = SWEEP_HELP)]
    Sweep(SweepArgs),
    /// Run every identity and oracle check; exit 2 if one fails.
    Verify {
        /// Smaller budgets.
        #[arg(long)]
        quick: bool,
    },
}

#[derive(Debug, Subcommand)]
pub enum PbinCommand {
    /// Print P(PBin = k) for k = 0..m.
    Pmf {
        #[arg(allow_negative_numbers = true)]
        probs: Vec<f64>,
    },
    /// Print P(PBin >= l).
    Survival {
        #[arg(long)]
        l: i64,
        #[arg(allow_negative_numbers = true)]
        probs: Vec<f64>,
    },
    /// Print both sides of the shift identity for PBin(rest) plus one coordinate.
    Shift {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        p_prime: f64,
        #[arg(long)]
        l: i64,
        rest: Vec<f64>,
    },
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    /// Scenario file: a step density {"breakpoints","values"} or a hypercube {"r","m","bits"}.
    #[arg(long, conflicts_with_all = ["r", "bits"])]
    pub scenario: Option<PathBuf>,
    #[arg(long)]
    pub r: Option<f64>,
    /// Hypercube vertex as a 0/1 string, e.g. 0110.
    #[arg(long)]
    pub bits: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum ExperimentCommand {
    /// Print the density as JSON.
    Build(DensityArgs),
    /// Draw i.i.d. points.
    Sample {
        #[command(flatten)]
        density: DensityArgs,
        #[arg(long)]
        n: usize,
    },
    /// Exact total variation distance between two scenario files.
    Tv { a: PathBuf, b: PathBuf },
    /// Exact probability of [a, b].
    Integral {
        #[command(flatten)]
        density: DensityArgs,
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
    },
}

#[derive(Debug, Args)]
pub struct RangeArgs {
    #[arg(long)]
    pub r: f64,
    /// Single n, a list `1,2,5`, a range `a:b` or `a:b:+k`, or a geometric range `a:b:xk`.
    #[arg(long)]
    pub n: String,
}

#[derive(Debug, Subcommand)]
pub enum UpperCommand {
    /// Exact mean absolute deviation with k = n + 1 ratios.
    Mad {
        #[command(flatten)]
        range: RangeArgs,
        /// Monte Carlo draws for a cross-check (>= 100).
        #[arg(long)]
        mc: Option<usize>,
    },
    /// Closed-form bound C sqrt(pi / 4s) / sqrt(n + 1) with the Hoeffding certificate.
    Bound {
        #[command(flatten)]
        range: RangeArgs,
    },
    /// Floor E|g - 1| / sqrt(2k) next to the exact deviation.
    Floor {
        #[command(flatten)]
        range: RangeArgs,
    },
    /// Chi-square radius (1 + log C) / s, from --r or from explicit --c and --s.
    Chi2 {
        #[arg(long, conflicts_with_all = ["c", "s"])]
        r: Option<f64>,
        #[arg(long, requires = "s")]
        c: Option<f64>,
        #[arg(long, requires = "c")]
        s: Option<f64>,
    },
    /// Report rows (r, n, exact_mad_half, thm1_bound, mattner_floor_half, mc_estimate, mc_ci).
    Report {
        #[command(flatten)]
        range: RangeArgs,
        #[arg(long)]
        mc: Option<usize>,
    },
}

#[derive(Debug, Subcommand)]
pub enum LowerCommand {
    /// Bayes risks r(0..=n) of one hypercube cell.
    Risks {
        #[arg(long)]
        r: f64,
        #[arg(long)]
        n: usize,
    },
    /// Report rows (r, n, m, l_star, delta_max, delta_avg_paper, thm2_bound, ci, method).
    CubeLower {
        #[command(flatten)]
        range: RangeArgs,
        /// Count vectors sampled when enumeration is refused.
        #[arg(long, default_value_t = 100_000)]
        mc: usize,
    },
    /// Largest point mass of the mixed Poisson-binomial with uniform cell weights.
    Mixedpbin {
        #[arg(long)]
        r: f64,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 100_000)]
        mc: usize,
    },
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub range: RangeArgs,
    /// Count vectors per n for the Monte Carlo lower bound.
    #[arg(long, default_value_t = 100_000)]
    pub mc: usize,
    /// Draws per n for the Monte Carlo upper check (0 = off).
    #[arg(long, default_value_t = 0)]
    pub mc_upper: usize,
    /// Also write the JSON summary to this file.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Invalid(String),
    Io(String),
    Verify(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Invalid(e.to_string())
    }
}

/// Parses `4`, `1,2,5`, `1:10`, `1:10:+3` or `4:1024:x2`.
pub fn parse_n_range(spec: &str) -> Result<Vec<usize>, String> {
    let bad = || format!("cannot parse n range '{spec}'");
    let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
    let values: Vec<usize> = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        let (start, end) = match parts.as_slice() {
            [a, b] | [a, b, _] => (num(a)?, num(b)?),
            _ => return Err(bad()),
        };
        let step = parts.get(2).copied().unwrap_or("+1");
        let mut out = Vec::new();
        let mut cur = start;
        if let Some(f) = step.strip_prefix('x') {
            let f = num(f)?;
            if f < 2 || start == 0 {
                return Err(bad());
            }
            while cur <= end {
                out.push(cur);
                cur *= f;
            }
        } else {
            let k = num(step.strip_prefix('+').unwrap_or(step))?;
            if k == 0 {
                return Err(bad());
            }
            while cur <= end {
                out.push(cur);
                cur += k;
            }
        }
        out
    } else {
        spec.split(',').map(num).collect::<Result<_, _>>()?
    };
    if values.is_empty() || values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(format!("n range '{spec}' must be nonempty and increasing"));
    }
    Ok(values)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Scenario {
    Hypercube(HypercubeSpec),
    Density(StepDensity),
}

fn load_density(path: &Path) -> Result<StepDensity, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
    if value.get("bits").is_some() {
        let spec: HypercubeSpec = serde_json::from_value(value)
            .map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
        return Ok(make_hypercube_density(&spec)?);
    }
    match serde_json::from_value::<Scenario>(value) {
        Ok(Scenario::Density(f)) => Ok(f),
        Ok(Scenario::Hypercube(spec)) => Ok(make_hypercube_density(&spec)?),
        Err(_) => {
            // Re-parse strictly for a precise message.
            let err = serde_json::from_str::<StepDensity>(&text).err();
            Err(Failure::Invalid(format!(
                "{}: not a step density or hypercube scenario{}",
                path.display(),
                err.map(|e| format!(" ({e})")).unwrap_or_default()
            )))
        }
    }
}

fn density_from(args: &DensityArgs) -> Result<StepDensity, Failure> {
    if let Some(path) = &args.scenario {
        return load_density(path);
    }
    match (args.r, &args.bits) {
        (Some(r), Some(bits)) => {
            let bits = bits
                .chars()
                .map(|c| match c {
                    '0' => Ok(0),
                    '1' => Ok(1),
                    _ => Err(Failure::Invalid(format!("bad bit '{c}'"))),
                })
                .collect::<Result<Vec<u8>, _>>()?;
            Ok(make_hypercube_density(&HypercubeSpec::new(r, bits)?)?)
        }
        (None, None) => Ok(StepDensity::uniform()),
        _ => Err(Failure::Invalid("--r and --bits go together".into())),
    }
}

fn words(values: impl IntoIterator<Item = f64>) -> String {
    let parts: Vec<String> = values.into_iter().map(fmt_short).collect();
    parts.join(" ") + "\n"
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("json values serialise") + "\n"
}

fn table(format: Format, header: &[&str], rows: Vec<Vec<f64>>) -> String {
    match format {
        Format::Json => {
            let objs: Vec<serde_json::Value> = rows
                .iter()
                .map(|row| {
                    let map: serde_json::Map<String, serde_json::Value> = header
                        .iter()
                        .zip(row)
                        .map(|(h, v)| (h.to_string(), json!(v)))
                        .collect();
                    serde_json::Value::Object(map)
                })
                .collect();
            pretty(&json!(objs))
        }
        Format::Csv => csv(header, rows.into_iter().map(|r| r.into_iter().map(Cell::from).collect())),
        Format::Text => rows.into_iter().map(words).collect(),
    }
}

fn n_values(range: &RangeArgs) -> Result<Vec<usize>, Failure> {
    parse_n_range(&range.n).map_err(Failure::Invalid)
}

fn cube_ratio(r: f64) -> Result<crate::upper::TwoLevelRatio, Failure> {
    let f = make_hypercube_density(&HypercubeSpec::new(r, vec![0])?)?;
    Ok(uniform_ratio(&f)?
        .two_level
        .expect("hypercube densities have two levels"))
}

fn run_pbin(cmd: &PbinCommand, format: Option<Format>) -> Result<String, Failure> {
    let format = format.unwrap_or(Format::Text);
    Ok(match cmd {
        PbinCommand::Pmf { probs } => {
            let pmf = pbin_pmf(&PBinParams::new(probs.clone())?);
            let rows = pmf
                .mass()
                .iter()
                .enumerate()
                .map(|(k, &p)| vec![k as f64, p])
                .collect();
            match format {
                Format::Text => words(pmf.mass().iter().copied()),
                f => table(f, &["k", "mass"], rows),
            }
        }
        PbinCommand::Survival { l, probs } => {
            let s = pbin_survival(&PBinParams::new(probs.clone())?, *l);
            match format {
                Format::Text => words([s]),
                f => table(f, &["l", "survival"], vec![vec![*l as f64, s]]),
            }
        }
        PbinCommand::Shift { p, p_prime, l, rest } => {
            let (lhs, rhs) = pbin_shift_difference(&PBinParams::new(rest.clone())?, *p, *p_prime, *l)?;
            table(format, &["lhs", "rhs"], vec![vec![lhs, rhs]])
        }
    })
}

fn run_experiment(cmd: &ExperimentCommand, format: Option<Format>, seed: u64) -> Result<String, Failure> {
    let format = format.unwrap_or(Format::Text);
    Ok(match cmd {
        ExperimentCommand::Build(args) => {
            let f = density_from(args)?;
            serde_json::to_string(&f).expect("densities serialise") + "\n"
        }
        ExperimentCommand::Sample { density, n } => {
            let f = density_from(density)?;
            let mut rng = child_stream(seed, tag("cli/sample"), 0);
            let xs = sample_density(&f, *n, &mut rng);
            match format {
                Format::Json => pretty(&json!(xs)),
                Format::Csv => csv(&["x"], xs.into_iter().map(|x| vec![Cell::from(x)])),
                Format::Text => xs.iter().map(|x| format!("{x:.17e}\n")).collect(),
            }
        }
        ExperimentCommand::Tv { a, b } => {
            let tv = tv_distance(&load_density(a)?, &load_density(b)?);
            table(format, &["tv"], vec![vec![tv]])
        }
        ExperimentCommand::Integral { density, a, b } => {
            let mass = density_integral(&density_from(density)?, *a, *b)?;
            table(format, &["mass"], vec![vec![mass]])
        }
    })
}

fn upper_rows(r: f64, ns: &[usize], mc: Option<usize>, seed: u64) -> Result<Vec<Vec<f64>>, Failure> {
    let ratio = cube_ratio(r)?;
    let cert = hoeffding_certificate(r)?;
    let density = make_hypercube_density(&HypercubeSpec::new(r, vec![0])?)?;
    ns.iter()
        .map(|&n| {
            let k = n as u64 + 1;
            let mut row = vec![
                r,
                n as f64,
                exact_mad(&ratio, k)? / 2.0,
                thm1_bound(&cert, n as u64),
                mattner_floor(&ratio, k)? / 2.0,
            ];
            if let Some(draws) = mc {
                let e = mc_mad(&density, n + 1, draws, crate::stream::sub_seed(seed, "cli/upper", n as u64))?;
                row.extend([e.estimate / 2.0, e.half_width / 2.0]);
            } else {
                row.extend([f64::NAN, f64::NAN]);
            }
            Ok(row)
        })
        .collect()
}

fn run_upper(cmd: &UpperCommand, format: Option<Format>, seed: u64) -> Result<String, Failure> {
    let format = format.unwrap_or(Format::Csv);
    Ok(match cmd {
        UpperCommand::Mad { range, mc } => {
            let ratio = cube_ratio(range.r)?;
            let density = make_hypercube_density(&HypercubeSpec::new(range.r, vec![0])?)?;
            let mut header = vec!["r", "n", "k", "exact_mad", "exact_mad_half"];
            if mc.is_some() {
                header.extend(["mc_estimate", "mc_ci"]);
            }
            let rows = n_values(range)?
                .into_iter()
                .map(|n| {
                    let mad = exact_mad(&ratio, n as u64 + 1)?;
                    let mut row = vec![range.r, n as f64, (n + 1) as f64, mad, mad / 2.0];
                    if let Some(draws) = mc {
                        let e = mc_mad(&density, n + 1, *draws, crate::stream::sub_seed(seed, "cli/upper", n as u64))?;
                        row.extend([e.estimate, e.half_width]);
                    }
                    Ok(row)
                })
                .collect::<Result<Vec<_>, Failure>>()?;
            table(format, &header, rows)
        }
        UpperCommand::Bound { range } => {
            let cert = hoeffding_certificate(range.r)?;
            let rows = n_values(range)?
                .into_iter()
                .map(|n| vec![range.r, n as f64, cert.c(), cert.s(), thm1_bound(&cert, n as u64)])
                .collect();
            table(format, &["r", "n", "C", "s", "thm1_bound"], rows)
        }
        UpperCommand::Floor { range } => {
            let ratio = cube_ratio(range.r)?;
            let rows = n_values(range)?
                .into_iter()
                .map(|n| {
                    let k = n as u64 + 1;
                    Ok(vec![range.r, n as f64, k as f64, mattner_floor(&ratio, k)?, exact_mad(&ratio, k)?])
                })
                .collect::<Result<Vec<_>, Failure>>()?;
            table(format, &["r", "n", "k", "mattner_floor", "exact_mad"], rows)
        }
        UpperCommand::Chi2 { r, c, s } => {
            let cert = match (r, c, s) {
                (Some(r), _, _) => hoeffding_certificate(*r)?,
                (None, Some(c), Some(s)) => CsCertificate::new(*c, *s)?,
                _ => return Err(Failure::Invalid("give --r or both --c and --s".into())),
            };
            table(format, &["C", "s", "chi2_radius"], vec![vec![cert.c(), cert.s(), chi2_radius(&cert)]])
        }
        UpperCommand::Report { range, mc } => {
            let rows = upper_rows(range.r, &n_values(range)?, *mc, seed)?;
            let header = ["r", "n", "exact_mad_half", "thm1_bound", "mattner_floor_half", "mc_estimate", "mc_ci"];
            match format {
                Format::Csv => csv(
                    &header,
                    rows.into_iter().map(|row| {
                        row.into_iter()
                            .enumerate()
                            .map(|(i, v)| match i {
                                1 => Cell::from(v as u64),
                                _ if v.is_nan() => Cell::Empty,
                                _ => Cell::from(v),
                            })
                            .collect()
                    }),
                ),
                f => table(f, &header, rows),
            }
        }
    })
}

fn run_lower(cmd: &LowerCommand, format: Option<Format>, seed: u64) -> Result<String, Failure> {
    let format = format.unwrap_or(Format::Csv);
    Ok(match cmd {
        LowerCommand::Risks { r, n } => {
            let curve = bayes_risk_curve(*r, *n)?;
            let rows = curve
                .values
                .iter()
                .enumerate()
                .map(|(k, &v)| vec![k as f64, v])
                .collect();
            table(format, &["n", "risk"], rows)
        }
        LowerCommand::CubeLower { range, mc } => {
            let results = n_values(range)?
                .into_iter()
                .map(|n| {
                    let res = cube_lower(n, range.r, *mc, crate::stream::sub_seed(seed, "sweep/lower", n as u64))?;
                    let bound = thm2_bound(1.0 - 1.0 / range.r, 1.0, n as u64)?;
                    Ok((res, bound))
                })
                .collect::<Result<Vec<_>, Failure>>()?;
            let header = ["r", "n", "m", "l_star", "delta_max", "delta_avg_paper", "thm2_bound", "ci", "method"];
            match format {
                Format::Json => pretty(&json!(results
                    .iter()
                    .map(|(res, bound)| json!({
                        "r": range.r, "n": res.n, "m": res.m, "l_star": res.l_star,
                        "delta_max": res.delta, "delta_avg_paper": res.delta_avg_paper,
                        "thm2_bound": bound, "ci": res.ci_at_star(), "method": res.method,
                        "per_l": res.per_l,
                    }))
                    .collect::<Vec<_>>())),
                _ => csv(
                    &header,
                    results.iter().map(|(res, bound)| {
                        vec![
                            range.r.into(),
                            res.n.into(),
                            res.m.into(),
                            res.l_star.into(),
                            res.delta.into(),
                            res.delta_avg_paper.into(),
                            (*bound).into(),
                            res.ci_at_star().into(),
                            res.method.as_str().into(),
                        ]
                    }),
                ),
            }
        }
        LowerCommand::Mixedpbin { r, m, n, mc } => {
            if *m == 0 {
                return Err(Failure::Invalid("need m >= 1".into()));
            }
            let curve = bayes_risk_curve(*r, *n)?;
            let res = mixedpbin_mass(*n, &vec![1.0 / *m as f64; *m], &curve.values, *mc, crate::stream::sub_seed(seed, "cli/mixedpbin", 0))?;
            let scaled = res.mass * (*m as f64).sqrt();
            match format {
                Format::Json => pretty(&json!({
                    "r": r, "m": m, "n": n, "k_star": res.k_star, "mass": res.mass,
                    "mass_sqrt_m": scaled, "ci": res.ci[res.k_star], "method": res.method,
                    "masses": res.masses,
                })),
                _ => csv(
                    &["r", "m", "n", "k_star", "mass", "mass_sqrt_m", "ci", "method"],
                    [vec![
                        (*r).into(),
                        (*m).into(),
                        (*n).into(),
                        res.k_star.into(),
                        res.mass.into(),
                        scaled.into(),
                        res.ci[res.k_star].into(),
                        res.method.as_str().into(),
                    ]],
                ),
            }
        }
    })
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn run_sweep(args: &SweepArgs, format: Option<Format>, seed: u64) -> Result<String, Failure> {
    let config = SweepConfig {
        lower_mc_samples: args.mc,
        upper_mc_draws: args.mc_upper,
        seed,
    };
    let ns = n_values(&args.range)?;
    let reports = bound_sweep(args.range.r, &ns, &config)?;
    let summary = if reports.len() >= 3 {
        Some(summarize(&reports)?)
    } else {
        None
    };
    if let Some(path) = &args.summary {
        let s = summary
            .as_ref()
            .ok_or_else(|| Failure::Invalid("a summary needs at least 3 values of n".into()))?;
        write_file(path, &pretty(&json!(s)))?;
    }
    Ok(match format.unwrap_or(Format::Csv) {
        Format::Json => pretty(&json!({ "rows": reports, "summary": summary })),
        _ => sweep_csv(&reports),
    })
}

fn run_verify(quick: bool, seed: u64) -> Result<String, Failure> {
    let budget = if quick { Budget::quick() } else { Budget::full() };
    let outcomes = run_checks(&budget, seed);
    let mut text = String::new();
    for o in &outcomes {
        let status = if o.passed { "PASS" } else { "FAIL" };
        text.push_str(&format!("{status} {}: {}\n", o.name, o.detail));
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    text.push_str(&format!("{} passed, {failed} failed\n", outcomes.len() - failed));
    if failed > 0 {
        Err(Failure::Verify(text))
    } else {
        Ok(text)
    }
}

fn dispatch(config: &RunConfig) -> Result<String, Failure> {
    let (format, seed) = (config.format, config.seed);
    match &config.command {
        Command::Pbin(cmd) => run_pbin(cmd, format),
        Command::Experiment(cmd) => run_experiment(cmd, format, seed),
        Command::Upper(cmd) => run_upper(cmd, format, seed),
        Command::Lower(cmd) => run_lower(cmd, format, seed),
        Command::Sweep(args) => run_sweep(args, format, seed),
        Command::Verify { quick } => run_verify(*quick, seed),
    }
}

/// Executes a parsed configuration, writing to `--out` or `stdout`; returns the exit code.
pub fn run(config: &RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(stderr, "error: cannot start workers: {e}");
            return EXIT_INVALID;
        }
    };
    let result = pool.install(|| dispatch(config));
    let (text, code) = match result {
        Ok(text) => (text, EXIT_OK),
        Err(Failure::Verify(text)) => (text, EXIT_VERIFY_FAILED),
        Err(Failure::Invalid(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            return EXIT_INVALID;
        }
        Err(Failure::Io(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            return EXIT_IO;
        }
    };
    let written = match &config.out {
        Some(path) => write_file(path, &text),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Io(e.to_string())),
    };
    match written {
        Ok(()) => code,
        Err(Failure::Io(msg)) | Err(Failure::Invalid(msg)) | Err(Failure::Verify(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_IO
        }
    }
}

/// Parses `args` (including the program name) and runs; clap usage errors exit 1.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match RunConfig::try_parse_from(args) {
        Ok(config) => run(&config, stdout, stderr),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(rendered.as_bytes())
            } else {
                stdout.write_all(rendered.as_bytes())
            };
            code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let mut full = vec!["lecam"];
        full.extend_from_slice(args);
        let code = main_with_args(full, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn n_ranges() {
        assert_eq!(parse_n_range("4:1024:x2").unwrap(), vec![4, 8, 16, 32, 64, 128, 256, 512, 1024]);
        assert_eq!(parse_n_range("1:4").unwrap(), vec![1, 2, 3, 4]);
        assert_eq!(parse_n_range("1:10:+4").unwrap(), vec![1, 5, 9]);
        assert_eq!(parse_n_range("3,7,15").unwrap(), vec![3, 7, 15]);
        assert_eq!(parse_n_range("5").unwrap(), vec![5]);
        assert!(parse_n_range("0:8:x2").is_err());
        assert!(parse_n_range("5,3").is_err());
        assert!(parse_n_range("a").is_err());
        assert!(parse_n_range("1:2:3:4").is_err());
    }

    #[test]
    fn pbin_pmf_prints_plain_values() {
        let (code, out, _) = call(&["pbin", "pmf", "0.1", "0.2", "0.3"]);
        assert_eq!(code, 0);
        assert_eq!(out, "0.504 0.398 0.092 0.006\n");
    }

    #[test]
    fn survival_and_shift() {
        let (code, out, _) = call(&["pbin", "survival", "--l", "1", "0.25", "0.5"]);
        assert_eq!((code, out.as_str()), (0, "0.625\n"));
        let (code, out, _) = call(&["pbin", "shift", "--p", "0.8", "--p-prime", "0.3", "--l", "1", "0.5"]);
        assert_eq!((code, out.as_str()), (0, "0.25 0.25\n"));
        let (code, _, _) = call(&["pbin", "shift", "--p", "0.3", "--p-prime", "0.8", "--l", "1", "0.5"]);
        assert_eq!(code, EXIT_INVALID);
    }

    #[test]
    fn invalid_arguments_exit_1() {
        assert_eq!(call(&["pbin", "pmf", "1.5"]).0, EXIT_INVALID);
        assert_eq!(call(&["sweep", "--r", "2", "--n", "4", "--bogus"]).0, EXIT_INVALID);
        assert_eq!(call(&["frobnicate"]).0, EXIT_INVALID);
        assert_eq!(call(&["upper", "bound", "--r", "1", "--n", "3"]).0, EXIT_INVALID);
        assert_eq!(call(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn help_documents_every_sweep_column() {
        let (_, out, _) = call(&["sweep", "--help"]);
        for col in crate::rate::SWEEP_COLUMNS {
            assert!(out.contains(&format!("  {col} ")), "column {col} undocumented");
        }
    }

    #[test]
    fn missing_scenario_is_io_error() {
        let (code, _, err) = call(&["experiment", "build", "--scenario", "/nonexistent/x.json"]);
        assert_eq!(code, EXIT_IO, "{err}");
    }

    #[test]
    fn experiment_build_from_bits() {
        let (code, out, _) = call(&["experiment", "build", "--r", "2", "--bits", "01"]);
        assert_eq!(code, 0);
        assert_eq!(out, "{\"breakpoints\":[0.0,0.25,0.5,0.75,1.0],\"values\":[0.5,1.5,1.5,0.5]}\n");
    }

    #[test]
    fn upper_chi2_and_bound() {
        let (code, out, _) = call(&["upper", "chi2", "--r", "2", "--format", "text"]);
        assert_eq!(code, 0);
        assert!(out.starts_with("2 0.5 3.38629436111989"), "{out}");
        let (_, out, _) = call(&["upper", "bound", "--r", "2", "--n", "1", "--format", "json"]);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert!((v[0]["thm1_bound"].as_f64().unwrap() - 1.7724538509055159).abs() < 1e-12);
    }

    #[test]
    fn lower_rows() {
        let (code, out, _) = call(&["lower", "cube-lower", "--r", "2", "--n", "1"]);
        assert_eq!(code, 0);
        let row = out.lines().nth(1).unwrap();
        assert!(row.starts_with("2.0000000000000000e0,1,2,1,9.3750000000000000e-2,"), "{row}");
        assert!(row.ends_with(",exact"));
    }
}
