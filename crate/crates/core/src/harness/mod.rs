//! Experiment orchestration: baselines, normalized latent utility, sweeps,
//! negative-case demonstrations and MovieLens runs, all emitting CSV.

pub mod movielens;
pub mod negative;
pub mod sweep;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::debias::algorithm1;
use crate::error::{Error, Result};
use crate::groups::{fairness_caps, CategoryStructure, FairnessConstraint, GroupStructure};
use crate::maximizers::{greedy_cardinality, greedy_with_caps, Flags, SelectionResult};
use crate::objective::{ObjectiveSpec, SetObjective};

pub use movielens::{ingest_movielens, run_movielens_experiment, MovieLensPaths, MovieTable};
pub use negative::{run_negative_demo, NegativeReport};
pub use sweep::{run_sweep, summarize, SummaryRow, SweepConfig};

/// Selection algorithms compared by the harness.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Algorithm {
    /// Greedy on observed utilities, no constraints.
    Uncons,
    /// Greedy on observed utilities with proportional group caps.
    ProportionalRepr,
    /// Reference-group debiasing.
    Algorithm1,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Uncons, Algorithm::ProportionalRepr, Algorithm::Algorithm1];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Uncons => "uncons",
            Algorithm::ProportionalRepr => "proportional",
            Algorithm::Algorithm1 => "algorithm1",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uncons" => Ok(Algorithm::Uncons),
            "proportional" | "proportionalrepr" | "prop" => Ok(Algorithm::ProportionalRepr),
            "algorithm1" | "alg1" => Ok(Algorithm::Algorithm1),
            other => Err(Error::input(format!("unknown algorithm `{other}`"))),
        }
    }
}

/// Runs `algo` on observed data only. `Uncons` ignores the groups and
/// categories; `ProportionalRepr` uses the groups but not the categories.
pub fn run_algorithm(
    algo: Algorithm,
    observed: &ObjectiveSpec,
    k: usize,
    groups: &GroupStructure,
    categories: &CategoryStructure,
) -> Result<SelectionResult> {
    match algo {
        Algorithm::Uncons => greedy_cardinality(observed, k),
        Algorithm::ProportionalRepr => {
            let caps = fairness_caps(&FairnessConstraint::proportional(groups.p()), groups, k)?;
            greedy_with_caps(observed, k, groups, &caps)
        }
        Algorithm::Algorithm1 => algorithm1(observed, k, groups, categories),
    }
}

/// `F(subset)/F(reference)` on the latent objective.
pub fn normalized_latent_utility(latent: &dyn SetObjective, subset: &[usize], reference: &[usize]) -> Result<f64> {
    let denom = latent.value(reference)?;
    if denom.is_nan() || denom <= 0.0 {
        return Err(Error::UndefinedNlu(format!("reference value is {denom}")));
    }
    Ok(latent.value(subset)? / denom)
}

/// One row of a results CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub dataset: String,
    pub beta: Option<f64>,
    pub frac_g1: Option<f64>,
    pub delta: Option<f64>,
    pub algo: Algorithm,
    pub seed: u64,
    pub k: usize,
    pub latent: f64,
    pub observed: f64,
    pub nlu: f64,
    pub group_counts: Vec<usize>,
    pub flags: Flags,
}

pub const RECORD_HEADER: &str = "dataset,beta,frac_g1,delta,algo,seed,k,latent,observed,nlu,flags";

fn opt_g(x: Option<f64>) -> String {
    x.map(fmt_g).unwrap_or_default()
}

impl TrialRecord {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.dataset,
            opt_g(self.beta),
            opt_g(self.frac_g1),
            opt_g(self.delta),
            self.algo,
            self.seed,
            self.k,
            fmt_g(self.latent),
            fmt_g(self.observed),
            fmt_g(self.nlu),
            self.flags
        )
    }
}

pub fn write_records<W: Write>(mut out: W, records: &[TrialRecord]) -> std::io::Result<()> {
    writeln!(out, "{RECORD_HEADER}")?;
    for r in records {
        writeln!(out, "{}", r.csv_line())?;
    }
    out.flush()
}

/// C-style `%.10g` formatting.
pub fn fmt_g(x: f64) -> String {
    const PRECISION: i32 = 10;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.*e}", (PRECISION - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..PRECISION).contains(&exp) {
        let fixed = format!("{:.*}", (PRECISION - 1 - exp) as usize, x);
        trim_zeros(&fixed).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Sample mean and standard error (`s/√t`, 0 for fewer than two values).
pub fn mean_sem(values: &[f64]) -> (f64, f64) {
    let t = values.len();
    if t == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / t as f64;
    if t < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (t - 1) as f64;
    (mean, (var / t as f64).sqrt())
}
