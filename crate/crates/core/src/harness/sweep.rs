//! β-sweeps over the synthetic datasets.
//!
//! A work unit is one `(δ, |G₁|/n, trial)` triple. Its seed depends on that
//! triple only, so every β and every algorithm sees the same latent matrix
//! and the same groups, and the comparison across β is paired. Units run in
//! parallel; rows are emitted in `(δ, fraction, β, algorithm, trial)` order.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use super::{fmt_g, mean_sem, normalized_latent_utility, run_algorithm, Algorithm, TrialRecord};
use crate::config::KvConfig;
use crate::datagen::{gen_synthetic1, gen_synthetic2, SyntheticData, SyntheticParams1};
use crate::error::{Error, Result};
use crate::maximizers::{greedy_cardinality, Flag, Flags};
use crate::rng::derive_seed;

pub const SEED_ENV: &str = "BIASMAX_SEED";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepDataset {
    Synthetic1,
    Synthetic2,
}

impl SweepDataset {
    pub fn name(self) -> &'static str {
        match self {
            SweepDataset::Synthetic1 => "synthetic1",
            SweepDataset::Synthetic2 => "synthetic2",
        }
    }
}

impl fmt::Display for SweepDataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepDataset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "synthetic1" | "1" => Ok(SweepDataset::Synthetic1),
            "synthetic2" | "2" => Ok(SweepDataset::Synthetic2),
            other => Err(Error::input(format!("unknown dataset `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub dataset: SweepDataset,
    pub n: usize,
    pub k: usize,
    pub betas: Vec<f64>,
    pub fractions: Vec<f64>,
    pub deltas: Vec<f64>,
    pub trials: usize,
    pub algorithms: Vec<Algorithm>,
    pub seed: u64,
    /// Dataset 1 only.
    pub lambda: f64,
    pub emerging_frac: f64,
    pub p_not_heard: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let d1 = SyntheticParams1::default();
        Self {
            dataset: SweepDataset::Synthetic2,
            n: 250,
            k: 50,
            betas: vec![0.001, 0.01, 0.1, 0.5, 1.0],
            fractions: vec![0.5],
            deltas: vec![2.0],
            trials: 50,
            algorithms: Algorithm::ALL.to_vec(),
            seed: 0,
            lambda: d1.lambda,
            emerging_frac: d1.emerging_frac,
            p_not_heard: d1.p_not_heard,
        }
    }
}

impl SweepConfig {
    /// Reads a key-value file; absent keys keep their defaults.
    ///
    /// ```text
    /// dataset = synthetic2
    /// n = 250
    /// k = 50
    /// betas = 0.01, 0.1, 1
    /// fractions = 0.25, 0.5
    /// deltas = 2
    /// trials = 50
    /// algorithms = uncons, proportional, algorithm1
    /// seed = 7
    /// ```
    pub fn from_config(cfg: &KvConfig) -> Result<Self> {
        let mut c = Self::default();
        if let Some(d) = cfg.parse_value("dataset")? {
            c.dataset = d;
        }
        macro_rules! set {
            ($field:ident, $key:literal, value) => {
                if let Some(v) = cfg.parse_value($key)? {
                    c.$field = v;
                }
            };
            ($field:ident, $key:literal, list) => {
                if let Some(v) = cfg.parse_list($key)? {
                    c.$field = v;
                }
            };
        }
        set!(n, "n", value);
        set!(k, "k", value);
        set!(betas, "betas", list);
        set!(fractions, "fractions", list);
        set!(deltas, "deltas", list);
        set!(trials, "trials", value);
        set!(algorithms, "algorithms", list);
        set!(seed, "seed", value);
        set!(lambda, "lambda", value);
        set!(emerging_frac, "emerging_frac", value);
        set!(p_not_heard, "p_nh", value);
        c.validate().map_err(|e| Error::format(cfg.source(), e.to_string()))?;
        Ok(c)
    }

    /// Replaces the seed base with `$BIASMAX_SEED` when it is set.
    pub fn apply_env_seed(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = v
                .trim()
                .parse()
                .map_err(|_| Error::input(format!("{SEED_ENV}=`{v}` is not an unsigned integer")))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::input("trials must be at least 1"));
        }
        if self.k < 1 || self.k > self.n {
            return Err(Error::input(format!("k = {} must lie in 1..=n", self.k)));
        }
        if let Some(b) = self.betas.iter().find(|b| !(**b > 0.0 && **b <= 1.0)) {
            return Err(Error::input(format!("β = {b} must lie in (0, 1]")));
        }
        if let Some(f) = self.fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
            return Err(Error::input(format!("fraction {f} must lie in [0, 1]")));
        }
        if let Some(d) = self.deltas.iter().find(|d| d.is_nan() || **d <= 0.0) {
            return Err(Error::input(format!("δ = {d} must be positive")));
        }
        if self.betas.is_empty() || self.fractions.is_empty() || self.deltas.is_empty() || self.algorithms.is_empty() {
            return Err(Error::input("betas, fractions, deltas and algorithms must be nonempty"));
        }
        Ok(())
    }

    fn generate(&self, delta: f64, frac: f64, beta: f64, seed: u64) -> Result<SyntheticData> {
        match self.dataset {
            SweepDataset::Synthetic1 => gen_synthetic1(
                &SyntheticParams1 {
                    n: self.n,
                    k: self.k,
                    lambda: self.lambda,
                    emerging_frac: self.emerging_frac,
                    p_not_heard: self.p_not_heard,
                    delta,
                    beta,
                    frac_g1: frac,
                },
                seed,
            ),
            SweepDataset::Synthetic2 => gen_synthetic2(self.n, delta, frac, beta, seed),
        }
    }

    /// Number of rows `run_sweep` emits.
    pub fn record_count(&self) -> usize {
        self.deltas.len() * self.fractions.len() * self.betas.len() * self.algorithms.len() * self.trials
    }
}

type Key = (usize, usize, usize, usize, usize);

fn run_unit(cfg: &SweepConfig, di: usize, fi: usize, trial: usize) -> Vec<(Key, TrialRecord)> {
    let (delta, frac) = (cfg.deltas[di], cfg.fractions[fi]);
    let seed = derive_seed(cfg.seed, &[di as u64, fi as u64, trial as u64]);
    let mut rows = Vec::with_capacity(cfg.betas.len() * cfg.algorithms.len());
    let mut reference: Option<Result<Vec<usize>>> = None;
    for (bi, &beta) in cfg.betas.iter().enumerate() {
        let data = cfg.generate(delta, frac, beta, seed);
        for (ai, &algo) in cfg.algorithms.iter().enumerate() {
            let mut record = TrialRecord {
                dataset: cfg.dataset.name().to_string(),
                beta: Some(beta),
                frac_g1: Some(frac),
                delta: Some(delta),
                algo,
                seed,
                k: cfg.k,
                latent: f64::NAN,
                observed: f64::NAN,
                nlu: f64::NAN,
                group_counts: Vec::new(),
                flags: Flags::default(),
            };
            let outcome = data.as_ref().map_err(clone_err).and_then(|d| {
                let reference = reference.get_or_insert_with(|| {
                    greedy_cardinality(&d.latent, cfg.k).map(|r| r.subset)
                });
                let reference = reference.as_ref().map_err(clone_err)?;
                let mut res = run_algorithm(algo, &d.observed, cfg.k, &d.groups, &d.categories)?;
                res.score_latent(&d.latent)?;
                let nlu = normalized_latent_utility(&d.latent, &res.subset, reference)?;
                Ok((res, nlu))
            });
            match outcome {
                Ok((res, nlu)) => {
                    record.latent = res.latent_value.expect("scored above");
                    record.observed = res.observed_value;
                    record.nlu = nlu;
                    record.group_counts = res.group_counts;
                    record.flags = res.flags;
                }
                Err(_) => record.flags.insert(Flag::Failed),
            }
            rows.push(((di, fi, bi, ai, trial), record));
        }
    }
    rows
}

fn clone_err(e: &Error) -> Error {
    Error::Data(e.to_string())
}

/// Runs every `(δ, fraction, β, algorithm, trial)` cell. Output depends on
/// the configuration only, not on thread scheduling.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let units: Vec<(usize, usize, usize)> = (0..cfg.deltas.len())
        .flat_map(|d| (0..cfg.fractions.len()).flat_map(move |f| (0..cfg.trials).map(move |t| (d, f, t))))
        .collect();
    let mut rows: Vec<(Key, TrialRecord)> = units
        .par_iter()
        .flat_map_iter(|&(d, f, t)| run_unit(cfg, d, f, t))
        .collect();
    rows.sort_by_key(|(key, _)| *key);
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}

/// Mean and standard error per `(dataset, β, fraction, δ, algorithm)` cell.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub dataset: String,
    pub beta: Option<f64>,
    pub frac_g1: Option<f64>,
    pub delta: Option<f64>,
    pub algo: Algorithm,
    pub k: usize,
    /// Rows that entered the aggregate (failed rows are skipped).
    pub trials: usize,
    pub nlu_mean: f64,
    pub nlu_sem: f64,
    pub latent_mean: f64,
    pub latent_sem: f64,
}

pub const SUMMARY_HEADER: &str = "dataset,beta,frac_g1,delta,algo,k,trials,nlu_mean,nlu_sem,latent_mean,latent_sem";

impl SummaryRow {
    pub fn csv_line(&self) -> String {
        let opt = |x: Option<f64>| x.map(fmt_g).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.dataset,
            opt(self.beta),
            opt(self.frac_g1),
            opt(self.delta),
            self.algo,
            self.k,
            self.trials,
            fmt_g(self.nlu_mean),
            fmt_g(self.nlu_sem),
            fmt_g(self.latent_mean),
            fmt_g(self.latent_sem)
        )
    }
}

/// Aggregates rows per cell, in order of first appearance.
pub fn summarize(records: &[TrialRecord]) -> Vec<SummaryRow> {
    let bits = |x: Option<f64>| x.map(f64::to_bits);
    let mut order = Vec::new();
    let mut cells: BTreeMap<_, Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        let key = (r.dataset.clone(), bits(r.beta), bits(r.frac_g1), bits(r.delta), r.algo, r.k);
        cells
            .entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let rows: Vec<&TrialRecord> =
                cells[&key].iter().copied().filter(|r| !r.flags.contains(Flag::Failed)).collect();
            let nlu: Vec<f64> = rows.iter().map(|r| r.nlu).collect();
            let latent: Vec<f64> = rows.iter().map(|r| r.latent).collect();
            let (nlu_mean, nlu_sem) = mean_sem(&nlu);
            let (latent_mean, latent_sem) = mean_sem(&latent);
            let first = cells[&key][0];
            SummaryRow {
                dataset: first.dataset.clone(),
                beta: first.beta,
                frac_g1: first.frac_g1,
                delta: first.delta,
                algo: first.algo,
                k: first.k,
                trials: rows.len(),
                nlu_mean,
                nlu_sem,
                latent_mean,
                latent_sem,
            }
        })
        .collect()
}

pub fn write_summary<W: Write>(mut out: W, rows: &[SummaryRow]) -> std::io::Result<()> {
    writeln!(out, "{SUMMARY_HEADER}")?;
    for r in rows {
        writeln!(out, "{}", r.csv_line())?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    fn small() -> SweepConfig {
        SweepConfig {
            n: 60,
            k: 12,
            betas: vec![0.1, 1.0],
            fractions: vec![0.5],
            deltas: vec![2.0],
            trials: 3,
            ..Default::default()
        }
    }

    #[test]
    fn record_count_and_order() {
        let cfg = small();
        let rows = run_sweep(&cfg).unwrap();
        assert_eq!(rows.len(), cfg.record_count());
        assert_eq!(rows[0].beta, Some(0.1));
        assert_eq!(rows[0].algo, Algorithm::Uncons);
        assert_eq!(rows[1].algo, Algorithm::Uncons);
        assert_eq!(rows[3].algo, Algorithm::ProportionalRepr);
        // paired draws: the same trial shares a seed across β
        assert_eq!(rows[0].seed, rows[9].seed);
    }

    #[test]
    fn uncons_at_beta_one_is_the_reference() {
        let cfg = SweepConfig { betas: vec![1.0], algorithms: vec![Algorithm::Uncons], ..small() };
        for r in run_sweep(&cfg).unwrap() {
            assert!((r.nlu - 1.0).abs() < 1e-12, "{r:?}");
        }
    }

    #[test]
    fn config_round_trip() {
        let cfg = KvConfig::parse(
            "dataset = synthetic1\nbetas = 0.5, 1\nalgorithms = uncons, alg1\ntrials = 4\nseed = 9\n",
            Path::new("s.cfg"),
        )
        .unwrap();
        let c = SweepConfig::from_config(&cfg).unwrap();
        assert_eq!(c.dataset, SweepDataset::Synthetic1);
        assert_eq!(c.betas, vec![0.5, 1.0]);
        assert_eq!(c.algorithms, vec![Algorithm::Uncons, Algorithm::Algorithm1]);
        assert_eq!((c.trials, c.seed), (4, 9));
        let bad = KvConfig::parse("trials = 0\n", Path::new("s.cfg")).unwrap();
        assert!(SweepConfig::from_config(&bad).is_err());
    }
}
