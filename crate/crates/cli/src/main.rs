//! Command-line front end: data generation, single selections, sweeps,
//! negative-case demonstrations and the MovieLens pipeline.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use biasmax::datagen::{gen_negative_with_beta, SyntheticData, EMERGING_CAP, PARETO_SCALE};
use biasmax::harness::movielens::{DEFAULT_CONFIDENCE, DEFAULT_MIN_RATINGS};
use biasmax::harness::sweep::{summarize, write_summary, SEED_ENV};
use biasmax::harness::{fmt_g, write_records};
use biasmax::maximizers::SelectionResult;
use biasmax::rng::stream;
use biasmax::{
    fairness_caps, gen_synthetic1, gen_synthetic2, greedy_cardinality, greedy_with_caps, ingest_movielens,
    normalized_latent_utility, run_algorithm, run_movielens_experiment, run_negative_demo, run_sweep, Algorithm,
    CategoryStructure, Error, FairnessConstraint, GroupStructure, KvConfig, MovieLensPaths, MovieTable,
    NegativeCase, ObjectiveSpec, Result, SweepConfig, SyntheticParams1, UtilityMatrix,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "biasmax", version, about = "Subset selection under group-dependent utility bias")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic or negative-case instance as CSV files.
    Gen {
        #[command(subcommand)]
        dataset: GenCommand,
    },
    /// Run one selection algorithm on instance files.
    Select(SelectArgs),
    /// Run a β-sweep described by a key-value config file.
    Sweep(SweepArgs),
    /// Negative-case demonstration: exact constrained selections over resampled groups.
    Negres(NegresArgs),
    /// MovieLens ingestion and experiments.
    Movielens {
        #[command(subcommand)]
        command: MovielensCommand,
    },
}

#[derive(Subcommand)]
enum GenCommand {
    Synthetic1 {
        #[arg(long, default_value_t = 250)]
        n: usize,
        #[arg(long, default_value_t = 50)]
        k: usize,
        #[arg(long, default_value_t = 0.05)]
        lambda: f64,
        #[arg(long, default_value_t = 0.8)]
        emerging_frac: f64,
        #[arg(long, default_value_t = 0.9)]
        p_nh: f64,
        #[arg(long, default_value_t = 2.0)]
        delta: f64,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, default_value_t = 0.5)]
        frac_g1: f64,
        #[command(flatten)]
        common: GenCommon,
    },
    Synthetic2 {
        #[arg(long, default_value_t = 250)]
        n: usize,
        #[arg(long, default_value_t = 2.0)]
        delta: f64,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, default_value_t = 0.5)]
        frac_g1: f64,
        #[command(flatten)]
        common: GenCommon,
    },
    Negative {
        #[arg(long)]
        case: NegativeCase,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        n: usize,
        /// Bias factor of the second group (default ε² for A/B, ε for C/D).
        #[arg(long)]
        beta2: Option<f64>,
        #[command(flatten)]
        common: GenCommon,
    },
}

#[derive(Args)]
struct GenCommon {
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum SelectAlgo {
    Uncons,
    Proportional,
    Algorithm1,
    /// Greedy under caps from `--constraint`.
    Caps,
}

#[derive(Args)]
struct SelectArgs {
    /// Observed utilities CSV (`item,a1,...,am`).
    #[arg(long)]
    utilities: PathBuf,
    /// Curve config (`curve.<j> = <kind>`).
    #[arg(long)]
    curves: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long, value_enum, default_value = "algorithm1")]
    algo: SelectAlgo,
    /// Groups CSV (`item,group`); all items in one group if omitted.
    #[arg(long)]
    groups: Option<PathBuf>,
    /// Categories CSV (`item,category`); derived from positive entries if omitted.
    #[arg(long)]
    categories: Option<PathBuf>,
    /// Constraint config with `fair.u` and `fair.v`, for `--algo caps`.
    #[arg(long)]
    constraint: Option<PathBuf>,
    /// Latent utilities CSV; adds latent value and NLU to the summary.
    #[arg(long)]
    latent: Option<PathBuf>,
    /// Selection CSV (`item,category,group,step`); stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Summary file; stderr if omitted.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Raw per-trial CSV.
    #[arg(long)]
    out: PathBuf,
    /// Per-cell mean/SEM CSV.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct NegresArgs {
    #[arg(long)]
    case: NegativeCase,
    #[arg(long)]
    eps: f64,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long)]
    beta2: Option<f64>,
    /// Constraint config with `fair.u`, `fair.v`; proportional if omitted.
    #[arg(long)]
    constraint: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum MovielensCommand {
    /// Join the inputs and write the movie table, ratio table and join counts.
    Ingest {
        #[command(flatten)]
        input: MovielensInput,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-user selection experiment over a set of stereotypical genres.
    Run {
        #[command(flatten)]
        input: MovielensInput,
        /// Comma-separated genres, e.g. `Action,War`.
        #[arg(long, value_delimiter = ',', required = true)]
        genres: Vec<String>,
        #[arg(long, value_delimiter = ',', required = true)]
        k: Vec<usize>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = DEFAULT_MIN_RATINGS)]
        min_ratings: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        summary: Option<PathBuf>,
    },
}

#[derive(Args)]
struct MovielensInput {
    /// Directory with ratings.csv, genome-scores.csv, genome-tags.csv, movies.csv.
    #[arg(long)]
    dir: PathBuf,
    /// Lead-actor gender labels (`movieId,gender,confidence`).
    #[arg(long)]
    labels: PathBuf,
    /// Optional `genre,tag` overrides for the genre to genome-tag match.
    #[arg(long)]
    tag_overrides: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_CONFIDENCE)]
    threshold: f64,
}

impl MovielensInput {
    fn load(&self) -> Result<MovieTable> {
        let mut paths = MovieLensPaths::in_dir(&self.dir, &self.labels);
        paths.tag_overrides = self.tag_overrides.clone();
        ingest_movielens(&paths, self.threshold)
    }
}

fn io_err(path: &Path) -> impl Fn(io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<()> {
    let mut w = create(path)?;
    f(&mut w).and_then(|_| w.flush()).map_err(io_err(path))
}

/// `$BIASMAX_SEED` when set, otherwise the flag value.
fn seed_base(flag: u64) -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Input(format!("{SEED_ENV}=`{v}` is not an unsigned integer"))),
        Err(_) => Ok(flag),
    }
}

fn load_constraint(path: Option<&Path>, p: usize) -> Result<FairnessConstraint> {
    match path {
        Some(p) => FairnessConstraint::from_config(&KvConfig::load(p)?),
        None => Ok(FairnessConstraint::proportional(p)),
    }
}

fn curves_text(spec: &ObjectiveSpec) -> String {
    spec.curves().iter().enumerate().map(|(j, c)| format!("curve.{} = {c}\n", j + 1)).collect()
}

fn write_instance(dir: &Path, data: &SyntheticData, manifest: &[(&str, String)]) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    data.latent.utilities().write_csv(&dir.join("latent.csv"))?;
    data.observed.utilities().write_csv(&dir.join("observed.csv"))?;
    let curves = curves_text(&data.latent);
    write_file(&dir.join("curves.cfg"), |w| w.write_all(curves.as_bytes()))?;
    write_file(&dir.join("groups.csv"), |w| data.groups.write_csv(w))?;
    write_file(&dir.join("categories.csv"), |w| data.categories.write_csv(w))?;
    let bias = data.bias.to_string();
    write_file(&dir.join("bias.cfg"), |w| w.write_all(bias.as_bytes()))?;
    write_file(&dir.join("manifest.txt"), |w| {
        for (k, v) in manifest {
            writeln!(w, "{k} = {v}")?;
        }
        Ok(())
    })
}

fn gen(cmd: GenCommand) -> Result<()> {
    match cmd {
        GenCommand::Synthetic1 { n, k, lambda, emerging_frac, p_nh, delta, beta, frac_g1, common } => {
            let seed = seed_base(common.seed)?;
            let params = SyntheticParams1 { n, k, lambda, emerging_frac, p_not_heard: p_nh, delta, beta, frac_g1 };
            let data = gen_synthetic1(&params, seed)?;
            write_instance(
                &common.out,
                &data,
                &[
                    ("dataset", "synthetic1".into()),
                    ("seed", seed.to_string()),
                    ("n", n.to_string()),
                    ("k", k.to_string()),
                    ("lambda", fmt_g(lambda)),
                    ("emerging_frac", fmt_g(emerging_frac)),
                    ("p_nh", fmt_g(p_nh)),
                    ("delta", fmt_g(delta)),
                    ("beta", fmt_g(beta)),
                    ("frac_g1", fmt_g(frac_g1)),
                    ("power_law", format!("pareto1 minimum 1 shape delta, scaled by {}", fmt_g(PARETO_SCALE))),
                    ("emerging_truncation", format!("X <= {} by rejection", fmt_g(EMERGING_CAP))),
                    ("bias_scope", "group 2, attribute 1 only".into()),
                ],
            )
        }
        GenCommand::Synthetic2 { n, delta, beta, frac_g1, common } => {
            let seed = seed_base(common.seed)?;
            let data = gen_synthetic2(n, delta, frac_g1, beta, seed)?;
            write_instance(
                &common.out,
                &data,
                &[
                    ("dataset", "synthetic2".into()),
                    ("seed", seed.to_string()),
                    ("n", n.to_string()),
                    ("delta", fmt_g(delta)),
                    ("beta", fmt_g(beta)),
                    ("frac_g1", fmt_g(frac_g1)),
                    ("power_law", format!("pareto1 minimum 1 shape delta, scaled by {}", fmt_g(PARETO_SCALE))),
                ],
            )
        }
        GenCommand::Negative { case, eps, k, n, beta2, common } => {
            let seed = seed_base(common.seed)?;
            let default_beta = match case {
                NegativeCase::A | NegativeCase::B => eps * eps,
                NegativeCase::C | NegativeCase::D => eps,
            };
            let inst = gen_negative_with_beta(case, eps, k, n, beta2.unwrap_or(default_beta))?;
            let groups = inst.sample_groups(&mut stream(seed, &[]))?;
            let observed = inst.observed(&groups)?;
            let data = SyntheticData {
                categories: CategoryStructure::from_support(inst.latent.utilities()),
                latent: inst.latent.clone(),
                observed,
                groups,
                bias: inst.bias(),
                emerging: Vec::new(),
            };
            write_instance(
                &common.out,
                &data,
                &[
                    ("dataset", "negative".into()),
                    ("case", case.to_string()),
                    ("seed", seed.to_string()),
                    ("eps", fmt_g(eps)),
                    ("k", k.to_string()),
                    ("n", n.to_string()),
                    ("gamma", format!("{}, {}", fmt_g(inst.gamma[0]), fmt_g(inst.gamma[1]))),
                    ("group_sizes", format!("{}, {}", inst.group_sizes[0], inst.group_sizes[1])),
                    ("beta", format!("{}, {}", fmt_g(inst.beta[0]), fmt_g(inst.beta[1]))),
                    ("type_a", inst.type_a.to_string()),
                    ("opt", fmt_g(inst.opt)),
                    ("analytic_opt", fmt_g(inst.analytic_opt)),
                    ("threshold", fmt_g(inst.threshold())),
                ],
            )
        }
    }
}

fn select(args: SelectArgs) -> Result<()> {
    let observed = ObjectiveSpec::load(&args.utilities, &args.curves)?;
    let n = observed.utilities().n();
    let groups = match &args.groups {
        Some(p) => GroupStructure::read_csv(p, n)?,
        None => GroupStructure::single(n),
    };
    let categories = match &args.categories {
        Some(p) => CategoryStructure::read_csv(p, n, observed.utilities().m())?,
        None => CategoryStructure::from_support(observed.utilities()),
    };
    let (name, mut res): (&str, SelectionResult) = match args.algo {
        SelectAlgo::Uncons => ("uncons", run_algorithm(Algorithm::Uncons, &observed, args.k, &groups, &categories)?),
        SelectAlgo::Proportional => {
            ("proportional", run_algorithm(Algorithm::ProportionalRepr, &observed, args.k, &groups, &categories)?)
        }
        SelectAlgo::Algorithm1 => {
            ("algorithm1", run_algorithm(Algorithm::Algorithm1, &observed, args.k, &groups, &categories)?)
        }
        SelectAlgo::Caps => {
            let c = load_constraint(args.constraint.as_deref(), groups.p())?;
            let caps = fairness_caps(&c, &groups, args.k)?;
            ("caps", greedy_with_caps(&observed, args.k, &groups, &caps)?)
        }
    };
    let mut summary = vec![
        ("algo", name.to_string()),
        ("k", args.k.to_string()),
        ("selected", res.subset.len().to_string()),
        ("observed", fmt_g(res.observed_value)),
        (
            "group_counts",
            res.group_counts.iter().map(ToString::to_string).collect::<Vec<_>>().join(", "),
        ),
        ("flags", res.flags.to_string()),
    ];
    if let Some(b) = &res.budgets {
        let list = b.budgets.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ");
        summary.push(("budgets", list));
        summary.push(("reference_target", b.target.to_string()));
    }
    if let Some(p) = &args.latent {
        let w = UtilityMatrix::read_csv(p)?;
        let latent = observed.with_utilities(w)?;
        let v = res.score_latent(&latent)?;
        let reference = greedy_cardinality(&latent, args.k)?;
        summary.push(("latent", fmt_g(v)));
        summary.push(("nlu", fmt_g(normalized_latent_utility(&latent, &res.subset, &reference.subset)?)));
    }

    let selection = |w: &mut dyn Write| -> io::Result<()> {
        writeln!(w, "item,category,group,step")?;
        for (step, (&i, c)) in res.subset.iter().zip(&res.categories).enumerate() {
            let cat = c.map(|c| (c + 1).to_string()).unwrap_or_default();
            writeln!(w, "{},{cat},{},{}", i + 1, groups.group_of(i) + 1, step + 1)?;
        }
        w.flush()
    };
    match &args.out {
        Some(p) => write_file(p, |w| selection(w))?,
        None => selection(&mut io::stdout().lock()).map_err(io_err(Path::new("<stdout>")))?,
    }
    let summary_text: String = summary.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
    match &args.summary {
        Some(p) => write_file(p, |w| w.write_all(summary_text.as_bytes())),
        None => io::stderr().write_all(summary_text.as_bytes()).map_err(io_err(Path::new("<stderr>"))),
    }
}

fn sweep(args: SweepArgs) -> Result<()> {
    let mut cfg = SweepConfig::from_config(&KvConfig::load(&args.config)?)?;
    cfg.apply_env_seed()?;
    let records = run_sweep(&cfg)?;
    write_file(&args.out, |w| write_records(w, &records))?;
    if let Some(p) = &args.summary {
        write_file(p, |w| write_summary(w, &summarize(&records)))?;
    }
    Ok(())
}

fn negres(args: NegresArgs) -> Result<()> {
    let seed = seed_base(args.seed)?;
    let default_beta = match args.case {
        NegativeCase::A | NegativeCase::B => args.eps * args.eps,
        NegativeCase::C | NegativeCase::D => args.eps,
    };
    let inst = gen_negative_with_beta(args.case, args.eps, args.k, args.n, args.beta2.unwrap_or(default_beta))?;
    let constraint = load_constraint(args.constraint.as_deref(), 2)?;
    let report = run_negative_demo(&inst, &constraint, args.trials, seed)?;
    write_file(&args.out, |w| report.write_csv(w))?;
    eprintln!(
        "case {} ε={} k={} n={}: Pr[ratio <= {}] = {} over {} trials (opt {})",
        report.case,
        fmt_g(report.eps),
        report.k,
        report.n,
        fmt_g(report.threshold),
        fmt_g(report.frequency_below()),
        report.trials.len(),
        fmt_g(report.opt)
    );
    Ok(())
}

fn movielens(cmd: MovielensCommand) -> Result<()> {
    match cmd {
        MovielensCommand::Ingest { input, out } => {
            let table = input.load()?;
            fs::create_dir_all(&out).map_err(io_err(&out))?;
            write_file(&out.join("movies.csv"), |w| table.write_table(w))?;
            write_file(&out.join("ratios.csv"), |w| table.write_ratios(w))?;
            write_file(&out.join("counts.txt"), |w| table.write_counts(w))?;
            let stereo = table.stereotypical_genres();
            write_file(&out.join("stereotypical.txt"), |w| writeln!(w, "stereotypical = {}", stereo.join(", ")))
        }
        MovielensCommand::Run { input, genres, k, trials, min_ratings, seed, out, summary } => {
            let table = input.load()?;
            let records = run_movielens_experiment(&table, &genres, &k, trials, seed_base(seed)?, min_ratings)?;
            write_file(&out, |w| write_records(w, &records))?;
            if let Some(p) = &summary {
                write_file(p, |w| write_summary(w, &summarize(&records)))?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen { dataset } => gen(dataset),
        Command::Select(a) => select(a),
        Command::Sweep(a) => sweep(a),
        Command::Negres(a) => negres(a),
        Command::Movielens { command } => movielens(command),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
