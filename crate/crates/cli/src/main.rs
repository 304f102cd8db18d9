use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use sparse_gemini::benchmark::{run_benchmark_with, BenchmarkConfig, Suite};
use sparse_gemini::datagen::Scenario1Params;
use sparse_gemini::gemini::{Distance, Mode, OtSolverKind};
use sparse_gemini::io::{self, RunConfig, RunSettings, Truth};
use sparse_gemini::path::Regime;
use sparse_gemini::{Error, Result};

#[derive(Parser)]
#[command(name = "sparse-gemini", version, about = "Clustering with feature selection by sparse GEMINI")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic datasets as `<name>_features.csv` plus `<name>_truth.json`.
    GenData(GenDataArgs),
    /// Fit a regularisation path and write its artifacts.
    Fit(FitArgs),
    /// Score a fit directory against a truth file.
    Evaluate(EvaluateArgs),
    /// Repeated fits on the synthetic scenarios.
    Benchmark(BenchmarkArgs),
}

#[derive(Args)]
struct GenDataArgs {
    /// Scenarios to generate (S1..S5, D2); all when omitted.
    #[arg(long, value_delimiter = ',')]
    scenario: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

/// Training settings shared by `fit` and `benchmark`.
#[derive(Args, Default)]
struct TrainFlags {
    #[arg(long)]
    clusters: Option<usize>,
    #[arg(long, value_parser = parse_from_str::<Distance>)]
    gemini: Option<Distance>,
    #[arg(long, value_parser = parse_from_str::<Mode>)]
    mode: Option<Mode>,
    #[arg(long)]
    lambda0: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    f_thres: Option<usize>,
    #[arg(long)]
    hierarchy: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long, value_parser = parse_from_str::<Regime>)]
    regime: Option<Regime>,
    #[arg(long)]
    seed: Option<u64>,
    /// Hidden layer widths, comma separated.
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Transport solver for Wasserstein objectives: exact or entropic.
    #[arg(long, value_parser = parse_solver)]
    ot_solver: Option<OtSolverKind>,
    /// Entropic regularisation as a multiple of the mean ground cost.
    #[arg(long)]
    ot_epsilon: Option<f64>,
    /// TOML file with the same keys; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl TrainFlags {
    fn settings(&self) -> RunSettings {
        RunSettings {
            clusters: self.clusters,
            gemini: self.gemini,
            mode: self.mode,
            lambda0: self.lambda0,
            rho: self.rho,
            f_thres: self.f_thres,
            hierarchy: self.hierarchy,
            epochs: self.epochs,
            patience: self.patience,
            batch_size: self.batch_size,
            regime: self.regime,
            seed: self.seed,
            hidden: self.hidden.clone(),
            learning_rate: self.learning_rate,
            ot_solver: self.ot_solver,
            ot_epsilon: self.ot_epsilon,
            ..RunSettings::default()
        }
    }
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace an existing output directory.
    #[arg(long)]
    force: bool,
    /// Apply the 90% selection rule (default in the static regime).
    #[arg(long)]
    select: bool,
    #[command(flatten)]
    train: TrainFlags,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Directory written by `fit`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    truth: PathBuf,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// Scenarios (S1..S5, D2); all when omitted.
    #[arg(long, value_delimiter = ',')]
    suite: Vec<String>,
    #[arg(long, default_value_t = 20)]
    runs: usize,
    /// Parallel fits; defaults to the number of cores.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
    #[command(flatten)]
    train: TrainFlags,
}

fn parse_from_str<T: std::str::FromStr<Err = Error>>(s: &str) -> std::result::Result<T, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_solver(s: &str) -> std::result::Result<OtSolverKind, String> {
    match s {
        "exact" => Ok(OtSolverKind::Exact),
        "entropic" => Ok(OtSolverKind::Entropic),
        _ => Err(format!("unknown solver `{s}` (exact or entropic)")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (result, out, force) = match cli.command {
        Command::GenData(args) => {
            let (out, force) = (args.out.clone(), args.force);
            (gen_data(args), Some(out), force)
        }
        Command::Fit(args) => fit(args),
        Command::Evaluate(args) => (evaluate(&args), None, false),
        Command::Benchmark(args) => {
            let (out, force) = (args.out.clone(), args.force);
            (benchmark(args), Some(out), force)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Some(out) = out {
                match io::write_error_report(&out, force, &e) {
                    Ok(Some(path)) => eprintln!("wrote {}", path.display()),
                    Ok(None) => {}
                    Err(w) => eprintln!("could not write error report: {w}"),
                }
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn gen_data(args: GenDataArgs) -> Result<()> {
    let suites: Vec<Suite> = if args.scenario.is_empty() {
        Suite::ALL.to_vec()
    } else {
        args.scenario.iter().map(|s| s.parse()).collect::<Result<_>>()?
    };
    if args.out.exists() && !args.force {
        return Err(Error::Config(format!(
            "output directory {} already exists (use --force to replace it)",
            args.out.display()
        )));
    }
    std::fs::create_dir_all(&args.out).map_err(|e| Error::Io {
        path: args.out.display().to_string(),
        source: e,
    })?;
    for suite in suites {
        let data = suite.generate(args.seed)?;
        let generator = match suite {
            Suite::Dataset1(s) => {
                let p: Scenario1Params = s.params();
                json!({"family": "gaussian-mixture", "scenario": suite.name(), "samples": p.samples, "alpha": p.alpha, "noise": p.noise})
            }
            Suite::D2 => json!({"family": "redundant-mixture", "scenario": "D2", "samples": data.samples()}),
        };
        let name = suite.name().to_lowercase();
        io::write_features_csv(args.out.join(format!("{name}_features.csv")), &data)?;
        let truth = Truth::from_dataset(&data, generator, args.seed)?;
        io::write_json(args.out.join(format!("{name}_truth.json")), &truth)?;
        println!("{name}: {}x{}", data.samples(), data.features());
    }
    Ok(())
}

fn fit(args: FitArgs) -> (Result<()>, Option<PathBuf>, bool) {
    let flags = RunSettings {
        data: args.data,
        truth: args.truth,
        out: args.out.clone(),
        select: args.select.then_some(true),
        ..args.train.settings()
    };
    let config = match RunConfig::resolve(flags, args.train.config.as_deref()) {
        Ok(c) => c,
        Err(e) => return (Err(e), args.out, args.force),
    };
    let out = Some(config.out.clone());
    let result = io::run_fit(&config, args.force).map(|outcome| {
        let s = &outcome.selection;
        println!(
            "selected {} features at step {} (lambda {:.4}, GEMINI {:.4}): {}",
            s.active.len(),
            s.chosen_step,
            s.chosen_lambda,
            s.gemini,
            s.active.join(", ")
        );
        if let Some(m) = &outcome.metrics {
            println!("ari {:.4}  vser {:.4}  cvr {:.4}", m.ari, m.vser, m.cvr);
        }
    });
    (result, out, args.force)
}

fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let report = io::evaluate(&args.out, &args.truth)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn benchmark(args: BenchmarkArgs) -> Result<()> {
    let file = match &args.train.config {
        Some(p) => RunSettings::from_toml_file(p)?,
        None => RunSettings::default(),
    };
    let mut settings = args.train.settings().over(file);
    let suites: Vec<Suite> = if args.suite.is_empty() {
        Suite::ALL.to_vec()
    } else {
        args.suite.iter().map(|s| s.parse()).collect::<Result<_>>()?
    };
    let objectives: Vec<(Distance, Mode)> = BenchmarkConfig::all_objectives()
        .into_iter()
        .filter(|(d, m)| settings.gemini.is_none_or(|g| g == *d) && settings.mode.is_none_or(|x| x == *m))
        .collect();
    let seed = settings.seed.unwrap_or(0);
    // per-suite values; the placeholders only satisfy the resolver
    settings.data = Some(PathBuf::new());
    settings.out = Some(args.out.clone());
    settings.select = None;
    let base = RunConfig::from_settings(settings)?.path;
    let workers = args
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let config = BenchmarkConfig {
        suites,
        objectives,
        runs: args.runs,
        base,
        data_seed: seed,
        first_model_seed: seed,
        workers,
        out: args.out.clone(),
    };
    let summary = run_benchmark_with(&config, args.force, |c| {
        let status = match (&c.metrics, &c.error) {
            (Some(m), _) => format!("ari {:.3} vser {:.3} cvr {:.3} n_var {}", m.ari, m.vser, m.cvr, m.n_selected),
            (None, Some(e)) => format!("failed: {e}"),
            (None, None) => "failed".into(),
        };
        eprintln!("{} {:?}-{:?} run {}: {status} ({:.1}s)", c.scenario, c.gemini, c.mode, c.run, c.seconds);
    })?;
    for r in &summary {
        println!(
            "{:<3} {:?}-{:?} {:?}: ARI {:.3} ({:.3})  VSER {:.3} ({:.3})  CVR {:.3} ({:.3})  #Var {:.2} ({:.2})  failures {}/{}",
            r.scenario,
            r.gemini,
            r.mode,
            r.regime,
            r.ari_mean,
            r.ari_std,
            r.vser_mean,
            r.vser_std,
            r.cvr_mean,
            r.cvr_std,
            r.n_var_mean,
            r.n_var_std,
            r.failures,
            r.runs
        );
    }
    println!("wrote {}", Path::new(&args.out).join("benchmark_summary.csv").display());
    Ok(())
}
