//! Command-line front end: training, grid evaluation, checks and comparison.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use icgn::harness::{
    compare, default_contenders, eval_grid, export_report, run_checks, train_icgn, train_icnn, write_run,
    CheckOptions, Domain, Icnn1Spec, Icnn2Spec, ModelSpec, ReportPaths, TrainConfig, Trainable,
};
use icgn::integrator::{icgn_forward, ConvexGradientModel, Mode};
use icgn::models::{deserialize_model, Model, OneLayerMap};
use icgn::autodiff::Activation;
use icgn::numeric::RngStream;
use icgn::Error;

#[derive(Parser)]
#[command(name = "icgn", version, about = "Convex gradient networks: train, evaluate, check")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// JSON config; omitted fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum IcnnArch {
    Icnn1,
    Icnn2,
}

#[derive(Subcommand)]
enum Command {
    /// Train an ICGN on the target field.
    TrainIcgn {
        #[command(flatten)]
        run: RunArgs,
        /// Permit a deep hidden map, which loses the convexity guarantee.
        #[arg(long)]
        allow_unconstrained: bool,
    },
    /// Train an ICNN baseline on the target field.
    TrainIcnn {
        #[command(flatten)]
        run: RunArgs,
        /// Architecture used when no config is given.
        #[arg(long, value_enum, default_value = "icnn1")]
        arch: IcnnArch,
    },
    /// Evaluate a saved model on the error grid.
    EvalGrid {
        /// Saved `model.json`.
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 64)]
        resolution: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the verification suites on a saved or freshly initialised ICGN.
    Check {
        /// Saved ICGN `model.json`; a seeded default model when omitted.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train ICGN, ICNN1 and ICNN2 over several seeds and compare grid errors.
    Compare {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
        seeds: Vec<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Check(String),
    Diverged(String),
    Other(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Divergence { .. } => Failure::Diverged(e.to_string()),
            Error::InvalidInput(_) | Error::Parse(_) | Error::DimensionMismatch { .. } => Failure::Usage(e.to_string()),
            Error::Io { .. } => Failure::Other(e.to_string()),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn load_config(path: Option<&Path>, seed: Option<u64>, default_model: ModelSpec) -> Result<TrainConfig, Failure> {
    let mut cfg = match path {
        Some(p) => TrainConfig::from_json(&read(p)?).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?,
        None => TrainConfig::with_model(default_model),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Failure::Other(format!("{}: {e}", parent.display())))?;
    }
    std::fs::write(path, text).map_err(|e| Failure::Other(format!("{}: {e}", path.display())))
}

fn check_icgn(model: &ConvexGradientModel, seed: u64, points: usize) -> Result<icgn::harness::CheckReport, Failure> {
    let opts = CheckOptions {
        points,
        seed,
        ..CheckOptions::default()
    };
    Ok(run_checks(model, &opts)?)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::TrainIcgn { run, allow_unconstrained } => {
            let cfg = load_config(run.config.as_deref(), run.seed, ModelSpec::default())?;
            let out = run.out.unwrap_or_else(|| PathBuf::from("runs/icgn"));
            let outcome = train_icgn(&cfg, allow_unconstrained)?;
            write_run(&outcome, &out)?;
            if let Trainable::Icgn(m) = &outcome.model {
                let report = check_icgn(m, cfg.seed, 100)?;
                write(&out.join("check_report.json"), &report.to_json()?)?;
            }
            println!(
                "icgn: {} params, grid mean {:.6e}, max {:.6e} -> {}",
                outcome.metrics.param_count,
                outcome.metrics.final_grid_mean,
                outcome.metrics.final_grid_max,
                out.display()
            );
        }
        Command::TrainIcnn { run, arch } => {
            let default = match arch {
                IcnnArch::Icnn1 => ModelSpec::Icnn1(Icnn1Spec::default()),
                IcnnArch::Icnn2 => ModelSpec::Icnn2(Icnn2Spec::default()),
            };
            let cfg = load_config(run.config.as_deref(), run.seed, default)?;
            let out = run.out.unwrap_or_else(|| PathBuf::from(format!("runs/{}", cfg.model.name())));
            let outcome = train_icnn(&cfg)?;
            write_run(&outcome, &out)?;
            println!(
                "{}: {} params, grid mean {:.6e}, max {:.6e} -> {}",
                cfg.model.name(),
                outcome.metrics.param_count,
                outcome.metrics.final_grid_mean,
                outcome.metrics.final_grid_max,
                out.display()
            );
        }
        Command::EvalGrid { model, resolution, out } => {
            let loaded = deserialize_model(&read(&model)?).map_err(|e| Failure::Usage(format!("{}: {e}", model.display())))?;
            let domain = Domain::unit_square();
            let report = match &loaded {
                Model::Icgn(m) => eval_grid(|x| icgn_forward(m, x, Mode::Eval, None), resolution, &domain)?,
                Model::Icnn(m) => eval_grid(|x| m.grad_map(x), resolution, &domain)?,
                Model::Hidden(_) => {
                    return Err(Failure::Usage("eval-grid needs an icgn, icnn1 or icnn2 model".into()));
                }
            };
            let dir = out.unwrap_or_else(|| model.parent().map(Path::to_path_buf).unwrap_or_default());
            std::fs::create_dir_all(&dir).map_err(|e| Failure::Other(format!("{}: {e}", dir.display())))?;
            export_report(&report, &domain, &ReportPaths::in_dir(&dir))?;
            println!("grid {resolution}x{resolution}: mean {:.6e}, max {:.6e}", report.mean, report.max);
        }
        Command::Check { model, seed, points, out } => {
            let icgn_model = match &model {
                Some(p) => match deserialize_model(&read(p)?) {
                    Ok(Model::Icgn(m)) => m,
                    Ok(_) => return Err(Failure::Usage(format!("{}: check needs an icgn model", p.display()))),
                    Err(e) => return Err(Failure::Usage(format!("{}: {e}", p.display()))),
                },
                None => {
                    let map = OneLayerMap::init(2, 5, Activation::tanh(), &mut RngStream::new(seed));
                    ConvexGradientModel::with_defaults(map.into())
                }
            };
            let report = check_icgn(&icgn_model, seed, points)?;
            for s in &report.suites {
                let status = if s.skipped { "SKIP" } else if s.passed { "PASS" } else { "FAIL" };
                match s.stats {
                    Some(st) => println!(
                        "{status} {:<13} min {:.3e} median {:.3e} max {:.3e} (tolerance {:.1e})",
                        s.name, st.min, st.median, st.max, s.tolerance
                    ),
                    None => println!("{status} {}", s.name),
                }
            }
            let out = out.unwrap_or_else(|| PathBuf::from("."));
            write(&out.join("check_report.json"), &report.to_json()?)?;
            if !report.passed {
                let failed: Vec<&str> = report.suites.iter().filter(|s| !s.passed).map(|s| s.name.as_str()).collect();
                return Err(Failure::Check(format!("failed suites: {}", failed.join(", "))));
            }
        }
        Command::Compare { config, seeds, out } => {
            let base = load_config(config.as_deref(), None, ModelSpec::default())?;
            let out = out.unwrap_or_else(|| PathBuf::from("runs/compare"));
            let report = compare(&base, &default_contenders(), &seeds, Some(&out))?;
            write(&out.join("compare.json"), &report.to_json()?)?;
            for m in &report.models {
                println!("{:<6} {:>4} params  median grid mean {:.6e}", m.model, m.param_count, m.median_grid_mean);
            }
            println!("winner: {}", report.winner);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (code, msg) = match f {
                Failure::Usage(m) => (1, m),
                Failure::Check(m) => (2, m),
                Failure::Diverged(m) => (3, m),
                Failure::Other(m) => (1, m),
            };
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
