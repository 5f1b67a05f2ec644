use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use superpac::active::NoopObserver;
use superpac::config::AffinitySource;
use superpac::data::load_labels;
use superpac::eval::misclassification_from_labels;
use superpac::theory::{run_cor1, run_thm1, Cor1Config, Thm1Config};
use superpac::{Error, RunConfig, Strategy};

#[derive(Parser)]
#[command(name = "superpac", version, about = "Active subspace clustering with pairwise constraints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an active clustering session against a simulated or replayed oracle.
    Active(ActiveArgs),
    /// Monte Carlo checks of the margin concentration results.
    Theory {
        #[command(subcommand)]
        kind: TheoryKind,
    },
    /// Misclassification rate of a label file against a truth file.
    Eval { labels: PathBuf, truth: PathBuf },
    /// Serve labeling sessions over HTTP.
    Serve {
        /// Listen address; defaults to $SUPERPAC_BIND or 127.0.0.1:8080.
        #[arg(long)]
        bind: Option<String>,
        /// Directory holding session event logs.
        #[arg(long, default_value = "sessions")]
        dir: PathBuf,
    },
}

#[derive(Args)]
struct ActiveArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    budget: Option<usize>,
    /// `tsc` or a path to an affinity matrix.
    #[arg(long)]
    affinity: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Args)]
struct TheoryArgs {
    /// JSON file with experiment parameters; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value = "theory_out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum TheoryKind {
    Thm1 {
        #[command(flatten)]
        common: TheoryArgs,
    },
    Cor1 {
        #[command(flatten)]
        common: TheoryArgs,
        #[arg(long)]
        phi1: Option<f64>,
        /// Target mean squared sine of the principal angles.
        #[arg(long)]
        s: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        sigma: Option<f64>,
    },
}

/// Exit code for a failed command: 3 for problems with the data, 2 otherwise.
fn exit_code(e: &Error) -> u8 {
    if e.is_data_error() {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Active(args) => cmd_active(args),
        Command::Theory { kind } => cmd_theory(kind),
        Command::Eval { labels, truth } => cmd_eval(&labels, &truth),
        Command::Serve { bind, dir } => cmd_serve(bind, dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn cmd_active(args: ActiveArgs) -> superpac::Result<()> {
    let mut config = match &args.config {
        Some(p) => RunConfig::read(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(s) = &args.strategy {
        config.strategy = s.parse::<Strategy>()?;
    }
    if let Some(b) = args.budget {
        config.max_queries = b;
    }
    if let Some(a) = args.affinity {
        config.affinity = AffinitySource::from(a);
    }
    if let Some(p) = args.preset {
        config.preset = Some(p);
    }
    if let Some(o) = args.out {
        config.out = Some(o);
    }
    if config.dataset.is_none() && config.preset.is_none() {
        return Err(Error::Config("no dataset: give --config with a dataset or --preset".into()));
    }
    let out = config.out.clone().unwrap_or_else(|| PathBuf::from("superpac_out"));
    let resolved = config.resolve()?;
    let mut oracle = resolved.oracle()?;
    let run = resolved.run(&mut oracle, &mut NoopObserver)?;
    let report = resolved.write_outputs(&run, &out)?;
    match report.final_error {
        Some(e) => println!(
            "{}: {} queries, {} certain sets, error {e:?}",
            report.strategy, report.queries_used, report.n_certain_sets
        ),
        None => println!(
            "{}: {} queries, {} certain sets",
            report.strategy, report.queries_used, report.n_certain_sets
        ),
    }
    Ok(())
}

fn read_params<T: DeserializeOwned + Default>(path: Option<&Path>) -> superpac::Result<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn write_summary(out: &Path, stem: &str, summary: &impl Serialize, csv: &str) -> superpac::Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let json_path = out.join(format!("{stem}.json"));
    let text = serde_json::to_string_pretty(summary)? + "\n";
    std::fs::write(&json_path, text).map_err(|e| Error::io(&json_path, e))?;
    let csv_path = out.join(format!("{stem}.csv"));
    std::fs::write(&csv_path, csv).map_err(|e| Error::io(&csv_path, e))?;
    Ok(())
}

fn cmd_theory(kind: TheoryKind) -> superpac::Result<()> {
    match kind {
        TheoryKind::Thm1 { common } => {
            let mut cfg: Thm1Config = read_params(common.config.as_deref())?;
            if let Some(s) = common.seed {
                cfg.seed = s;
            }
            if let Some(t) = common.trials {
                cfg.trials = t;
            }
            let summary = run_thm1(&cfg)?;
            write_summary(&common.out, "thm1", &summary, &summary.to_csv())?;
            for s in &summary.settings {
                println!(
                    "D={} eps={} coverage={:.4} violations={:.4}",
                    s.ambient_dim, s.epsilon, s.coverage, s.violation_rate
                );
            }
        }
        TheoryKind::Cor1 {
            common,
            phi1,
            s,
            delta,
            tau,
            sigma,
        } => {
            let mut cfg: Cor1Config = read_params(common.config.as_deref())?;
            if let Some(v) = common.seed {
                cfg.seed = v;
            }
            if let Some(v) = common.trials {
                cfg.trials = v;
            }
            if let Some(v) = phi1 {
                cfg.phi1 = v;
            }
            if let Some(v) = s {
                cfg.s = v;
            }
            if let Some(v) = delta {
                cfg.delta = v;
            }
            if let Some(v) = tau {
                cfg.tau = v;
            }
            if let Some(v) = sigma {
                cfg.sigma = v;
            }
            let summary = run_cor1(&cfg)?;
            write_summary(&common.out, "cor1", &summary, &summary.to_csv())?;
            println!(
                "frequency={:.4} distance_order_frequency={:.4} precondition_failed={}",
                summary.frequency, summary.distance_order_frequency, summary.precondition_failed
            );
        }
    }
    Ok(())
}

fn cmd_eval(labels: &Path, truth: &Path) -> superpac::Result<()> {
    let est = load_labels(labels)?;
    let t = load_labels(truth)?;
    let k_est = est.iter().max().map_or(0, |m| m + 1);
    let k_true = t.iter().max().map_or(0, |m| m + 1);
    let rate = misclassification_from_labels(&est, k_est, &t, k_true)?.rate();
    println!("{:?}", (rate * 1e6).round() / 1e6);
    Ok(())
}

fn cmd_serve(bind: Option<String>, dir: PathBuf) -> superpac::Result<()> {
    let addr = bind
        .or_else(|| std::env::var(superpac_server::BIND_ENV).ok())
        .unwrap_or_else(|| superpac_server::DEFAULT_BIND.to_string());
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Error::io(&dir, e))?;
    runtime
        .block_on(superpac_server::serve(&addr, dir.clone()))
        .map_err(|e| Error::io(&dir, e))
}
