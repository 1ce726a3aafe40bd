//! `purity`: score concept representations and rerun the bundled
//! experiments.
//!
//! Exit codes: 0 on success, 1 when inputs fail validation, a metric
//! cannot be computed or an experiment check fails, 2 on usage errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use purity_core::data::{gen_correlated_concepts, gen_impure_reps, gen_pure_reps, gen_tabular_toy};
use purity_core::experiments::{run_experiment, Experiment};
use purity_core::io::{load_tables, write_concepts, write_features, write_labels, write_reps};
use purity_core::report::{score, write_score_outputs, ScoreConfig};
use purity_core::{NicheConfig, ProbeConfig};

#[derive(Parser)]
#[command(name = "purity", version, about = "Oracle and niche impurity scores for concept representations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score a representation table against a concept table.
    ///
    /// Concepts: CSV with header c_1,...,c_k and 0/1 cells. Representations:
    /// CSV with header r_<i>_<j> (concept i, dimension j, 1-based,
    /// concept-major), one row per sample.
    Score(ScoreArgs),
    /// Run a bundled experiment and write its report, rows and checks.
    Run(RunArgs),
    /// Write a synthetic dataset as CSV tables.
    Generate {
        #[command(subcommand)]
        kind: Generate,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    concepts: PathBuf,
    #[arg(long)]
    reps: PathBuf,
    /// Optional task labels, one integer per line.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Match representations to concepts before scoring.
    #[arg(long)]
    align: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Probes train on all but one of this many folds.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(2..))]
    folds: u32,
    /// Comma-separated, ascending, from 0 to 1.
    #[arg(long, value_delimiter = ',')]
    beta_grid: Option<Vec<f64>>,
    /// Hidden widths of the purity probe.
    #[arg(long, value_delimiter = ',', default_value = "32")]
    probe_hidden: Vec<usize>,
    /// Hidden widths of the niche classifier.
    #[arg(long, value_delimiter = ',', default_value = "20,20")]
    niche_hidden: Vec<usize>,
    /// Skip MIG and SAP.
    #[arg(long)]
    no_baselines: bool,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct RunArgs {
    #[arg(value_parser = parse_experiment)]
    experiment: Experiment,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',', required = true)]
    seeds: Vec<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Generate {
    /// Correlated binary concepts with pure and impure soft representations.
    Correlated {
        #[arg(long, default_value_t = 3000)]
        n: usize,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 0.25)]
        offdiag: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// TabularToy features, concepts and labels.
    Tabular {
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        #[arg(long, default_value_t = 3000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_experiment(s: &str) -> Result<Experiment, String> {
    s.parse().map_err(|_| {
        let names: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
        format!("expected one of: {}", names.join(", "))
    })
}

enum Failure {
    Usage(String),
    Invalid(String),
}

impl From<purity_core::Error> for Failure {
    fn from(e: purity_core::Error) -> Self {
        Failure::Invalid(e.to_string())
    }
}

fn run_score(args: ScoreArgs) -> Result<(), Failure> {
    let mut niche = NicheConfig::default();
    if let Some(grid) = args.beta_grid {
        niche.beta_grid = grid;
        niche.validate().map_err(|e| Failure::Usage(format!("--beta-grid: {e}")))?;
    }
    let train_fraction = 1.0 - 1.0 / f64::from(args.folds);
    niche.classifier = ProbeConfig {
        train_fraction,
        ..niche.classifier.with_hidden(args.niche_hidden)
    };
    let cfg = ScoreConfig {
        seed: args.seed,
        probe: ProbeConfig {
            train_fraction,
            ..ProbeConfig::purity_probe().with_hidden(args.probe_hidden)
        },
        niche,
        align: args.align,
        baselines: !args.no_baselines,
    };

    let (concepts, reps) = load_tables(&args.concepts, &args.reps, args.labels.as_deref(), None)?;
    let inputs = json!({
        "concepts": args.concepts.display().to_string(),
        "reps": args.reps.display().to_string(),
        "labels": args.labels.as_ref().map(|p| p.display().to_string()),
    });
    let scored = score(&reps, &concepts, &cfg, "purity_matrix.csv", inputs)?;
    let path = write_score_outputs(&args.out, &scored, matches!(args.format, Format::Csv))?;

    let r = &scored.report;
    println!("OIS {:.4}", r.ois);
    println!("NIS {:.4}", r.nis);
    if let Some(b) = &r.baselines {
        println!("MIG {:.4}", b.mig);
        println!("SAP {:.4}", b.sap);
    }
    if let Some(a) = &r.alignment {
        println!("alignment {a:?}");
    }
    println!("report written to {}", path.display());
    Ok(())
}

fn run_run(args: RunArgs) -> Result<(), Failure> {
    if args.seeds.is_empty() {
        return Err(Failure::Usage("--seeds needs at least one seed".into()));
    }
    let (report, outputs) = run_experiment(args.experiment, &args.seeds, &args.out)?;
    for check in &report.checks {
        let status = if check.passed { "PASS" } else { "FAIL" };
        println!("{status} {} ({})", check.criterion, check.observed);
    }
    println!("report written to {}", outputs.report.display());
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Invalid(format!("{} check(s) failed", report.checks.iter().filter(|c| !c.passed).count())))
    }
}

fn run_generate(kind: Generate) -> Result<(), Failure> {
    let written: Vec<PathBuf> = match kind {
        Generate::Correlated { n, k, offdiag, seed, out } => {
            let data = gen_correlated_concepts(n, k, offdiag, seed)?;
            let paths = files(&out, &["concepts.csv", "pure_reps.csv", "impure_reps.csv"]);
            write_concepts(&paths[0], &data)?;
            write_reps(&paths[1], &gen_pure_reps(&data, seed)?)?;
            write_reps(&paths[2], &gen_impure_reps(&data, seed)?)?;
            paths
        }
        Generate::Tabular { delta, n, seed, out } => {
            let data = gen_tabular_toy(delta, n, seed)?;
            let paths = files(&out, &["concepts.csv", "features.csv", "labels.csv"]);
            write_concepts(&paths[0], &data)?;
            write_features(&paths[1], data.features().expect("generated features"))?;
            write_labels(&paths[2], data.labels().expect("generated labels"))?;
            paths
        }
    };
    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}

fn files(dir: &Path, names: &[&str]) -> Vec<PathBuf> {
    names.iter().map(|n| dir.join(n)).collect()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Score(args) => run_score(args),
        Command::Run(args) => run_run(args),
        Command::Generate { kind } => run_generate(kind),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
