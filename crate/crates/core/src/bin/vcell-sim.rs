use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use vcell::harness::{
    run_experiment, ClusteringKind, ExperimentConfig, HarnessError, OutputPaths, Scheme,
};
use vcell::{Affiliation, EvalMode};

#[derive(Parser)]
#[command(name = "vcell-sim", version, about = "Virtual-cell uplink Monte Carlo simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write raw and aggregate CSV.
    Run(RunArgs),
    /// Check a configuration file and print the resolved experiment.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AffiliationArg {
    Closest,
    #[value(alias = "best-channel")]
    Best,
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalArg {
    Global,
    Local,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Continuous,
    Uc,
    Bsc,
    Msrm,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClusteringArg {
    Hierarchical,
    Kmeans,
    Spectral,
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    cells: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    scheme: Option<Vec<SchemeArg>>,
    #[arg(long, value_delimiter = ',')]
    affiliation: Option<Vec<AffiliationArg>>,
    #[arg(long, value_delimiter = ',')]
    clustering: Option<Vec<ClusteringArg>>,
    #[arg(long, value_delimiter = ',')]
    sigma: Option<Vec<f64>>,
    #[arg(long)]
    eval: Option<EvalArg>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    agg: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn load(path: &PathBuf) -> Result<ExperimentConfig, HarnessError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| HarnessError::Io { path: path.display().to_string(), source })?;
    let cfg = ExperimentConfig::from_json(&text)?;
    Ok(cfg)
}

fn apply(cfg: &mut ExperimentConfig, args: &RunArgs) {
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(s) = args.seed {
        cfg.master_seed = s;
    }
    if let Some(c) = &args.cells {
        cfg.cell_counts = c.clone();
    }
    if let Some(s) = &args.scheme {
        cfg.schemes = s
            .iter()
            .map(|s| match s {
                SchemeArg::Continuous => Scheme::Continuous,
                SchemeArg::Uc => Scheme::Uc,
                SchemeArg::Bsc => Scheme::Bsc,
                SchemeArg::Msrm => Scheme::Msrm,
            })
            .collect();
    }
    if let Some(a) = &args.affiliation {
        cfg.affiliations = a
            .iter()
            .map(|a| match a {
                AffiliationArg::Closest => Affiliation::Closest,
                AffiliationArg::Best => Affiliation::BestChannel,
            })
            .collect();
    }
    if let Some(c) = &args.clustering {
        cfg.clusterings = c
            .iter()
            .map(|c| match c {
                ClusteringArg::Hierarchical => ClusteringKind::Hierarchical,
                ClusteringArg::Kmeans => ClusteringKind::Kmeans,
                ClusteringArg::Spectral => ClusteringKind::Spectral,
            })
            .collect();
    }
    if let Some(s) = &args.sigma {
        cfg.sigmas = s.clone();
    }
    if let Some(e) = args.eval {
        cfg.eval_mode = match e {
            EvalArg::Global => EvalMode::Global,
            EvalArg::Local => EvalMode::Local,
        };
    }
    if let Some(t) = args.threads {
        cfg.threads = t;
    }
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Validate { config } => {
            let cfg = load(&config)?;
            cfg.validate()?;
            println!("{}", serde_json::to_string_pretty(&cfg).expect("config serializes"));
        }
        Command::Run(args) => {
            let mut cfg = load(&args.config)?;
            apply(&mut cfg, &args);
            let out = OutputPaths { raw: args.out.as_deref(), aggregate: args.agg.as_deref() };
            let res = run_experiment(&cfg, &out)?;
            let failures: usize = res.trials.iter().map(|t| t.failures.len()).sum();
            eprintln!(
                "{} trials, {} configurations, {} failed combinations",
                res.trials.len(),
                res.aggregate.len(),
                failures
            );
            if args.agg.is_none() {
                for a in &res.aggregate {
                    println!(
                        "{:<12} {:>8} {:<12} {:<10} m={:<2} {:<6} mean={:.6e} se={:.3e}",
                        a.key.clustering.as_str(),
                        a.key.sigma.map(|s| format!("{s}")).unwrap_or_default(),
                        a.key.affiliation.as_str(),
                        a.key.scheme.as_str(),
                        a.key.num_cells,
                        a.key.eval_mode.as_str(),
                        a.summary.mean,
                        a.summary.stderr
                    );
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
