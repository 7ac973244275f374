//! Command-line experiment runner.

use clap::{Args, Parser, Subcommand};
use lilora::analysis::MatrixKind;
use lilora::cli::{cmd_analyze, cmd_pretrain, cmd_run, AnalyzeOptions, ExperimentConfig};
use lilora::error::{Error, Result};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "lilora",
    version,
    about = "Desk-scale continual-learning laboratory for shared-basis low-rank adapters"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate the task suite and pretrain the frozen backbone
    Pretrain(RunArgs),
    /// Train every configured strategy over the shared suite and write the report
    Run(RunArgs),
    /// Emit heatmap, fusion, and efficiency CSVs from a finished run
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration file; defaults to the chosen preset
    #[arg(long)]
    config: Option<PathBuf>,

    /// Built-in preset used when no config file is given: desk | paper
    #[arg(long, default_value = "desk")]
    preset: String,

    /// Master seed override
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory override
    #[arg(long)]
    out: Option<String>,

    /// Comma-separated strategy tags override
    #[arg(long)]
    strategies: Option<String>,

    /// Force the sequential reference execution. Execution is always
    /// sequential in this implementation; the flag is accepted so scripted
    /// invocations can state the requirement explicitly.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Run directory produced by `lilora run`
    #[arg(long)]
    run: PathBuf,

    /// Comma-separated heatmap kinds to require: a, b, residual.
    /// Default: everything the run's strategies provide.
    #[arg(long)]
    kinds: Option<String>,
}

fn resolve_config(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::preset(&args.preset)?,
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    if let Some(strategies) = &args.strategies {
        cfg.strategies = strategies
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_kinds(spec: &str) -> Result<Vec<MatrixKind>> {
    spec.split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| match s {
            "a" => Ok(MatrixKind::A),
            "b" => Ok(MatrixKind::B),
            "residual" => Ok(MatrixKind::Residual),
            other => Err(Error::Config(format!(
                "unknown heatmap kind '{other}' (expected a, b, or residual)"
            ))),
        })
        .collect()
}

fn real_main() -> Result<()> {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Pretrain(args) => {
            let cfg = resolve_config(&args)?;
            let base_accuracy = cmd_pretrain(&cfg)?;
            println!(
                "pretrained backbone written to {} (base accuracy {:.2}%)",
                cfg.out_dir,
                100.0 * base_accuracy
            );
        }
        Cmd::Run(args) => {
            let cfg = resolve_config(&args)?;
            let report = cmd_run(&cfg)?;
            println!("report written to {}", cfg.out_dir);
            for section in &report.sections {
                println!(
                    "  {:<24} AP {:6.2}  MAP {:6.2}  BWT {:+6.2}  MIF {:6.2}",
                    section.label,
                    section.final_ap,
                    section.final_map,
                    section.final_bwt,
                    section.final_mif
                );
            }
        }
        Cmd::Analyze(args) => {
            let opts = AnalyzeOptions {
                kinds: args.kinds.as_deref().map(parse_kinds).transpose()?,
            };
            let manifest = cmd_analyze(&args.run, &opts)?;
            println!("wrote {} files to {}:", manifest.len(), args.run.display());
            for name in &manifest {
                println!("  {name}");
            }
        }
    }
    Ok(())
}

fn main() {
    match real_main() {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
