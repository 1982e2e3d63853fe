use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use htwave::experiment::{run_experiment, sparsity_diagnostics, ExperimentConfig};
use htwave::ops::RhsKind;
use htwave::reduce::{GrowthSequence, SortMode};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "htwave", about = "Adaptive low-rank solver experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment from a config file or from flags.
    Run {
        #[arg(long, conflicts_with_all = ["d", "rhs", "tau", "eps", "out"])]
        config: Option<PathBuf>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long, value_parser = ["rank1", "series"])]
        rhs: Option<String>,
        #[arg(long, default_value_t = 0.5)]
        tau: f64,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Stream one JSON line per inner step to stdout.
        #[arg(long)]
        progress_json: bool,
        /// Use binary binning instead of exact sorting.
        #[arg(long)]
        binning: bool,
        /// Allow dimensions above 32.
        #[arg(long)]
        long: bool,
    },
    /// Sparsity diagnostics of a stored representation.
    Diag {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        s: f64,
        #[arg(long, default_value_t = 1.0)]
        gamma_d: f64,
        #[arg(long, default_value_t = 1.0)]
        gamma_b: f64,
    },
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Run { config, d, rhs, tau, eps, out, progress_json, binning, long } => {
            let mut cfg = match config {
                Some(path) => {
                    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                    serde_json::from_str::<ExperimentConfig>(&text).with_context(|| format!("parsing {}", path.display()))?
                }
                None => {
                    let (Some(d), Some(rhs), Some(eps)) = (d, rhs, eps) else {
                        bail!("run needs --config or all of --d, --rhs, --eps");
                    };
                    let kind = if rhs == "rank1" { RhsKind::Rank1 } else { RhsKind::Series };
                    ExperimentConfig { tau, out_dir: out, ..ExperimentConfig::new(d, kind, eps) }
                }
            };
            if binning {
                cfg.sort = SortMode::BinaryBinning;
            }
            cfg.long |= long;
            let mut stdout = std::io::stdout();
            let rec = run_experiment(&cfg, if progress_json { Some(&mut stdout) } else { None })?;
            let s = &rec.summary;
            eprintln!(
                "{:?}: bound {:.3e}, {} inner steps, {} ops, max rank {}, files in {}",
                s.termination,
                s.final_bound,
                s.inner_steps,
                s.total_ops,
                s.ranks.iter().skip(1).max().unwrap_or(&0),
                cfg.out_dir.display()
            );
        }
        Cmd::Diag { input, s, gamma_d, gamma_b } => {
            let v = htwave::io::read(&input)?;
            let report = sparsity_diagnostics(&v, s, GrowthSequence::new(gamma_d, gamma_b)?)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
    }
    Ok(())
}
