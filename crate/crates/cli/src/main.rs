use std::fs::File;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde_json::json;

use psido::certify::{run_config, RunOptions, Verdict, SYMBOL_GALLERY};
use psido::littlewood_paley::{besov_norm, holder_norm, holder_seminorm, HolderPlan};
use psido::metrics::{
    check_continuity, check_temperance, check_weight, hypoelliptic_gallery, metric_by_name, SamplePlan,
    GALLERY_NAMES, METRIC_NAMES,
};
use psido::torus::{sup_norm, GridFunction};

/// Hölder/Besov boundedness certification for pseudo-differential operators.
#[derive(Parser)]
#[command(name = "certify", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every experiment of a JSON config.
    Run {
        config: PathBuf,
        /// Artifact directory, overriding the config's `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
        /// Overrides the config's global seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// List named symbols, hypoelliptic models and metrics.
    Gallery {
        #[command(subcommand)]
        what: GalleryCommand,
    },
    /// Besov and Hölder norms of a grid function CSV (`j1..jn,re,im`).
    Norms {
        file: PathBuf,
        #[arg(long)]
        s: f64,
    },
    /// Continuity, temperance and weight scans for a named metric.
    Axioms {
        metric: String,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum GalleryCommand {
    List,
}

fn print_json(v: serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(&v)?);
    Ok(())
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Run { config, out, jobs, seed } => {
            let outcome = run_config(&config, &RunOptions { out, jobs, seed })
                .with_context(|| format!("running {}", config.display()))?;
            for r in &outcome.reports {
                println!(
                    "{:<24} {:<10} {:<16} slope {:+.4}  max {:.4}  {}",
                    r.experiment_id,
                    r.kind,
                    r.symbol,
                    r.slope,
                    r.max_ratio,
                    r.verdict.as_str()
                );
            }
            if let Some(dir) = &outcome.out_dir {
                println!("artifacts in {}", dir.display());
            }
            let growth = outcome.reports.iter().any(|r| r.verdict == Verdict::SuspectGrowth);
            Ok(if growth { 2 } else { 0 })
        }
        Command::Gallery { what: GalleryCommand::List } => {
            println!("symbols:");
            for g in SYMBOL_GALLERY {
                println!("  {:<18} {}", g.name, g.description);
            }
            println!("models:");
            for name in GALLERY_NAMES {
                let probe = name.replace("<n>", "2").replace("<delta>", "1");
                let m = hypoelliptic_gallery(&probe)?;
                println!("  {:<18} {}", name, m.operator);
            }
            println!("metrics:");
            for name in METRIC_NAMES {
                println!("  {name}");
            }
            Ok(0)
        }
        Command::Norms { file, s } => {
            let f = GridFunction::read_csv(File::open(&file).with_context(|| format!("opening {}", file.display()))?)?;
            let plan = HolderPlan::dyadic(f.grid().dim(), f.grid().points());
            print_json(json!({
                "file": file,
                "dim": f.grid().dim(),
                "points": f.grid().points(),
                "s": s,
                "sup": sup_norm(&f),
                "besov": besov_norm(&f, s),
                "holder_seminorm": holder_seminorm(&f, s, &plan),
                "holder": holder_norm(&f, s),
            }))?;
            Ok(0)
        }
        Command::Axioms { metric, samples, seed } => {
            let (g, m) = metric_by_name(&metric)?;
            let plan = SamplePlan::new(g.dim(), samples, seed);
            let reports = vec![check_continuity(&g, &plan)?, check_temperance(&g, &plan)?, check_weight(&m, &g, &plan)?];
            print_json(serde_json::to_value(&reports)?)?;
            Ok(if reports.iter().all(|r| r.pass) { 0 } else { 2 })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
