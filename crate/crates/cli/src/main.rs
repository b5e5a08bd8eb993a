use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use limitset::acceptance::{self, diff_expected, CriterionResult, EXPECTED};
use limitset::experiment::{output_dir, run, ExperimentConfig, Kind, OUT_ENV};
use rayon::prelude::*;

#[derive(Parser)]
#[command(name = "limitset", version, about = "Quasi-radial trees and limit-set dimension experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Flat key=value config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = OUT_ENV)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long = "budget-nodes", global = true)]
    budget_nodes: Option<usize>,
    /// Floyd parameter.
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// Extra key=value overrides.
    #[arg(long = "set", global = true)]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    Cogrowth,
    Arcs,
    Qrtree,
    Nonconical,
    Myrberg,
    Floyd,
    Dimension,
    /// Runs the acceptance suite.
    Verify {
        /// Comma-separated criterion numbers.
        #[arg(long, value_delimiter = ',')]
        only: Vec<usize>,
        /// Expected-values file replacing the built-in one.
        #[arg(long)]
        expected: Option<PathBuf>,
    },
}

fn kind(c: &Command) -> Option<Kind> {
    Some(match c {
        Command::Cogrowth => Kind::Cogrowth,
        Command::Arcs => Kind::Arcs,
        Command::Qrtree => Kind::Qrtree,
        Command::Nonconical => Kind::Nonconical,
        Command::Myrberg => Kind::Myrberg,
        Command::Floyd => Kind::Floyd,
        Command::Dimension => Kind::Dimension,
        Command::Verify { .. } => return None,
    })
}

fn experiment(kind: Kind, common: &Common) -> Result<(), String> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::parse(&fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?).map_err(|e| e.to_string())?,
        None => ExperimentConfig::new(kind),
    };
    if cfg.kind != kind {
        return Err(format!("config is for {}, not {kind}", cfg.kind));
    }
    if let Some(n) = common.budget_nodes {
        cfg.set("budget_nodes", &n.to_string()).map_err(|e| e.to_string())?;
    }
    if let Some(l) = common.lambda {
        cfg.set("lambda", &l.to_string()).map_err(|e| e.to_string())?;
    }
    for kv in &common.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| format!("--set expects key=value, got `{kv}`"))?;
        cfg.set(k, v).map_err(|e| e.to_string())?;
    }
    let dir = output_dir(common.out.as_deref());
    let record = run(&cfg, Some(&dir)).map_err(|e| e.to_string())?;
    println!("{}", serde_json::to_string_pretty(&record).map_err(|e| e.to_string())?);
    Ok(())
}

fn verify(only: &[usize], expected: Option<&PathBuf>) -> Result<bool, String> {
    let text = match expected {
        Some(p) => fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?,
        None => EXPECTED.to_string(),
    };
    let ids: Vec<usize> = (1..=9).filter(|i| only.is_empty() || only.contains(i)).collect();
    let results: Vec<CriterionResult> = ids.par_iter().filter_map(|&i| acceptance::criterion(i)).collect();
    for r in &results {
        println!("{}", r.line());
    }
    let diff = diff_expected(&results, &text);
    for d in &diff {
        println!("expected-value mismatch:\n{d}");
    }
    let failures = results.iter().filter(|r| !r.passed).count();
    println!("{}/{} criteria passed", results.len() - failures, results.len());
    Ok(failures == 0 && diff.is_empty())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let outcome = match &cli.command {
        Command::Verify { only, expected } => verify(only, expected.as_ref()),
        c => experiment(kind(c).unwrap(), &cli.common).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
