use std::path::PathBuf;
use std::process::ExitCode;
use std::thread;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use pdslab::experiment::{self, Command, ExperimentConfig, Plan, SweepReport};
use pdslab::zoo;

/// Invariant measures of small-noise dynamical systems.
#[derive(Parser)]
#[command(name = "pdslab", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// List the bundled models.
    ListModels,
    /// Find and classify fixed points.
    FixedPoints(RunArgs),
    /// Estimate invariant measures over the gamma grid.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Also write sweep.svg.
        #[arg(long)]
        svg: bool,
    },
    /// Second-order expansion diagnostic of the test function.
    Expansion(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (JSON).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory; overrides `out_dir` from the config.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
}

impl RunArgs {
    fn load(&self, command: Command) -> Result<(Plan, PathBuf, usize)> {
        let cfg = ExperimentConfig::load(&self.config)
            .with_context(|| format!("reading config {}", self.config.display()))?;
        let plan = cfg.resolve(command).context("invalid config")?;
        let out = self.out.clone().or_else(|| cfg.out_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
        let workers = self.workers.unwrap_or_else(|| thread::available_parallelism().map_or(1, |n| n.get()));
        Ok((plan, out, workers))
    }
}

fn list_models() {
    println!("{:<20} {:>3} {:>4}  {:<10} summary", "name", "dim", "fps", "provenance");
    for card in zoo::registry() {
        let provenance = if card.extension { "extension" } else { "classical" };
        println!(
            "{:<20} {:>3} {:>4}  {:<10} {}",
            card.name,
            card.dim,
            card.known_fixed_points.len(),
            provenance,
            card.summary
        );
    }
}

fn fmt_point(x: &[f64]) -> String {
    let parts: Vec<String> = x.iter().map(|v| format!("{v:.6}")).collect();
    format!("({})", parts.join(", "))
}

fn fixed_points(args: &RunArgs) -> Result<bool> {
    let (plan, out, workers) = args.load(Command::FixedPoints)?;
    let rows = experiment::run_fixed_points(&plan, workers)?;
    println!("{:<28} {:>10} {:<18} {:>10} {:>4} {:>10} {:<9}", "location", "residual", "class", "gap", "dim", "excite", "stability");
    for r in &rows {
        println!(
            "{:<28} {:>10.2e} {:<18} {:>10.4} {:>4} {:>10.4} {:<9}",
            fmt_point(&r.location),
            r.residual,
            r.classification.map_or("-", |c| c.as_str()),
            r.saddle_gap,
            r.unstable_dim.map_or("-".into(), |k| k.to_string()),
            r.excitation.map_or(f64::NAN, |e| e.estimate),
            r.stability.map_or("-", |s| s.as_str()),
        );
        if !r.note.is_empty() {
            println!("    note: {}", r.note);
        }
    }
    experiment::write_fixed_point_outputs(&out, &plan, &rows)?;
    println!("wrote {}", out.join("fixed_points.csv").display());
    Ok(true)
}

fn print_verdicts(report: &SweepReport) -> bool {
    for v in &report.verdicts {
        println!("{} {}: {}", if v.passed { "PASS" } else { "FAIL" }, v.claim, v.detail);
    }
    report.passed()
}

fn sweep(args: &RunArgs, svg: bool) -> Result<bool> {
    let (plan, out, workers) = args.load(Command::Sweep)?;
    let report = experiment::run_sweep(&plan, workers)?;
    for r in &report.rows {
        let masses: Vec<String> = r.masses.iter().map(|m| format!("{m:.4}")).collect();
        match &r.error {
            Some(e) => println!("gamma {:<8} failed: {e}", r.gamma),
            None => println!("gamma {:<8} masses [{}] total {:.4}", r.gamma, masses.join(", "), r.total_mass),
        }
    }
    experiment::write_sweep_outputs(&out, &plan, &report, svg)?;
    println!("wrote {}", out.join("sweep.csv").display());
    Ok(print_verdicts(&report))
}

fn expansion(args: &RunArgs) -> Result<bool> {
    let (plan, out, workers) = args.load(Command::Expansion)?;
    let report = experiment::run_expansion(&plan, workers).context("building the test function")?;
    for r in &report.rows {
        match (&r.expansion, &r.error) {
            (Some(e), _) => println!(
                "gamma {:<8} lhs {:.6} rhs {:.6} ratio {:.4} se {:.2e}",
                r.gamma, e.lhs, e.rhs, e.ratio, e.se
            ),
            (None, Some(e)) => println!("gamma {:<8} failed: {e}", r.gamma),
            (None, None) => println!("gamma {:<8} -", r.gamma),
        }
    }
    experiment::write_expansion_outputs(&out, &plan, &report)?;
    println!("wrote {}", out.join("expansion.csv").display());
    Ok(print_verdicts(&report))
}

fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Cmd::ListModels => {
            list_models();
            Ok(true)
        }
        Cmd::FixedPoints(a) => fixed_points(a),
        Cmd::Sweep { run, svg } => sweep(run, *svg),
        Cmd::Expansion(a) => expansion(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
