//! `pilotlab` command line: distance metrics, single points, sweeps and BER floors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use pilotlab::estimator::Method;
use pilotlab::grid::PatternKind;
use pilotlab::harness::{ber_floor, load_config, run_experiment, write_results, ExperimentConfig, ExperimentResult};
use pilotlab::metrics::{metrics_csv, metrics_table, metrics_text_table, DEFAULT_RESOLUTION};
use pilotlab::{Error, Result};

#[derive(Parser)]
#[command(name = "pilotlab", version, about = "OFDM pilot pattern and channel estimation experiments")]
struct Cli {
    /// Worker threads (default: one per core).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Nearest-pilot distance metrics of every pattern kind.
    Metrics {
        /// Pilots per unit regularized area (default: one per hexagon of unit edge).
        #[arg(long)]
        density: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
        resolution: usize,
        /// Rotate each lattice by its table rotation first.
        #[arg(long)]
        rotated: bool,
        #[arg(long, value_delimiter = ',')]
        pattern: Vec<PatternKind>,
        /// Directory for metrics.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One (pattern, method, snr) point.
    Simulate(RunArgs),
    /// Every point of the configuration.
    Sweep(RunArgs),
    /// Noise-free BER for each pattern/method pair.
    Floor(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment file (default: the shipped simulation table).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default: the config's `output`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pattern: Vec<PatternKind>,
    #[arg(long, value_delimiter = ',')]
    method: Vec<Method>,
    /// SNR list in dB, `inf` for noise-free.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    snr: Vec<f64>,
}

impl RunArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => load_config(path)?,
            None => ExperimentConfig::shipped_default(),
        };
        if let Some(s) = self.seeds {
            cfg.seeds = s;
        }
        if !self.pattern.is_empty() {
            cfg.patterns = self.pattern.clone();
        }
        if !self.method.is_empty() {
            cfg.methods = self.method.clone();
        }
        if !self.snr.is_empty() {
            cfg.snr_db = self.snr.clone();
        }
        if let Some(out) = &self.out {
            cfg.output = out.clone();
        }
        cfg.validated()
    }
}

fn print_rows(result: &ExperimentResult) {
    println!(
        "{:<14} {:<17} {:>7} {:>11} {:>11} {:>11} {:>11} {:>10}",
        "pattern", "method", "snr_db", "ber_total", "ber_floor", "ber_noise", "mse", "ci"
    );
    for r in &result.rows {
        println!(
            "{:<14} {:<17} {:>7} {:>11.4e} {:>11.4e} {:>11.4e} {:>11.4e} {:>10.2e}{}",
            r.pattern.name(),
            r.method.name(),
            r.snr_db,
            r.ber_total,
            r.ber_floor,
            r.ber_noise,
            r.mse,
            r.ci_halfwidth,
            if r.low_confidence() { "  (low confidence)" } else { "" }
        );
    }
    for s in &result.skipped {
        println!("skipped {}/{}: {}", s.pattern, s.method, s.reason);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Metrics { density, resolution, rotated, pattern, out } => {
            let density = density.unwrap_or(4.0 / (3.0 * 3f64.sqrt()));
            let kinds = if pattern.is_empty() { PatternKind::ALL.to_vec() } else { pattern };
            let rows = metrics_table(&kinds, density, rotated, resolution)?;
            print!("{}", metrics_text_table(&rows));
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                std::fs::write(dir.join("metrics.csv"), metrics_csv(&rows))?;
            }
        }
        Command::Simulate(args) => {
            let cfg = args.config()?;
            if cfg.patterns.len() != 1 || cfg.methods.len() != 1 || cfg.snr_db.len() != 1 {
                return Err(Error::InvalidArgument(
                    "simulate needs exactly one --pattern, --method and --snr".into(),
                ));
            }
            let result = run_experiment(&cfg, cli.workers)?;
            if let Some(s) = result.skipped.first() {
                return Err(Error::Config(format!("{}/{}: {}", s.pattern, s.method, s.reason)));
            }
            print_rows(&result);
            if args.out.is_some() {
                write_results(&result, &cfg.output)?;
            }
        }
        Command::Sweep(args) => {
            let cfg = args.config()?;
            let result = run_experiment(&cfg, cli.workers)?;
            print_rows(&result);
            for p in write_results(&result, &cfg.output)? {
                info!("wrote {}", p.display());
            }
        }
        Command::Floor(args) => {
            let cfg = args.config()?;
            println!("{:<14} {:<17} {:>11} {:>10} {:>12}", "pattern", "method", "ber_floor", "ci", "bits");
            for &p in &cfg.patterns {
                for &m in &cfg.methods {
                    match ber_floor(&cfg, p, m, cfg.seeds, cli.workers) {
                        Ok(f) => println!(
                            "{:<14} {:<17} {:>11.4e} {:>10.2e} {:>12}",
                            p.name(),
                            m.name(),
                            f.ber,
                            f.ci_halfwidth,
                            f.bits
                        ),
                        Err(Error::Config(reason)) => println!("skipped {p}/{m}: {reason}"),
                        Err(e) => return Err(e),
                    }
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pilotlab: {}", e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
