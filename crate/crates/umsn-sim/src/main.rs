//! `umsn` — run, sweep, and validate acoustic-tracking scenarios.
//!
//! Configuration errors print as a JSON list of violations and exit
//! nonzero. Log verbosity is controlled by `RUST_LOG`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use umsn_sim::config::{ConfigError, ScenarioConfig};
use umsn_sim::engine::run_scenario;
use umsn_sim::sweep::horizon_sweep;

#[derive(Parser)]
#[command(name = "umsn", about = "Cooperative underwater acoustic target tracking simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its CSV log and JSON summary.
    Run {
        /// Scenario TOML file.
        config: PathBuf,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for the log and summary.
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// Re-run a scenario across planning horizons and seeds.
    Sweep {
        /// Scenario TOML file.
        config: PathBuf,
        /// Horizons to evaluate, e.g. 1,2,3,4.
        #[arg(long, value_delimiter = ',', required = true)]
        horizons: Vec<usize>,
        /// Seeds per horizon (base seed comes from the config).
        #[arg(long, default_value_t = 10)]
        seeds: usize,
        /// Output directory for the sweep table.
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// Check a scenario file and report every violated invariant.
    Validate {
        /// Scenario TOML file.
        config: PathBuf,
    },
}

fn fail(err: &ConfigError) -> ExitCode {
    let json = serde_json::to_string_pretty(&err.violations).expect("strings serialize");
    println!("{json}");
    ExitCode::from(2)
}

fn io_fail(what: &str, err: std::io::Error) -> ExitCode {
    eprintln!("{what}: {err}");
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();

    match cli.command {
        Command::Run { config, seed, out } => {
            let mut cfg = match ScenarioConfig::load(&config) {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let log = match run_scenario(&cfg) {
                Ok(l) => l,
                Err(e) => return fail(&e),
            };
            if let Err(e) = std::fs::create_dir_all(&out) {
                return io_fail("cannot create output directory", e);
            }
            let stem = format!("{}-seed{}", log.scenario, log.seed);
            let csv_path = out.join(format!("{stem}.csv"));
            let json_path = out.join(format!("{stem}.summary.json"));
            if let Err(e) = std::fs::write(&csv_path, log.to_csv()) {
                return io_fail("cannot write CSV log", e);
            }
            let summary =
                serde_json::to_string_pretty(&log.summary()).expect("summary serializes");
            if let Err(e) = std::fs::write(&json_path, summary) {
                return io_fail("cannot write summary", e);
            }
            println!("wrote {} and {}", csv_path.display(), json_path.display());
            ExitCode::SUCCESS
        }
        Command::Sweep {
            config,
            horizons,
            seeds,
            out,
        } => {
            let cfg = match ScenarioConfig::load(&config) {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            let rows = match horizon_sweep(&cfg, &horizons, seeds) {
                Ok(r) => r,
                Err(e) => return fail(&e),
            };
            println!("horizon,mean_error");
            for row in &rows {
                println!("{},{}", row.horizon, row.mean_error);
            }
            if let Err(e) = std::fs::create_dir_all(&out) {
                return io_fail("cannot create output directory", e);
            }
            let path = out.join(format!("{}-sweep.csv", cfg.name));
            let mut table = String::from("horizon,seed,error\n");
            for row in &rows {
                for (s, e) in row.per_seed.iter().enumerate() {
                    table.push_str(&format!("{},{},{}\n", row.horizon, cfg.seed + s as u64, e));
                }
            }
            if let Err(e) = std::fs::write(&path, table) {
                return io_fail("cannot write sweep table", e);
            }
            println!("wrote {}", path.display());
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match ScenarioConfig::load(&config) {
            Ok(cfg) => match cfg.resolve() {
                Ok(resolved) => {
                    println!(
                        "ok: {} agents, {} rounds of {} s",
                        resolved.tdma.slots(),
                        (resolved.duration / resolved.tdma.round_duration()).round(),
                        resolved.tdma.round_duration()
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            },
            Err(e) => fail(&e),
        },
    }
}
