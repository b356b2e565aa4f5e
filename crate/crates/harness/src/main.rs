use std::path::PathBuf;
use std::process::ExitCode;

use caden_harness::config::ExperimentConfig;
use caden_harness::run::{describe, run_experiment};
use caden_harness::sweep::sweep;
use caden_harness::verify::{run_and_write, Suite};
use caden_harness::{HarnessError, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "caden", version, about = "Decentralized primal-dual optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Overrides the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for CSV and JSON outputs.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Extra `key=value` overrides applied after the file.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Run a grid over one config key, averaged over seeds.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Key to vary, e.g. `caden.participation` or `caden.tau`.
        #[arg(long, default_value = "caden.participation")]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        /// Number of consecutive seeds starting at `--seed`.
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Run invariant suites.
    Verify {
        #[arg(long, value_enum, default_value_t = SuiteArg::All)]
        suite: SuiteArg,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    #[value(name = "lemma1")]
    Sandwich,
    Equivalence,
    Constants,
    All,
}

impl SuiteArg {
    fn suites(self) -> Vec<Suite> {
        match self {
            SuiteArg::Sandwich => vec![Suite::Sandwich],
            SuiteArg::Equivalence => vec![Suite::Equivalence],
            SuiteArg::Constants => vec![Suite::Constants],
            SuiteArg::All => Suite::ALL.to_vec(),
        }
    }
}

fn load(path: &PathBuf, overrides: &[String], seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    for kv in overrides {
        let (k, v) = kv.split_once('=').ok_or_else(|| HarnessError::Invalid(format!("expected KEY=VALUE, got {kv:?}")))?;
        cfg = cfg.with(k.trim(), v.trim())?;
    }
    if let Some(s) = seed {
        cfg = cfg.with("seed", &s.to_string())?;
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { config, overrides, common } => {
            let cfg = load(&config, &overrides, common.seed)?;
            let out = run_experiment(&cfg, common.out_dir.as_deref())?;
            println!("{}", describe(&out));
            Ok(true)
        }
        Command::Sweep { config, param, values, seeds, common } => {
            let cfg = load(&config, &[], common.seed)?;
            let seed_list: Vec<u64> = (0..seeds).map(|k| cfg.seed + k).collect();
            let report = sweep(&cfg, &param, &values, &seed_list, common.out_dir.as_deref())?;
            print!("{}", report.summary_csv());
            Ok(true)
        }
        Command::Verify { suite, common } => {
            let mut ok = true;
            for s in suite.suites() {
                let report = run_and_write(s, common.seed.unwrap_or(0), common.out_dir.as_deref())?;
                for line in report.lines() {
                    println!("[{s}] {line}");
                }
                ok &= report.passed();
            }
            Ok(ok)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
