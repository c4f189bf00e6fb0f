use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fungen_cli::{cmd_backtest, cmd_simulate, cmd_verify, CliError, Fault, RunConfig};

#[derive(Parser)]
#[command(name = "fungen", version, about = "Functionally generated portfolio backtests and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write simulated market paths as market CSV.
    Simulate(Common),
    /// Run the daily backtest and write the report files.
    Backtest(Common),
    /// Run the invariant suites and print pass/fail with worst residuals.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, hide = true)]
        inject_fault: Option<Fault>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (a `.csv` file for a single simulate run).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seeds to run; replaces the config's seed list.
    #[arg(long, num_args = 1..)]
    seed: Vec<u64>,
}

impl Common {
    fn load(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::load(&self.config)?;
        if !self.seed.is_empty() {
            cfg.seeds = self.seed.clone();
            cfg.validate()?;
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(c) => {
            let cfg = c.load()?;
            for p in cmd_simulate(&cfg, c.out.as_deref())? {
                println!("wrote {}", p.display());
            }
        }
        Command::Backtest(c) => {
            let cfg = c.load()?;
            let summary = cmd_backtest(&cfg, c.out.as_deref())?;
            for r in &summary.runs {
                let s = &r.files.summary_data;
                let modes: Vec<String> = s
                    .modes
                    .iter()
                    .map(|(m, v)| {
                        let t = v.t_star.map(|t| t.to_string()).unwrap_or_else(|| "-".into());
                        format!("{m}: V(T)={:.6} T*={t}", v.terminal_wealth)
                    })
                    .collect();
                println!("run {} seed {:?}: {}", r.run_id, r.seed, modes.join(", "));
            }
            println!("aggregate {}", summary.aggregate.display());
        }
        Command::Verify { common, inject_fault } => {
            let cfg = common.load()?;
            let reports = cmd_verify(&cfg, common.out.as_deref(), inject_fault)?;
            let mut failed = 0;
            for r in &reports {
                println!("run {} seed {:?}", r.run_id, r.seed);
                for s in &r.suites {
                    println!("  {s}");
                }
                failed += r.suites.iter().filter(|s| !s.passed).count();
            }
            if failed > 0 {
                return Err(CliError::Verify(format!("{failed} suite(s) failed")));
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
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
