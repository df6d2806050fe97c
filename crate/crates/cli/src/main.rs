use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use palmcox_cli::{exit, run, Command, ExperimentConfig, Overrides, OUT_ENV};

/// Seeded experiments on invariant point processes.
#[derive(Parser, Debug)]
#[command(name = "palmcox", version)]
struct Args {
    /// Experiment to run.
    #[arg(value_enum)]
    command: Command,
    /// TOML experiment config; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<usize>,
    /// Output directory (overrides the config and $PALMCOX_OUT).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} threads: {e}");
            return ExitCode::from(exit::ERROR);
        }
    }
    let overrides = Overrides {
        seed: args.seed,
        replicates: args.replicates,
        out: args.out,
        env_out: std::env::var_os(OUT_ENV).map(PathBuf::from),
    };
    let outcome = args
        .config
        .as_deref()
        .map_or_else(|| Ok(ExperimentConfig::default()), ExperimentConfig::load)
        .and_then(|c| c.resolve(&overrides, args.command.default_replicates()))
        .and_then(|r| run(args.command, &r));
    match outcome {
        Ok(o) => {
            for c in &o.checks {
                let mark = if c.passed { "ok  " } else { "FAIL" };
                println!("{mark} {} = {} ({} {})", c.name, c.statistic, c.rule, c.threshold);
            }
            for v in &o.violations {
                println!("FAIL {v}");
            }
            println!("{} -> {} (summary sha256 {})", args.command, o.dir.display(), o.digest);
            if o.passed {
                ExitCode::from(exit::SUCCESS)
            } else {
                ExitCode::from(exit::STATISTICAL_FAILURE)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
