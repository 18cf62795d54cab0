use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use contactlab::commands::{default_out, execute, Command, RunOptions};
use contactlab::io::num;

/// Numerical laboratory for critical contact processes.
#[derive(Debug, Parser)]
#[command(name = "contactlab", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Experiment file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed of the experiment file.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory. Defaults to `$CONTACTLAB_OUT` or `out/<command>`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let opts = RunOptions {
        out: default_out(cli.command, cli.out.as_deref()),
        config: cli.config,
        seed: cli.seed,
    };
    match execute(cli.command, &opts) {
        Ok(m) => {
            for c in &m.checks {
                println!(
                    "{} {}: {} (threshold {})",
                    if c.pass { "pass" } else { "FAIL" },
                    c.name,
                    num(c.value),
                    num(c.threshold)
                );
            }
            if let Some(msg) = &m.message {
                eprintln!("{}: {msg}", m.command);
            }
            println!("{} -> {}", m.command, opts.out.display());
            ExitCode::from(m.status.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
