use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use divspec_cli::{parse_config, run, Command, RunOptions};

/// Spectral workbench for divergence-form elliptic operators.
///
/// Exit codes: 0 all checks passed, 1 a check failed, 2 usage or
/// configuration error, 3 numerical failure.
#[derive(Parser, Debug)]
#[command(name = "divspec", version)]
struct Cli {
    /// One of: assemble, spectrum, affiliate, liouville, asympt, heatbound, manifold, report.
    command: String,
    /// Run configuration (TOML; see docs/config.md).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out` in the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for randomized sampling; overrides `seed` in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Do not read or write the eigendecomposition cache.
    #[arg(long)]
    no_cache: bool,
}

fn usage_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let Some(command) = Command::parse(&cli.command) else {
        return usage_error(format!("unknown command `{}`", cli.command));
    };
    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => return usage_error(format!("cannot read {}: {e}", cli.config.display())),
    };
    let cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => return usage_error(format!("{}: {e}", cli.config.display())),
    };
    if cfg.command != command {
        return usage_error(format!(
            "command line says `{command}` but {} configures `{}`",
            cli.config.display(),
            cfg.command
        ));
    }
    let base_dir = cli.config.parent().map(PathBuf::from).unwrap_or_default();
    let out = cli
        .out
        .or_else(|| cfg.out.as_ref().map(|o| base_dir.join(o)))
        .unwrap_or_else(|| PathBuf::from(format!("divspec-{command}")));
    let opts = RunOptions {
        out,
        seed: cli.seed,
        no_cache: cli.no_cache,
        base_dir,
    };
    match run(&cfg, &opts) {
        Ok(outcome) => {
            if let Some(s) = &outcome.summary {
                print!("{}", s.text);
            }
            if let Some(r) = &outcome.record {
                for (k, v) in &r.verdicts {
                    println!("{k} = {v}");
                }
                for c in &r.checks {
                    println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                }
                println!("outputs in {}", opts.out.display());
            }
            if outcome.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
