use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use qrdr_cli::{emit_report, resolve, run_experiment, Cli, CliError};

fn execute(cli: Cli) -> Result<(), CliError> {
    let (cfg, threads) = resolve(cli)?;
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            log::warn!("thread pool already initialized: {e}");
        }
    }
    log::info!("running {}", cfg.command.name());
    let rec = run_experiment(&cfg)?;
    let path = rec.default_path();
    emit_report(&rec, &path)?;
    println!("{}", rec.experiment_id);
    for (k, v) in &rec.metrics {
        println!("  {k}: {v}");
    }
    for a in &rec.artifacts {
        println!("  wrote {}", a.display());
    }
    println!("  report {}", path.display());
    if rec.metrics.get("all_passed").and_then(|v| v.as_bool()) == Some(false) {
        return Err(CliError::Checks("one or more checks failed".into()));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
