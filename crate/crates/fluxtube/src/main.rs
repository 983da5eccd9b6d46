//! Batch front end: `fluxtube <mode> --config <file> [--out <dir>]
//! [--format csv|full|both] [--jobs N]`.
//!
//! Exit codes: 0 all checks passed, 1 a theorem-level check failed,
//! 2 configuration error, 3 numerical failure (recorded per row).

use clap::Parser;
use fluxtube::config::{Mode, OutputFormat, RunConfig};
use fluxtube::report::{to_csv, to_full};
use fluxtube::runner::{run, RunStatus};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "fluxtube",
    version,
    about = "Bound-state certificates and spectral verification for magnetic flux tubes"
)]
struct Cli {
    /// certify | verify | sweep | zero-modes (must match the config file)
    mode: String,
    /// Run configuration (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: output.dir from the config, else fluxtube_out)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format: csv, full or both (default: output.format, else both)
    #[arg(long)]
    format: Option<String>,
    /// Worker threads (default: FLUXTUBE_JOBS, else all cores)
    #[arg(long)]
    jobs: Option<usize>,
}

fn config_failure(msg: &str) -> ExitCode {
    eprintln!("fluxtube: {msg}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let cli_mode = match Mode::parse(&cli.mode) {
        Ok(m) => m,
        Err(e) => return config_failure(&e.to_string()),
    };
    let mut config = match RunConfig::load(&cli.config) {
        Ok(c) => c,
        Err(e) => return config_failure(&e.to_string()),
    };
    if cli_mode != config.mode {
        return config_failure(&format!(
            "mode mismatch: command line says {}, config says {}",
            cli_mode.name(),
            config.mode.name()
        ));
    }
    if let Some(out) = cli.out {
        config.out_dir = out;
    }
    if let Some(fmt) = cli.format.as_deref() {
        config.format = match OutputFormat::parse(fmt) {
            Ok(f) => f,
            Err(e) => return config_failure(&e.to_string()),
        };
    }

    let jobs = cli.jobs.or_else(|| {
        std::env::var("FLUXTUBE_JOBS")
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
    });
    let outcome = match jobs {
        Some(n) if n > 0 => {
            let pool = match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
                Ok(p) => p,
                Err(e) => return config_failure(&format!("cannot build worker pool: {e}")),
            };
            pool.install(|| run(&config))
        }
        _ => run(&config),
    };

    if let Err(e) = std::fs::create_dir_all(&config.out_dir) {
        eprintln!("fluxtube: cannot create {}: {e}", config.out_dir.display());
        return ExitCode::from(3);
    }
    let mut written = Vec::new();
    let emit = |name: &str, body: String, written: &mut Vec<String>| -> std::io::Result<()> {
        let path = config.out_dir.join(name);
        std::fs::write(&path, body)?;
        written.push(path.display().to_string());
        Ok(())
    };
    let result = (|| -> std::io::Result<()> {
        match config.format {
            OutputFormat::Csv => emit("report.csv", to_csv(&outcome.report), &mut written)?,
            OutputFormat::Full => emit("report.txt", to_full(&outcome.report), &mut written)?,
            OutputFormat::Both => {
                emit("report.csv", to_csv(&outcome.report), &mut written)?;
                emit("report.txt", to_full(&outcome.report), &mut written)?;
            }
        }
        Ok(())
    })();
    if let Err(e) = result {
        eprintln!("fluxtube: cannot write report: {e}");
        return ExitCode::from(3);
    }

    for path in &written {
        println!("wrote {path}");
    }
    let n_rows = outcome.report.rows.len();
    match outcome.status {
        RunStatus::Success => println!("{n_rows} rows, all checks passed"),
        RunStatus::TheoremFailure => println!("{n_rows} rows, theorem-level check FAILED"),
        RunStatus::NumericalFailure => println!("{n_rows} rows, numerical failure recorded"),
    }
    ExitCode::from(outcome.status.exit_code() as u8)
}
