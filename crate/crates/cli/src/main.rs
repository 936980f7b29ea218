use clap::{Parser, Subcommand};
use semiflat::solver::{solve_real_ma, SolverOptions};
use semiflat_cli::{exit, run, Report, RunOptions, Suite, SuiteConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "semiflat", version, about = "Numerical checks for semi-flat mirror pairs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve det D²u = C on the configured box with the potential as boundary data.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Output grid CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run verification suites and write a report (.json or .csv).
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Suite to run; repeat to select several. Overrides the config list.
        #[arg(long = "suite", value_parser = parse_suite)]
        suites: Vec<Suite>,
        #[arg(long)]
        seed: Option<u64>,
        /// Tolerance applied to every check.
        #[arg(long)]
        tol: Option<f64>,
        /// Write zero wall times so the report is byte-deterministic.
        #[arg(long)]
        omit_timing: bool,
    },
    /// Convert a report between JSON and CSV.
    Report {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    s.parse().map_err(|e: semiflat_cli::ConfigError| e.to_string())
}

fn solve(config: PathBuf, out: PathBuf) -> i32 {
    let cfg = match SuiteConfig::load(&config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return exit::CONFIG;
        }
    };
    let (domain, potential) = match (cfg.domain(), cfg.potential()) {
        (Ok(d), Ok(p)) => (d, p),
        (Err(e), _) | (_, Err(e)) => {
            eprintln!("{e}");
            return exit::CONFIG;
        }
    };
    let boundary = |x: &[f64]| potential.value(x).unwrap_or(f64::NAN);
    let result = match solve_real_ma(&domain, potential.target_constant, &boundary, &SolverOptions::default()) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("solver: {e}");
            return exit::SOLVER;
        }
    };
    let written = std::fs::File::create(&out)
        .map_err(semiflat::GeometryError::from)
        .and_then(|f| result.grid.write_csv(std::io::BufWriter::new(f)));
    if let Err(e) = written {
        eprintln!("{}: {e}", out.display());
        return exit::CONFIG;
    }
    eprintln!("residual {:e} after {} iterations", result.final_residual(), result.iterations);
    exit::OK
}

fn verify(config: PathBuf, out: PathBuf, opts: RunOptions) -> i32 {
    let cfg = SuiteConfig::load(&config).and_then(|c| {
        semiflat_cli::Format::from_path(&out).map_err(|e| semiflat_cli::ConfigError::Invalid(e.to_string()))?;
        Ok(c)
    });
    let outcome = match cfg.and_then(|c| run(&c, &opts)) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("{e}");
            return exit::CONFIG;
        }
    };
    if let Err(e) = outcome.report.emit(&out) {
        eprintln!("{}: {e}", out.display());
        return exit::CONFIG;
    }
    for r in outcome.report.failures() {
        eprintln!("FAIL {}/{}: {:e} > {:e}", r.suite, r.check, r.max_residual, r.tolerance);
    }
    outcome.exit_code()
}

fn convert(input: PathBuf, out: PathBuf) -> i32 {
    match Report::load(&input).and_then(|r| r.emit(&out)) {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("{e}");
            exit::CONFIG
        }
    }
}

fn main() -> ExitCode {
    let code = match Cli::parse().command {
        Command::Solve { config, out } => solve(config, out),
        Command::Verify { config, out, suites, seed, tol, omit_timing } => {
            verify(config, out, RunOptions { suites, seed, tolerance: tol, omit_timing })
        }
        Command::Report { input, out } => convert(input, out),
    };
    ExitCode::from(code as u8)
}
