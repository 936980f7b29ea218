//! Configuration-driven verification runner for the `semiflat` library.

pub mod config;
pub mod report;
pub mod suites;

pub use config::{ConfigError, PotentialSpec, Suite, SuiteConfig};
pub use report::{CheckRecord, Format, Report, ReportError};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CHECKS_FAILED: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const SOLVER: i32 = 3;
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Replaces the configured suite list when non-empty.
    pub suites: Vec<Suite>,
    pub seed: Option<u64>,
    /// Global tolerance override.
    pub tolerance: Option<f64>,
    /// Zero every wall-clock field so reports are byte-identical across runs.
    pub omit_timing: bool,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub report: Report,
    pub solver_failed: bool,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.solver_failed {
            exit::SOLVER
        } else if self.report.all_pass() {
            exit::OK
        } else {
            exit::CHECKS_FAILED
        }
    }
}

/// Runs the selected suites in order; a failing suite does not stop later ones.
pub fn run(cfg: &SuiteConfig, opts: &RunOptions) -> Result<RunOutcome, ConfigError> {
    if let Some(t) = opts.tolerance {
        if !(t > 0.0) {
            return Err(ConfigError::Invalid(format!("tolerance override {t} is not positive")));
        }
    }
    let selected = if opts.suites.is_empty() { cfg.suites.clone() } else { opts.suites.clone() };
    let mut report = Report::default();
    if selected.is_empty() {
        cfg.validate()?;
        return Ok(RunOutcome { report, solver_failed: false });
    }
    let env = suites::Env::new(cfg)?;
    let seed = opts.seed.unwrap_or(cfg.seed);
    let mut solver_failed = false;
    for suite in selected {
        let mut scope = suites::Scope::new(suite, &env, seed, opts.tolerance, opts.omit_timing);
        suites::run_suite(&mut scope);
        solver_failed |= scope.solver_failed;
        report.records.append(&mut scope.records);
        report.calibration.append(&mut scope.calibration);
    }
    report.sort();
    Ok(RunOutcome { report, solver_failed })
}
