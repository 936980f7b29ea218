use semiflat::{Domain, GridFunction, Mat, Potential};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("unknown suite `{0}`")]
    UnknownSuite(String),
    #[error("grid file {path}: {message}")]
    Grid { path: PathBuf, message: String },
}

/// Verification suites, in their canonical order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Legendre,
    Ma,
    MirrorForms,
    Sl2,
    Yukawa,
    Moduli,
    Connections,
    Cycles,
    Hyperkahler,
    Automorphisms,
    Bfield,
}

impl Suite {
    pub const ALL: [Suite; 11] = [
        Suite::Legendre,
        Suite::Ma,
        Suite::MirrorForms,
        Suite::Sl2,
        Suite::Yukawa,
        Suite::Moduli,
        Suite::Connections,
        Suite::Cycles,
        Suite::Hyperkahler,
        Suite::Automorphisms,
        Suite::Bfield,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Legendre => "legendre",
            Suite::Ma => "ma",
            Suite::MirrorForms => "mirror-forms",
            Suite::Sl2 => "sl2",
            Suite::Yukawa => "yukawa",
            Suite::Moduli => "moduli",
            Suite::Connections => "connections",
            Suite::Cycles => "cycles",
            Suite::Hyperkahler => "hyperkahler",
            Suite::Automorphisms => "automorphisms",
            Suite::Bfield => "bfield",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Suite::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| ConfigError::UnknownSuite(s.to_string()))
    }
}

/// Background potential.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialSpec {
    /// `½ |x|²`.
    Flat,
    /// `½ xᵀ A x`.
    Quadratic { hessian: Vec<Vec<f64>> },
    /// `½ |x|² + a exp(w · x)`.
    ExpTilt { a: f64 },
    Quartic,
    Radial,
    /// Exact non-quadratic solution with `det D²φ = 1` for `x₁ < c`.
    ExactMa { c: f64 },
    /// Grid-backed potential loaded from a CSV file.
    Grid {
        path: PathBuf,
        #[serde(default = "one")]
        constant: f64,
    },
}

fn one() -> f64 {
    1.0
}
fn default_resolution() -> usize {
    17
}
fn default_fiber() -> usize {
    16
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub n: usize,
    /// Per-axis bounds; defaults to `[-0.5, 0.5]` on every axis.
    #[serde(default)]
    pub bounds: Option<Vec<(f64, f64)>>,
    pub potential: PotentialSpec,
    #[serde(default = "one")]
    pub lattice_covolume: f64,
    #[serde(default = "default_resolution")]
    pub grid_resolution: usize,
    #[serde(default = "default_fiber")]
    pub fiber_resolution: usize,
    #[serde(default)]
    pub suites: Vec<Suite>,
    /// Keyed by `suite` or `suite/check`; the more specific key wins.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default)]
    pub seed: u64,
}

impl SuiteConfig {
    /// Flat background at dimension `n` with every suite selected.
    pub fn flat(n: usize) -> Self {
        Self {
            n,
            bounds: None,
            potential: PotentialSpec::Flat,
            lattice_covolume: 1.0,
            grid_resolution: default_resolution(),
            fiber_resolution: default_fiber(),
            suites: Suite::ALL.to_vec(),
            tolerances: BTreeMap::new(),
            seed: 0,
        }
    }

    /// Reads a config; relative grid paths resolve against the config's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        let mut cfg: Self = serde_json::from_str(&text)?;
        if let PotentialSpec::Grid { path: grid, .. } = &mut cfg.potential {
            if grid.is_relative() {
                if let Some(dir) = path.parent() {
                    *grid = dir.join(&*grid);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.bounds.clone().unwrap_or_else(|| vec![(-0.5, 0.5); self.n])
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if !(1..=3).contains(&self.n) {
            return bad(format!("n = {} is outside 1..=3", self.n));
        }
        let b = self.bounds();
        if b.len() != self.n {
            return bad(format!("{} bounds given for n = {}", b.len(), self.n));
        }
        if b.iter().any(|(lo, hi)| !(lo < hi)) {
            return bad("every axis needs lo < hi".into());
        }
        if self.grid_resolution < 9 || self.grid_resolution % 2 == 0 {
            return bad("grid_resolution must be odd and at least 9".into());
        }
        if self.fiber_resolution < 8 {
            return bad("fiber_resolution must be at least 8".into());
        }
        if !(self.lattice_covolume > 0.0) {
            return bad("lattice_covolume must be positive".into());
        }
        if let Some((k, v)) = self.tolerances.iter().find(|(_, v)| !(**v > 0.0)) {
            return bad(format!("tolerance `{k}` = {v} is not positive"));
        }
        match &self.potential {
            PotentialSpec::Quadratic { hessian } => {
                if hessian.len() != self.n || hessian.iter().any(|r| r.len() != self.n) {
                    return bad("quadratic hessian must be n × n".into());
                }
                if self.hessian_matrix(hessian).cholesky().is_none() {
                    return bad("quadratic hessian must be symmetric positive definite".into());
                }
            }
            PotentialSpec::ExactMa { c } => {
                if b[0].1 >= *c {
                    return bad("exact-ma requires the upper x₁ bound below c".into());
                }
            }
            PotentialSpec::Grid { path, constant } => {
                if !path.exists() {
                    return Err(ConfigError::Grid { path: path.clone(), message: "file does not exist".into() });
                }
                if !(*constant > 0.0) {
                    return bad("grid constant must be positive".into());
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn hessian_matrix(&self, h: &[Vec<f64>]) -> Mat<f64> {
        Mat::from_fn(self.n, self.n, |a, b| h[a][b])
    }

    pub fn domain(&self) -> Result<Domain<f64>, ConfigError> {
        let inv = |e: semiflat::GeometryError| ConfigError::Invalid(e.to_string());
        Domain::new(self.bounds())
            .and_then(|d| d.with_grid_resolution(self.grid_resolution))
            .and_then(|d| d.with_covolume(self.lattice_covolume))
            .and_then(|d| d.with_fiber_resolution(self.fiber_resolution))
            .map_err(inv)
    }

    pub fn potential(&self) -> Result<Potential<f64>, ConfigError> {
        let n = self.n;
        Ok(match &self.potential {
            PotentialSpec::Flat => Potential::flat(n),
            PotentialSpec::Quadratic { hessian } => {
                let a = self.hessian_matrix(hessian);
                let c = a.det();
                let mut p = Potential::quadratic(a);
                p.target_constant = c;
                p
            }
            PotentialSpec::ExpTilt { a } => Potential::exp_tilt(n, *a),
            PotentialSpec::Quartic => Potential::quartic(n),
            PotentialSpec::Radial => Potential::radial(n),
            PotentialSpec::ExactMa { c } => Potential::exact_ma(n, *c),
            PotentialSpec::Grid { path, constant } => {
                let err = |message: String| ConfigError::Grid { path: path.clone(), message };
                let file = std::fs::File::open(path).map_err(|e| err(e.to_string()))?;
                let g = GridFunction::read_csv(std::io::BufReader::new(file)).map_err(|e| err(e.to_string()))?;
                if g.dim() != n {
                    return Err(err(format!("grid has dimension {}, config has n = {n}", g.dim())));
                }
                Potential::grid(g, *constant)
            }
        })
    }

    /// Whether the background is expected to solve `det D²φ = C` identically.
    pub fn is_monge_ampere(&self) -> bool {
        matches!(
            self.potential,
            PotentialSpec::Flat | PotentialSpec::Quadratic { .. } | PotentialSpec::ExactMa { .. } | PotentialSpec::Grid { .. }
        )
    }
}
