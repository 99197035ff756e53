use std::path::Path;

use hodge_proj::curves::CurveSpec;
use hodge_proj::moduli::PathKind;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {source}")]
    Parse {
        path: String,
        source: serde_json::Error,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Numerical thresholds. Every entry can be replaced with `--tol-override key=value`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative stopping tolerance of period quadrature.
    pub quadrature: f64,
    /// Largest error estimate accepted from a diagonal jet fit.
    pub jet: f64,
    /// Biresidue and residue-term bound.
    pub contract: f64,
    pub symmetry: f64,
    pub holomorphy: f64,
    pub obstruction: f64,
    pub cup: f64,
    pub cocycle: f64,
    /// Smallest singular value of the obstruction response, relative to its largest entry.
    pub response: f64,
    pub kappa: f64,
    /// Finite-difference step in moduli.
    pub step: f64,
    pub richardson: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            quadrature: 1e-12,
            jet: 1e-7,
            contract: 1e-8,
            symmetry: 1e-10,
            holomorphy: 1e-6,
            obstruction: 1e-6,
            cup: 1e-6,
            cocycle: 1e-6,
            response: 1e-8,
            kappa: 1e-4,
            step: 1e-3,
            richardson: 1e-6,
        }
    }
}

impl Tolerances {
    fn slot(&mut self, key: &str) -> Option<&mut f64> {
        Some(match key {
            "quadrature" => &mut self.quadrature,
            "jet" => &mut self.jet,
            "contract" => &mut self.contract,
            "symmetry" => &mut self.symmetry,
            "holomorphy" => &mut self.holomorphy,
            "obstruction" => &mut self.obstruction,
            "cup" => &mut self.cup,
            "cocycle" => &mut self.cocycle,
            "response" => &mut self.response,
            "kappa" => &mut self.kappa,
            "step" => &mut self.step,
            "richardson" => &mut self.richardson,
            _ => return None,
        })
    }

    /// Applies one `key=value` override.
    pub fn apply(&mut self, item: &str) -> Result<(), ConfigError> {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| ConfigError::Invalid(format!("override `{item}` is not key=value")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| ConfigError::Invalid(format!("override `{item}` has no numeric value")))?;
        let slot = self
            .slot(key.trim())
            .ok_or_else(|| ConfigError::Invalid(format!("unknown tolerance `{key}`")))?;
        *slot = value;
        Ok(())
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let all = serde_json::to_value(self).expect("tolerances serialize");
        for (key, v) in all.as_object().expect("object") {
            let v = v.as_f64().unwrap_or(f64::NAN);
            if !(v.is_finite() && v > 0.0) {
                return Err(ConfigError::Invalid(format!(
                    "tolerance `{key}` must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSpec {
    /// The five finite branch points.
    pub roots: Vec<Complex64>,
    pub root_index: usize,
    /// Point `x` (on the `+` sheet) where the connection is followed.
    pub point: Complex64,
    #[serde(default)]
    pub direction: Option<Complex64>,
    #[serde(default)]
    pub kind: Option<PathKind>,
    #[serde(default)]
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Stem of the output files.
    #[serde(default)]
    pub name: Option<String>,
    /// If present, must match the subcommand.
    #[serde(default)]
    pub command: Option<String>,
    #[serde(default)]
    pub curves: Vec<CurveSpec>,
    /// Sample points: `z` on a torus, `x` on the `+` sheet of a hyperelliptic curve.
    #[serde(default)]
    pub points: Vec<Complex64>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub grid: Option<Vec<Complex64>>,
    #[serde(default)]
    pub trace: Option<TraceSpec>,
    /// Symmetric matrix added to the correction of every genus-matching kernel before
    /// checking; used to exercise failure paths.
    #[serde(default)]
    pub perturbation: Option<Vec<Vec<Complex64>>>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn empty() -> Self {
        Self {
            name: None,
            command: None,
            curves: Vec::new(),
            points: Vec::new(),
            tolerances: Tolerances::default(),
            grid: None,
            trace: None,
            perturbation: None,
        }
    }

    pub fn validate(&self, command: &str) -> Result<(), ConfigError> {
        if let Some(c) = &self.command {
            if c != command {
                return Err(ConfigError::Invalid(format!(
                    "config is for `{c}`, not `{command}`"
                )));
            }
        }
        self.tolerances.validate()?;
        if let Some(grid) = &self.grid {
            if grid.is_empty() {
                return Err(ConfigError::Invalid("grid is empty".into()));
            }
            if let Some(t) = grid.iter().find(|t| !(t.im > 0.0) || !t.re.is_finite()) {
                return Err(ConfigError::Invalid(format!(
                    "grid point {t} is not in the upper half-plane"
                )));
            }
        }
        if let Some(name) = &self.name {
            if name.is_empty() || name.contains(['/', '\\']) {
                return Err(ConfigError::Invalid(format!("bad output name `{name}`")));
            }
        }
        if let Some(m) = &self.perturbation {
            if m.iter().any(|row| row.len() != m.len()) {
                return Err(ConfigError::Invalid("perturbation must be square".into()));
            }
        }
        Ok(())
    }

    pub fn stem(&self, command: &str) -> String {
        self.name.clone().unwrap_or_else(|| command.to_string())
    }
}

/// The genus-1 and genus-2 curves used when a config lists none.
pub fn default_curves() -> Vec<CurveSpec> {
    vec![
        CurveSpec::Elliptic { tau: [0.4, 1.3] },
        // x (x^2 - 1) (x^2 - 4)
        CurveSpec::Hyperelliptic {
            coeffs: vec![
                [0.0, 0.0],
                [4.0, 0.0],
                [0.0, 0.0],
                [-5.0, 0.0],
                [0.0, 0.0],
                [1.0, 0.0],
            ],
        },
    ]
}

pub fn default_grid() -> Vec<Complex64> {
    [(0.0, 1.1), (0.0, 2.0), (0.4, 1.3), (-0.3, 0.9), (0.1, 2.5)]
        .iter()
        .map(|&(a, b)| Complex64::new(a, b))
        .collect()
}
