//! Run configuration: the model definition plus analysis settings, read from
//! one JSON document.

use std::path::PathBuf;

use clap::ValueEnum;
use releq_core::branch::{ContinuationOptions, ContinuationParameter, PersistenceGrid};
use releq_core::model_config::{ModelConfig, PointConfig};
use releq_core::reduction::NewtonOptions;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Analysis {
    FindRe,
    Reduce,
    Continue,
    Persist,
    Bifurcate,
    Stability,
}

impl Analysis {
    pub fn name(self) -> &'static str {
        match self {
            Analysis::FindRe => "find-re",
            Analysis::Reduce => "reduce",
            Analysis::Continue => "continue",
            Analysis::Persist => "persist",
            Analysis::Bifurcate => "bifurcate",
            Analysis::Stability => "stability",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericConfig {
    pub newton_tol: f64,
    pub max_iter: usize,
    pub tol_rank: f64,
    /// Kernel threshold for L; None uses the reduction default.
    pub kernel_tol: Option<f64>,
    pub drift_t_max: f64,
    pub drift_steps: usize,
    pub drift_tol: f64,
    /// Random points for the analytic-vs-finite-difference derivative check.
    pub spot_check_points: usize,
}

impl Default for NumericConfig {
    fn default() -> Self {
        Self {
            newton_tol: 1e-11,
            max_iter: 50,
            tol_rank: releq_core::slice::DEFAULT_TOL_RANK,
            kernel_tol: None,
            drift_t_max: 1.0,
            drift_steps: 200,
            drift_tol: 1e-5,
            spot_check_points: 5,
        }
    }
}

impl NumericConfig {
    pub fn newton(&self) -> NewtonOptions {
        NewtonOptions { tol: self.newton_tol, max_iter: self.max_iter }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ContinuationConfig {
    /// Defaults to the first momentum component.
    #[serde(default)]
    pub parameter: Option<ContinuationParameter>,
    #[serde(flatten)]
    pub options: ContinuationOptions,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BifurcationConfig {
    /// Kernel amplitudes at which each bifurcating branch is solved.
    pub amplitudes: Vec<f64>,
    pub max_events: usize,
}

impl Default for BifurcationConfig {
    fn default() -> Self {
        Self { amplitudes: (1..=6).map(|i| 0.02 * i as f64).collect(), max_events: 8 }
    }
}

/// Scalar plotted on the vertical axis of the diagram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagramQuantity {
    /// |z_j| for complex pair j.
    PairAbs(usize),
    Component(usize),
    Norm,
    /// Kernel amplitude of a switched branch; zero on the parent.
    KernelAmplitude,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagramConfig {
    pub quantity: DiagramQuantity,
    pub width: u32,
    pub height: u32,
}

impl Default for DiagramConfig {
    fn default() -> Self {
        Self { quantity: DiagramQuantity::PairAbs(0), width: 720, height: 480 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: Option<PathBuf>,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: None, formats: vec![Format::Csv, Format::Json, Format::Svg] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub model: ModelConfig,
    #[serde(default)]
    pub analysis: Option<Analysis>,
    #[serde(default)]
    pub numeric: NumericConfig,
    #[serde(default)]
    pub continuation: ContinuationConfig,
    #[serde(default)]
    pub persistence: PersistenceGrid,
    #[serde(default)]
    pub bifurcation: BifurcationConfig,
    #[serde(default)]
    pub diagram: DiagramConfig,
    /// Initial guesses for find-re.
    #[serde(default)]
    pub seeds: Vec<PointConfig>,
    /// Points for the stability analysis; defaults to the base point.
    #[serde(default)]
    pub points: Vec<PointConfig>,
    /// RNG seed for sampled checks.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output: OutputConfig,
}

fn positive(name: &str, v: f64) -> Result<(), String> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(format!("{name} must be positive, got {v}"))
    }
}

impl RunConfig {
    /// Checks that do not need the model built.
    pub fn validate(&self, analysis: Analysis) -> Result<(), String> {
        if let Some(a) = self.analysis {
            if a != analysis {
                return Err(format!("config is for '{}' but '{}' was requested", a.name(), analysis.name()));
            }
        }
        let n = &self.numeric;
        positive("numeric.newton_tol", n.newton_tol)?;
        positive("numeric.tol_rank", n.tol_rank)?;
        positive("numeric.drift_t_max", n.drift_t_max)?;
        positive("numeric.drift_tol", n.drift_tol)?;
        if let Some(k) = n.kernel_tol {
            positive("numeric.kernel_tol", k)?;
        }
        if n.max_iter == 0 || n.drift_steps == 0 {
            return Err("numeric.max_iter and numeric.drift_steps must be positive".into());
        }
        let c = &self.continuation.options;
        positive("continuation.step", c.step)?;
        positive("continuation.newton_tol", c.newton_tol)?;
        positive("continuation.branch_tol", c.branch_tol)?;
        positive("continuation.tol_rank", c.tol_rank)?;
        if c.direction.abs() != 1.0 {
            return Err("continuation.direction must be 1 or -1".into());
        }
        match analysis {
            Analysis::FindRe if self.seeds.is_empty() => return Err("find-re needs a non-empty 'seeds' list".into()),
            Analysis::Persist if self.persistence.eta.is_empty() || self.persistence.alpha.is_empty() => {
                return Err("persistence grid axes must be non-empty".into())
            }
            Analysis::Bifurcate => {
                if self.bifurcation.amplitudes.is_empty() {
                    return Err("bifurcation.amplitudes must be non-empty".into());
                }
                for &a in &self.bifurcation.amplitudes {
                    positive("bifurcation amplitude", a)?;
                }
            }
            _ => {}
        }
        if self.diagram.width < 100 || self.diagram.height < 100 {
            return Err("diagram width and height must be at least 100".into());
        }
        Ok(())
    }

    pub fn wants(&self, f: Format) -> bool {
        self.output.formats.contains(&f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let c: RunConfig = serde_json::from_str(r#"{"hamiltonian": {"kind": "builtin", "name": "wave_resonance", "params": {"C": 0.8}}}"#).unwrap();
        assert_eq!(c.numeric.drift_tol, 1e-5);
        assert_eq!(c.output.formats.len(), 3);
        assert!(c.validate(Analysis::Continue).is_ok());
        assert!(c.validate(Analysis::FindRe).is_err());
    }

    #[test]
    fn continuation_options_flatten() {
        let c: RunConfig = serde_json::from_str(
            r#"{"hamiltonian": {"kind": "builtin", "name": "wave_resonance"},
                "continuation": {"parameter": {"momentum": [1, 0]}, "step": 0.1, "until": 4.5},
                "diagram": {"quantity": {"pair_abs": 2}}}"#,
        )
        .unwrap();
        assert_eq!(c.continuation.options.step, 0.1);
        assert_eq!(c.continuation.options.until, Some(4.5));
        assert_eq!(c.continuation.options.n_steps, ContinuationOptions::default().n_steps);
        assert_eq!(c.continuation.parameter, Some(ContinuationParameter::Momentum(vec![1.0, 0.0])));
        assert_eq!(c.diagram.quantity, DiagramQuantity::PairAbs(2));
    }

    #[test]
    fn nonpositive_tolerance_rejected() {
        let c: RunConfig = serde_json::from_str(r#"{"hamiltonian": {"kind": "builtin", "name": "wave_resonance"}, "numeric": {"newton_tol": 0}}"#).unwrap();
        assert!(c.validate(Analysis::Reduce).unwrap_err().contains("newton_tol"));
    }
}
