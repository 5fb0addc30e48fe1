//! JSON model definitions.
//!
//! ```json
//! {"dim": 4, "omega": "standard", "torus_generators": [[[...]]],
//!  "finite_elements": [], "hamiltonian": {"kind": "polynomial", "terms": [...]}}
//! ```
//! or `{"hamiltonian": {"kind": "builtin", "name": "wave_resonance", "params": {"C": 0.8}}}`.
//! Matrices are row-major arrays of rows.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{self, ResonanceParams, WaveParams};
use crate::polynomial::{Polynomial, Term};
use crate::system::{HamiltonianSystem, PhaseSpace, SymmetrySpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OmegaConfig {
    Named(String),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HamiltonianConfig {
    Polynomial { terms: Vec<Term> },
    Builtin {
        name: String,
        #[serde(default)]
        params: serde_json::Value,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointConfig {
    pub z: Vec<f64>,
    pub xi: Vec<f64>,
}

impl PointConfig {
    pub fn vectors(&self) -> (DVector<f64>, DVector<f64>) {
        (DVector::from_vec(self.z.clone()), DVector::from_vec(self.xi.clone()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub omega: Option<OmegaConfig>,
    #[serde(default)]
    pub inner: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub torus_generators: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    pub finite_elements: Vec<Vec<Vec<f64>>>,
    pub hamiltonian: HamiltonianConfig,
    #[serde(default)]
    pub base_point: Option<PointConfig>,
}

/// A constructed model with its known relative equilibrium, if any.
#[derive(Debug, Clone)]
pub struct Model {
    pub system: HamiltonianSystem,
    pub base: Option<(DVector<f64>, DVector<f64>)>,
    pub wave: Option<WaveParams>,
}

fn matrix(rows: &[Vec<f64>], n: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidModel(format!("{what} must be {n}x{n}")));
    }
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::InvalidModel(format!("{what} has non-finite entries")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn params<T: serde::de::DeserializeOwned + Default>(v: &serde_json::Value) -> Result<T> {
    if v.is_null() {
        return Ok(T::default());
    }
    serde_json::from_value(v.clone()).map_err(|e| Error::InvalidModel(format!("builtin params: {e}")))
}

impl Default for WaveParams {
    fn default() -> Self {
        WaveParams::default_with(1.0, 0.5)
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
struct OscillatorParams {
    frequencies: Vec<f64>,
}

impl ModelConfig {
    pub fn from_value(v: &serde_json::Value) -> Result<Self> {
        serde_json::from_value(v.clone()).map_err(|e| Error::InvalidModel(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidModel(e.to_string()))
    }

    pub fn build(&self) -> Result<Model> {
        let mut model = match &self.hamiltonian {
            HamiltonianConfig::Builtin { name, params: p } => match name.as_str() {
                "wave_resonance" => {
                    let wp: WaveParams = params(p)?;
                    let system = models::wave_system(&wp)?;
                    Model { system, base: Some(models::base_point(&wp)), wave: Some(wp) }
                }
                "oscillator" => {
                    let op: OscillatorParams = params(p)?;
                    Model { system: models::oscillator_system(&op.frequencies)?, base: None, wave: None }
                }
                "resonance_1_2" => {
                    let rp: ResonanceParams = params(p)?;
                    Model { system: models::resonance_system(&rp)?, base: Some(models::resonance_base(&rp)), wave: None }
                }
                other => return Err(Error::InvalidModel(format!("unknown builtin model '{other}'"))),
            },
            HamiltonianConfig::Polynomial { terms } => {
                let n = self.dim.ok_or_else(|| Error::InvalidModel("polynomial models need 'dim'".into()))?;
                if n == 0 || n % 2 == 1 {
                    return Err(Error::InvalidModel(format!("dim must be even and positive, got {n}")));
                }
                let phase = match (&self.omega, &self.inner) {
                    (None, None) => PhaseSpace::standard(n / 2),
                    (Some(OmegaConfig::Named(s)), None) if s == "standard" => PhaseSpace::standard(n / 2),
                    (Some(OmegaConfig::Named(s)), None) if s == "complex" => PhaseSpace::complex(n / 2),
                    (Some(OmegaConfig::Named(s)), _) if s != "standard" && s != "complex" => {
                        return Err(Error::InvalidModel(format!("unknown omega '{s}'")))
                    }
                    (om, inner) => {
                        let omega = match om {
                            Some(OmegaConfig::Matrix(m)) => matrix(m, n, "omega")?,
                            Some(OmegaConfig::Named(s)) if s == "complex" => PhaseSpace::complex(n / 2).omega().clone(),
                            _ => PhaseSpace::standard(n / 2).omega().clone(),
                        };
                        let g = match inner {
                            Some(m) => matrix(m, n, "inner")?,
                            None => DMatrix::identity(n, n),
                        };
                        PhaseSpace::new(omega, g)?
                    }
                };
                let gens = self.torus_generators.iter().map(|m| matrix(m, n, "torus generator")).collect::<Result<Vec<_>>>()?;
                let fin = self.finite_elements.iter().map(|m| matrix(m, n, "finite element")).collect::<Result<Vec<_>>>()?;
                let sym = SymmetrySpec::torus(&phase, gens, fin)?;
                let h = Polynomial::new(n, terms.clone())?;
                Model { system: HamiltonianSystem::new("polynomial", phase, sym, Arc::new(h))?, base: None, wave: None }
            }
        };
        if let Some(d) = self.dim {
            if d != model.system.dim() {
                return Err(Error::InvalidModel(format!("dim {d} does not match the model dimension {}", model.system.dim())));
            }
        }
        if let Some(b) = &self.base_point {
            if b.z.len() != model.system.dim() || b.xi.len() != model.system.torus_rank() {
                return Err(Error::InvalidModel("base_point has the wrong size".into()));
            }
            model.base = Some(b.vectors());
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_wave() {
        let c = ModelConfig::from_json(r#"{"hamiltonian": {"kind": "builtin", "name": "wave_resonance", "params": {"C": 0.8}}}"#).unwrap();
        let m = c.build().unwrap();
        assert_eq!(m.system.dim(), 8);
        assert_eq!(m.wave.unwrap().xi2, 0.5);
    }

    #[test]
    fn polynomial_oscillator() {
        let c = ModelConfig::from_json(
            r#"{"dim": 2, "omega": "standard",
                "torus_generators": [[[0, -1], [1, 0]]],
                "hamiltonian": {"kind": "polynomial", "terms": [
                    {"coeff": 0.5, "monomial": [2, 0]}, {"coeff": 0.5, "monomial": [0, 2]}]}}"#,
        )
        .unwrap();
        let m = c.build().unwrap();
        assert_eq!(m.system.torus_rank(), 1);
    }

    #[test]
    fn non_invariant_polynomial_rejected() {
        let c = ModelConfig::from_json(
            r#"{"dim": 2, "torus_generators": [[[0, -1], [1, 0]]],
                "hamiltonian": {"kind": "polynomial", "terms": [{"coeff": 1, "monomial": [1, 0]}]}}"#,
        )
        .unwrap();
        assert!(matches!(c.build(), Err(Error::SymmetryViolation(_))));
    }

    #[test]
    fn unknown_builtin() {
        let c = ModelConfig::from_json(r#"{"hamiltonian": {"kind": "builtin", "name": "nope"}}"#).unwrap();
        assert!(matches!(c.build(), Err(Error::InvalidModel(_))));
    }
}
