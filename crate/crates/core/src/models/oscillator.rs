//! Oscillator fixtures: uncoupled oscillators with a diagonal torus, and a
//! 1:2 resonant pair with a single S¹ used for full-isotropy reductions.

use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polynomial::{Polynomial, Term};
use crate::system::{rotation_generator, HamiltonianSystem, PhaseSpace, SymmetrySpec};

fn monomial(n: usize, entries: &[(usize, u32)]) -> Vec<u32> {
    let mut m = vec![0; n];
    for &(i, e) in entries {
        m[i] += e;
    }
    m
}

/// h = Σ ω_j |z_j|², torus Tⁿ rotating each z_j with weight 1.
pub fn oscillator_system(frequencies: &[f64]) -> Result<HamiltonianSystem> {
    let n = frequencies.len();
    if n == 0 {
        return Err(Error::InvalidModel("at least one frequency required".into()));
    }
    let dim = 2 * n;
    let mut terms = Vec::new();
    for (j, &w) in frequencies.iter().enumerate() {
        terms.push(Term { coeff: w, monomial: monomial(dim, &[(2 * j, 2)]) });
        terms.push(Term { coeff: w, monomial: monomial(dim, &[(2 * j + 1, 2)]) });
    }
    let phase = PhaseSpace::complex(n);
    let gens = (0..n).map(|j| rotation_generator(n, &[(j, 1.0)])).collect();
    let sym = SymmetrySpec::torus(&phase, gens, vec![])?;
    HamiltonianSystem::new("oscillator", phase, sym, Arc::new(Polynomial::new(dim, terms)?))
}

/// Parameters of h = ω₁X₁ + ω₂X₂ + κ Re(z₁² z̄₂) + q(X₁² + X₂²) with S¹
/// acting by (z₁, z₂) ↦ (e^{iθ}z₁, e^{2iθ}z₂).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResonanceParams {
    pub omega1: f64,
    pub omega2: f64,
    pub coupling: f64,
    pub quartic: f64,
}

impl Default for ResonanceParams {
    fn default() -> Self {
        Self { omega1: 1.0, omega2: 3.0, coupling: 1.0, quartic: 0.5 }
    }
}

pub fn resonance_system(p: &ResonanceParams) -> Result<HamiltonianSystem> {
    let n = 4;
    let (x1, y1, x2, y2) = (0, 1, 2, 3);
    let mut terms = vec![
        Term { coeff: p.omega1, monomial: monomial(n, &[(x1, 2)]) },
        Term { coeff: p.omega1, monomial: monomial(n, &[(y1, 2)]) },
        Term { coeff: p.omega2, monomial: monomial(n, &[(x2, 2)]) },
        Term { coeff: p.omega2, monomial: monomial(n, &[(y2, 2)]) },
        // Re(z₁² z̄₂) = (x₁² − y₁²)x₂ + 2x₁y₁y₂
        Term { coeff: p.coupling, monomial: monomial(n, &[(x1, 2), (x2, 1)]) },
        Term { coeff: -p.coupling, monomial: monomial(n, &[(y1, 2), (x2, 1)]) },
        Term { coeff: 2.0 * p.coupling, monomial: monomial(n, &[(x1, 1), (y1, 1), (y2, 1)]) },
    ];
    // q (x² + y²)² per pair
    for (a, b) in [(x1, y1), (x2, y2)] {
        terms.push(Term { coeff: p.quartic, monomial: monomial(n, &[(a, 4)]) });
        terms.push(Term { coeff: 2.0 * p.quartic, monomial: monomial(n, &[(a, 2), (b, 2)]) });
        terms.push(Term { coeff: p.quartic, monomial: monomial(n, &[(b, 4)]) });
    }
    let phase = PhaseSpace::complex(2);
    let sym = SymmetrySpec::torus(&phase, vec![rotation_generator(2, &[(0, 1.0), (1, 2.0)])], vec![])?;
    HamiltonianSystem::new("resonance_1_2", phase, sym, Arc::new(Polynomial::new(n, terms)?))
}

/// The origin with generator ξ = ω₁, where the z₁ plane is the kernel.
pub fn resonance_base(p: &ResonanceParams) -> (DVector<f64>, DVector<f64>) {
    (DVector::zeros(4), DVector::from_vec(vec![p.omega1]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_point_is_relative_equilibrium() {
        let w = [1.0, 2.5];
        let sys = oscillator_system(&w).unwrap();
        let z = DVector::from_vec(vec![0.3, -0.2, 0.7, 0.1]);
        let g = sys.augmented_gradient(&z, &DVector::from_vec(w.to_vec())).unwrap();
        assert!(g.norm() < 1e-14);
    }

    #[test]
    fn resonance_is_invariant() {
        assert!(resonance_system(&ResonanceParams::default()).is_ok());
    }
}
