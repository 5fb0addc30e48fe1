//! Formal stability from the stability form: D²(h − J^ξ)(z) restricted to
//! W = ker DJ(z) ∩ (𝔤·z)^⊥.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::Stability;
use crate::error::Result;
use crate::linalg::{complement_in, null_space, singular_values, sym, sym_eigen_sorted};
use crate::system::HamiltonianSystem;

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub eigs: Vec<f64>,
    pub verdict: Stability,
    pub min_abs: f64,
    pub dim_w: usize,
    pub tol: f64,
}

/// Basis of W, orthonormal in the reference inner product.
pub fn stability_space(sys: &HamiltonianSystem, z: &DVector<f64>) -> DMatrix<f64> {
    let dj = sys.momentum_jacobian(z);
    let scale = singular_values(&dj).first().copied().unwrap_or(0.0).max(1.0);
    let ker = null_space(&dj, 1e-9 * scale);
    complement_in(&sys.group_orbit_tangent(z), &ker, sys.phase.inner(), 1e-9 * scale)
}

/// Eigenvalues of the stability form, ascending, and the basis of W.
pub fn stability_form(sys: &HamiltonianSystem, z: &DVector<f64>, xi: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let w = stability_space(sys, z);
    let h = sys.augmented_hessian(z, xi)?;
    let (vals, _) = sym_eigen_sorted(&sym(&(w.transpose() * h * &w)));
    Ok((vals, w))
}

/// Verdict with degeneracy threshold `tol` (default 1e-7 · max |λ|).
pub fn formal_stability(sys: &HamiltonianSystem, z: &DVector<f64>, xi: &DVector<f64>, tol: Option<f64>) -> Result<StabilityReport> {
    let (vals, w) = stability_form(sys, z, xi)?;
    let eigs: Vec<f64> = vals.iter().copied().collect();
    let max = eigs.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let tol = tol.unwrap_or(1e-7 * max);
    let min_abs = eigs.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
    let verdict = if eigs.is_empty() {
        Stability::DefinitePlus
    } else if min_abs <= tol {
        Stability::Degenerate
    } else if eigs.iter().all(|&v| v > 0.0) {
        Stability::DefinitePlus
    } else if eigs.iter().all(|&v| v < 0.0) {
        Stability::DefiniteMinus
    } else {
        Stability::Indefinite
    };
    Ok(StabilityReport { eigs, verdict, min_abs, dim_w: w.ncols(), tol })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::oscillator_system;

    #[test]
    fn oscillator_is_definite() {
        let sys = oscillator_system(&[1.0, 2.0]).unwrap();
        let z = DVector::from_vec(vec![0.5, 0.0, 0.0, 0.0]);
        let xi = DVector::from_vec(vec![1.0, 1.5]);
        // z₂ = 0: the z₂ plane is in W with eigenvalue ω₂ − ξ₂ = 0.5
        let r = formal_stability(&sys, &z, &xi, None).unwrap();
        assert_eq!(r.dim_w, 2);
        assert_eq!(r.verdict, Stability::DefinitePlus);
    }

    #[test]
    fn circle_orbit_has_empty_w() {
        let sys = oscillator_system(&[1.0]).unwrap();
        let z = DVector::from_vec(vec![0.5, 0.0]);
        let r = formal_stability(&sys, &z, &DVector::from_vec(vec![1.0]), None).unwrap();
        assert_eq!(r.dim_w, 0);
        assert_eq!(r.verdict, Stability::DefinitePlus);
    }
}
