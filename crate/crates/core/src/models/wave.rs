//! The 1:2 wave-resonance family on C⁴ with O(2)×S¹ symmetry.
//!
//! The Hamiltonian is a polynomial in the invariants
//! X_j = |z_j|² and U_k = Re(z_k² z̄_{k+2}), symmetric under the simultaneous
//! swap X₁↔X₂, X₃↔X₄, U₁↔U₂. Complex pairs are interleaved as (x_j, y_j).

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polynomial::{Polynomial, Term};
use crate::system::{pair_permutation, rotation_generator, Hamiltonian, HamiltonianSystem, PhaseSpace, SymmetrySpec};

/// Monomial in (X₁, X₂, X₃, X₄, U₁, U₂).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantTerm {
    pub coeff: f64,
    pub exponents: [u32; 6],
}

impl InvariantTerm {
    pub fn new(coeff: f64, exponents: [u32; 6]) -> Self {
        Self { coeff, exponents }
    }
}

fn swap_exponents(e: [u32; 6]) -> [u32; 6] {
    [e[1], e[0], e[3], e[2], e[5], e[4]]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveParams {
    #[serde(default = "default_terms")]
    pub terms: Vec<InvariantTerm>,
    /// Amplitude of the base point (0, 0, C, 0).
    #[serde(rename = "C")]
    pub c: f64,
    /// Second generator component at the base point.
    #[serde(default = "default_xi2")]
    pub xi2: f64,
}

fn default_xi2() -> f64 {
    0.5
}

/// h = X₁+X₂+2(X₃+X₄)+(U₁+U₂) − (X₁X₃+X₂X₄) + ½(X₁X₄+X₂X₃).
pub fn default_terms() -> Vec<InvariantTerm> {
    vec![
        InvariantTerm::new(1.0, [1, 0, 0, 0, 0, 0]),
        InvariantTerm::new(1.0, [0, 1, 0, 0, 0, 0]),
        InvariantTerm::new(2.0, [0, 0, 1, 0, 0, 0]),
        InvariantTerm::new(2.0, [0, 0, 0, 1, 0, 0]),
        InvariantTerm::new(1.0, [0, 0, 0, 0, 1, 0]),
        InvariantTerm::new(1.0, [0, 0, 0, 0, 0, 1]),
        InvariantTerm::new(-1.0, [1, 0, 1, 0, 0, 0]),
        InvariantTerm::new(-1.0, [0, 1, 0, 1, 0, 0]),
        InvariantTerm::new(0.5, [1, 0, 0, 1, 0, 0]),
        InvariantTerm::new(0.5, [0, 1, 1, 0, 0, 0]),
    ]
}

impl WaveParams {
    pub fn default_with(c: f64, xi2: f64) -> Self {
        Self { terms: default_terms(), c, xi2 }
    }

    /// Invariant polynomial P(X, U).
    pub fn invariant_polynomial(&self) -> Polynomial {
        Polynomial::new(
            6,
            self.terms
                .iter()
                .map(|t| Term { coeff: t.coeff, monomial: t.exponents.to_vec() })
                .collect(),
        )
        .expect("six exponents")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidModel(format!("C must be positive, got {}", self.c)));
        }
        let mut coeffs: BTreeMap<[u32; 6], f64> = BTreeMap::new();
        for t in &self.terms {
            *coeffs.entry(t.exponents).or_insert(0.0) += t.coeff;
        }
        let scale = coeffs.values().fold(0.0_f64, |a, c| a.max(c.abs())).max(1.0);
        for (e, c) in &coeffs {
            let partner = coeffs.get(&swap_exponents(*e)).copied().unwrap_or(0.0);
            if (c - partner).abs() > 1e-14 * scale {
                return Err(Error::SymmetryViolation(format!(
                    "term with exponents {e:?} (coeff {c}) has swap partner coeff {partner}"
                )));
            }
        }
        let r = self.partials_at(&base_invariants(self.c));
        if r.b[0] == 0.0 {
            return Err(Error::InvalidModel("b1 vanishes at the base point".into()));
        }
        Ok(())
    }

    /// a_j = ∂P/∂X_j and b_k = ∂P/∂U_k at the given invariant values.
    pub fn partials_at(&self, inv: &[f64; 6]) -> Partials {
        let g = self.invariant_polynomial().grad(inv);
        Partials { a: [g[0], g[1], g[2], g[3]], b: [g[4], g[5]] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Partials {
    pub a: [f64; 4],
    pub b: [f64; 2],
}

pub fn base_invariants(c: f64) -> [f64; 6] {
    [0.0, 0.0, c * c, 0.0, 0.0, 0.0]
}

/// Real vector from complex amplitudes given as (re, im) pairs.
pub fn from_complex(z: &[(f64, f64)]) -> DVector<f64> {
    DVector::from_iterator(2 * z.len(), z.iter().flat_map(|&(x, y)| [x, y]))
}

/// Complex amplitude j of a real vector.
pub fn pair(z: &DVector<f64>, j: usize) -> (f64, f64) {
    (z[2 * j], z[2 * j + 1])
}

/// (X₁, X₂, X₃, X₄, U₁, U₂) of a point.
pub fn invariants(z: &DVector<f64>) -> [f64; 6] {
    let p: Vec<(f64, f64)> = (0..4).map(|j| pair(z, j)).collect();
    let u = |k: usize| {
        let (x, y) = p[k];
        let (x3, y3) = p[k + 2];
        (x * x - y * y) * x3 + 2.0 * x * y * y3
    };
    [
        p[0].0 * p[0].0 + p[0].1 * p[0].1,
        p[1].0 * p[1].0 + p[1].1 * p[1].1,
        p[2].0 * p[2].0 + p[2].1 * p[2].1,
        p[3].0 * p[3].0 + p[3].1 * p[3].1,
        u(0),
        u(1),
    ]
}

/// Gradients (6 × 8) and Hessians of the invariants.
fn invariant_derivatives(z: &DVector<f64>) -> (DMatrix<f64>, Vec<DMatrix<f64>>) {
    let mut grads = DMatrix::zeros(6, 8);
    let mut hess = vec![DMatrix::zeros(8, 8); 6];
    for j in 0..4 {
        let (x, y) = pair(z, j);
        grads[(j, 2 * j)] = 2.0 * x;
        grads[(j, 2 * j + 1)] = 2.0 * y;
        hess[j][(2 * j, 2 * j)] = 2.0;
        hess[j][(2 * j + 1, 2 * j + 1)] = 2.0;
    }
    for k in 0..2 {
        let (i, j) = (k, k + 2);
        let (x, y) = pair(z, i);
        let (x3, y3) = pair(z, j);
        let (ix, iy, jx, jy) = (2 * i, 2 * i + 1, 2 * j, 2 * j + 1);
        let r = 4 + k;
        grads[(r, ix)] = 2.0 * x * x3 + 2.0 * y * y3;
        grads[(r, iy)] = -2.0 * y * x3 + 2.0 * x * y3;
        grads[(r, jx)] = x * x - y * y;
        grads[(r, jy)] = 2.0 * x * y;
        let h = &mut hess[r];
        let mut set = |a: usize, b: usize, v: f64| {
            h[(a, b)] = v;
            h[(b, a)] = v;
        };
        set(ix, ix, 2.0 * x3);
        set(ix, iy, 2.0 * y3);
        set(ix, jx, 2.0 * x);
        set(ix, jy, 2.0 * y);
        set(iy, iy, -2.0 * x3);
        set(iy, jx, -2.0 * y);
        set(iy, jy, 2.0 * x);
    }
    (grads, hess)
}

/// h(z) = P(X(z), U(z)) with chain-rule derivatives.
#[derive(Debug, Clone)]
pub struct WaveHamiltonian {
    poly: Polynomial,
}

impl WaveHamiltonian {
    pub fn new(params: &WaveParams) -> Self {
        Self { poly: params.invariant_polynomial() }
    }
}

impl Hamiltonian for WaveHamiltonian {
    fn dim(&self) -> usize {
        8
    }
    fn value(&self, z: &DVector<f64>) -> f64 {
        self.poly.eval(&invariants(z))
    }
    fn gradient(&self, z: &DVector<f64>) -> Option<DVector<f64>> {
        let inv = invariants(z);
        let p = DVector::from_vec(self.poly.grad(&inv));
        let (g, _) = invariant_derivatives(z);
        Some(g.transpose() * p)
    }
    fn hessian(&self, z: &DVector<f64>) -> Option<DMatrix<f64>> {
        let inv = invariants(z);
        let p = self.poly.grad(&inv);
        let pp = self.poly.hess(&inv);
        let (g, hs) = invariant_derivatives(z);
        let mut h = DMatrix::zeros(8, 8);
        for (a, ha) in hs.iter().enumerate() {
            h += ha * p[a];
        }
        let ppm = DMatrix::from_fn(6, 6, |i, j| pp[i][j]);
        h += g.transpose() * ppm * &g;
        Some(h)
    }
}

/// Torus generators: A₁ rotates z₁ (weight 1) and z₃ (weight 2); A₂ does
/// the same for z₂, z₄. The finite element swaps z₁↔z₂, z₃↔z₄.
pub fn wave_system(params: &WaveParams) -> Result<HamiltonianSystem> {
    params.validate()?;
    let phase = PhaseSpace::complex(4);
    let a1 = rotation_generator(4, &[(0, 1.0), (2, 2.0)]);
    let a2 = rotation_generator(4, &[(1, 1.0), (3, 2.0)]);
    let swap = pair_permutation(&[1, 0, 3, 2]);
    let sym = SymmetrySpec::torus(&phase, vec![a1, a2], vec![swap])?;
    HamiltonianSystem::new("wave_resonance", phase, sym, Arc::new(WaveHamiltonian::new(params)))
}

/// Base point z_e = (0, 0, C, 0) and generator (ξ̂₁, ξ₂), ξ̂₁ = a₃/2.
pub fn base_point(params: &WaveParams) -> (DVector<f64>, DVector<f64>) {
    let z = from_complex(&[(0.0, 0.0), (0.0, 0.0), (params.c, 0.0), (0.0, 0.0)]);
    let p = params.partials_at(&base_invariants(params.c));
    (z, DVector::from_vec(vec![0.5 * p.a[2], params.xi2]))
}

/// Closed-form quantities at the base point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WaveReference {
    pub a: [f64; 4],
    pub b: [f64; 2],
    pub xi1_hat: f64,
    pub lambda1_plus: f64,
    pub lambda1_minus: f64,
    pub lambda2: f64,
    pub lambda4: f64,
    /// Slope of the z₃ amplitude shift against s = x₁² on the λ₁ pitchfork.
    pub pitchfork_slope: f64,
}

impl WaveReference {
    /// The six eigenvalues of the second variation on V, ascending.
    pub fn spectrum(&self) -> Vec<f64> {
        let mut v = vec![self.lambda1_plus, self.lambda1_minus, self.lambda2, self.lambda2, self.lambda4, self.lambda4];
        v.sort_by(f64::total_cmp);
        v
    }
}

pub fn wave_reference(params: &WaveParams) -> WaveReference {
    let c = params.c;
    let p = params.partials_at(&base_invariants(c));
    let (a, b) = (p.a, p.b);
    WaveReference {
        a,
        b,
        xi1_hat: 0.5 * a[2],
        lambda1_plus: a[0] - 0.5 * a[2] + c * b[0],
        lambda1_minus: a[0] - 0.5 * a[2] - c * b[0],
        lambda2: a[1] - params.xi2,
        lambda4: a[3] - 2.0 * params.xi2,
        pitchfork_slope: 1.0 / (4.0 * c),
    }
}

/// n(η) = C + η/(4C).
pub fn n_of_eta(c: f64, eta: f64) -> f64 {
    c + eta / (4.0 * c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_reference_values() {
        let r = wave_reference(&WaveParams::default_with(0.8, 0.5));
        assert!((r.lambda1_plus - 0.8 * 0.2).abs() < 1e-15);
        assert!((r.lambda1_minus - (-0.64 - 0.8)).abs() < 1e-15);
        assert!((r.lambda2 - (1.0 + 0.32 - 0.5)).abs() < 1e-15);
        assert!((r.lambda4 - 1.0).abs() < 1e-15);
        assert!((r.xi1_hat - 1.0).abs() < 1e-15);
    }

    #[test]
    fn asymmetric_terms_rejected() {
        let mut p = WaveParams::default_with(1.0, 0.5);
        p.terms.push(InvariantTerm::new(0.3, [2, 0, 0, 0, 0, 0]));
        assert!(matches!(p.validate(), Err(Error::SymmetryViolation(_))));
    }

    #[test]
    fn momentum_matches_printed_formula() {
        let sys = wave_system(&WaveParams::default_with(1.0, 0.5)).unwrap();
        let z = from_complex(&[(0.1, 0.2), (-0.3, 0.4), (0.5, -0.6), (0.7, 0.05)]);
        let j = sys.momentum(&z);
        let inv = invariants(&z);
        assert!((j[0] - (inv[0] + 2.0 * inv[2])).abs() < 1e-14);
        assert!((j[1] - (inv[1] + 2.0 * inv[3])).abs() < 1e-14);
    }
}
