//! The family of relative equilibria through a nondegenerate one, sampled on
//! an (η, α) grid, with rank and symplectic checks on its α = 0 slice Σ.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ser_vec;
use crate::error::{Error, Result};
use crate::linalg::{gram_schmidt, hstack, numerical_rank, pfaffian, singular_values};
use crate::reduction::ReducedProblem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistenceGrid {
    /// Values along each 𝔪 coordinate (tensor grid over dim 𝔪 axes).
    pub eta: Vec<f64>,
    /// Values along each 𝔤_{m_e} coordinate.
    pub alpha: Vec<f64>,
}

impl Default for PersistenceGrid {
    fn default() -> Self {
        let axis: Vec<f64> = (-2..=2).map(|i| 0.01 * i as f64).collect();
        Self { eta: axis.clone(), alpha: axis }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PersistenceSample {
    #[serde(serialize_with = "ser_vec")]
    pub eta: DVector<f64>,
    #[serde(serialize_with = "ser_vec")]
    pub alpha: DVector<f64>,
    #[serde(serialize_with = "ser_vec")]
    pub z: DVector<f64>,
    #[serde(serialize_with = "ser_vec")]
    pub xi: DVector<f64>,
    /// rank [𝔤·z | ∂z/∂η]: the tangent of Σ.
    pub sigma_rank: usize,
    /// rank [𝔤·z | ∂z/∂η | ∂z/∂α]: the tangent of S.
    pub surface_rank: usize,
    /// Pf(Tᵀ Ω T) for a G-orthonormal basis T of the tangent of Σ.
    pub pfaffian: f64,
    /// None when the sample solved; otherwise the error message.
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PersistenceReport {
    pub samples: Vec<PersistenceSample>,
    pub expected_sigma_rank: usize,
    pub expected_surface_rank: usize,
    /// Fraction of samples with the expected Σ rank and a Pfaffian above threshold.
    pub fraction_ok: f64,
    pub min_abs_pfaffian: f64,
    pub pfaffian_threshold: f64,
}

fn cartesian(axis: &[f64], dim: usize) -> Vec<DVector<f64>> {
    let mut out = vec![DVector::zeros(dim)];
    for d in 0..dim {
        out = out
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&x| {
                    let mut q = p.clone();
                    q[d] = x;
                    q
                })
            })
            .collect();
    }
    out
}

const FD_H: f64 = 1e-5;

fn sample(rp: &ReducedProblem, eta: &DVector<f64>, alpha: &DVector<f64>) -> PersistenceSample {
    let empty = DVector::zeros(0);
    let sys = &rp.sys;
    let point = |e: &DVector<f64>, a: &DVector<f64>| rp.solve(e, &empty, a).map(|s| (s.point, s.generator));
    let fail = |msg: String| PersistenceSample {
        eta: eta.clone(),
        alpha: alpha.clone(),
        z: DVector::zeros(sys.dim()),
        xi: DVector::zeros(sys.torus_rank()),
        sigma_rank: 0,
        surface_rank: 0,
        pfaffian: 0.0,
        error: Some(msg),
    };
    let (z, xi) = match point(eta, alpha) {
        Ok(p) => p,
        Err(e) => return fail(e.to_string()),
    };
    let deriv = |is_eta: bool, i: usize| -> Result<DVector<f64>> {
        let (mut ep, mut em, mut ap, mut am) = (eta.clone(), eta.clone(), alpha.clone(), alpha.clone());
        if is_eta {
            ep[i] += FD_H;
            em[i] -= FD_H;
        } else {
            ap[i] += FD_H;
            am[i] -= FD_H;
        }
        Ok((point(&ep, &ap)?.0 - point(&em, &am)?.0) / (2.0 * FD_H))
    };
    let collect = |is_eta: bool, n: usize| -> Result<DMatrix<f64>> {
        let mut m = DMatrix::zeros(sys.dim(), n);
        for i in 0..n {
            m.set_column(i, &deriv(is_eta, i)?);
        }
        Ok(m)
    };
    let (dz_eta, dz_alpha) = match (collect(true, eta.len()), collect(false, alpha.len())) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return fail(e.to_string()),
    };
    let orbit = sys.group_orbit_tangent(&z);
    let sigma = hstack(&[&orbit, &dz_eta]);
    let surface = hstack(&[&sigma, &dz_alpha]);
    let rank = |m: &DMatrix<f64>| {
        let s = singular_values(m).first().copied().unwrap_or(0.0);
        numerical_rank(m, 1e-6 * s)
    };
    let t = gram_schmidt(&sigma, sys.phase.inner(), 1e-6);
    let pf = if t.ncols().is_multiple_of(2) && t.ncols() > 0 { pfaffian(&(t.transpose() * sys.phase.omega() * &t)) } else { 0.0 };
    PersistenceSample {
        eta: eta.clone(),
        alpha: alpha.clone(),
        sigma_rank: rank(&sigma),
        surface_rank: rank(&surface),
        pfaffian: pf,
        z,
        xi,
        error: None,
    }
}

/// Sample S on the tensor grid, in parallel. Requires a trivial kernel.
pub fn persistence_surface(rp: &ReducedProblem, grid: &PersistenceGrid) -> Result<PersistenceReport> {
    if rp.kernel_dim() > 0 {
        return Err(Error::DegenerateKernel { dim: rp.kernel_dim() });
    }
    let r = rp.dec.dim_m();
    let h = rp.dec.dim_g_me();
    let etas = cartesian(&grid.eta, r);
    let alphas = cartesian(&grid.alpha, h);
    let pairs: Vec<(DVector<f64>, DVector<f64>)> = etas.iter().flat_map(|e| alphas.iter().map(move |a| (e.clone(), a.clone()))).collect();
    let omega_norm = singular_values(rp.sys.phase.omega()).first().copied().unwrap_or(0.0);
    let thresh = 1e-2 * omega_norm.powi(r as i32);
    let samples: Vec<PersistenceSample> = pairs.par_iter().map(|(e, a)| sample(rp, e, a)).collect();
    let expected = 2 * r;
    let ok = samples.iter().filter(|s| s.error.is_none() && s.sigma_rank == expected && s.pfaffian.abs() > thresh).count();
    let min_pf = samples.iter().filter(|s| s.error.is_none()).map(|s| s.pfaffian.abs()).fold(f64::INFINITY, f64::min);
    Ok(PersistenceReport {
        fraction_ok: ok as f64 / samples.len().max(1) as f64,
        min_abs_pfaffian: min_pf,
        pfaffian_threshold: thresh,
        expected_sigma_rank: expected,
        // the grid keeps v₀ = 0, so H_v = H and no isotropy directions are added
        expected_surface_rank: expected,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::wave::{base_point, wave_system, WaveParams};
    use crate::reduction::{build_reduced, NewtonOptions};
    use crate::slice::{build_slice, DEFAULT_TOL_RANK};

    #[test]
    fn wave_sigma_has_rank_two() {
        let p = WaveParams::default_with(0.8, 0.5);
        let sys = wave_system(&p).unwrap();
        let (z, xi) = base_point(&p);
        let dec = build_slice(&sys, &z, &xi, DEFAULT_TOL_RANK).unwrap();
        let rp = build_reduced(&sys, &dec, None, NewtonOptions::default()).unwrap();
        let grid = PersistenceGrid { eta: vec![-0.02, 0.0, 0.02], alpha: vec![0.0, 0.01] };
        let rep = persistence_surface(&rp, &grid).unwrap();
        assert_eq!(rep.samples.len(), 6);
        assert_eq!(rep.expected_sigma_rank, 2);
        assert_eq!(rep.fraction_ok, 1.0, "{:?}", rep.samples.iter().map(|s| (s.sigma_rank, s.pfaffian, &s.error)).collect::<Vec<_>>());
        // T = (e_x3, e_y3)/√2 is G-orthonormal for G = 2I, and Ω = 2J gives Pf = 1
        assert!((rep.min_abs_pfaffian - 1.0).abs() < 1e-3, "{}", rep.min_abs_pfaffian);
    }
}
