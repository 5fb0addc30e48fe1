//! Slice maps at a relative equilibrium.
//!
//! On a linear phase space the chart is the identity, and the slice map is
//! affine: Ψ(η, v) = z_e + V v + W η with DJ(z_e)·W = the 𝔪 basis.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{complement_in, hstack, null_space, rows, select_columns, singular_values, svd_full};
use crate::system::HamiltonianSystem;

#[derive(Debug, Clone)]
pub struct SliceDecomposition {
    pub base_point: DVector<f64>,
    pub generator: DVector<f64>,
    /// k × dim 𝔤_{m_e}, orthonormal.
    pub g_me_basis: DMatrix<f64>,
    /// k × dim 𝔪, orthonormal complement of 𝔤_{m_e}.
    pub m_basis: DMatrix<f64>,
    /// Always empty: for a torus 𝔤_μ = 𝔤.
    pub q_basis: DMatrix<f64>,
    /// 2n × ℓ, orthonormal in the reference inner product.
    pub v_basis: DMatrix<f64>,
    /// 2n × dim 𝔪; W η is the correction v + A⁻¹P*_𝔪 η.
    pub w_basis: DMatrix<f64>,
    pub tol_rank: f64,
    pub isotropy_singular_values: Vec<f64>,
    /// Condition number of 𝔪ᵀ DJ G⁻¹ DJᵀ 𝔪, the map inverted to build W.
    pub w_condition: f64,
    pub validity_radius: f64,
}

impl SliceDecomposition {
    pub fn dim_m(&self) -> usize {
        self.m_basis.ncols()
    }
    pub fn dim_g_me(&self) -> usize {
        self.g_me_basis.ncols()
    }
    pub fn dim_v(&self) -> usize {
        self.v_basis.ncols()
    }
    /// Full generator ξ + α + β in ℝ^k from coordinates on 𝔤_{m_e} and 𝔪.
    pub fn full_generator(&self, alpha: &DVector<f64>, beta: &DVector<f64>) -> DVector<f64> {
        &self.generator + &self.g_me_basis * alpha + &self.m_basis * beta
    }
}

pub const DEFAULT_TOL_RANK: f64 = 1e-8;

/// Split ℝ^k into the isotropy algebra (σ ≤ tol) and its complement 𝔪 using
/// the SVD of the orbit matrix [A₁z … A_kz]. Returns (𝔤_{m_e}, 𝔪, σ).
pub fn split_algebra(orbit: &DMatrix<f64>, tol_rank: f64) -> Result<(DMatrix<f64>, DMatrix<f64>, Vec<f64>)> {
    let k = orbit.ncols();
    if k == 0 {
        return Ok((DMatrix::zeros(0, 0), DMatrix::zeros(0, 0), vec![]));
    }
    let (sig, right) = svd_full(orbit);
    for &s in &sig {
        if s > tol_rank / 10.0 && s < 10.0 * tol_rank {
            return Err(Error::RankAmbiguous { value: s, lo: tol_rank / 10.0, hi: 10.0 * tol_rank });
        }
    }
    let m_idx: Vec<usize> = (0..k).filter(|&i| sig[i] > tol_rank).collect();
    let h_idx: Vec<usize> = (0..k).filter(|&i| sig[i] <= tol_rank).collect();
    Ok((select_columns(&right, &h_idx), select_columns(&right, &m_idx), sig))
}

/// Build 𝔤 = 𝔤_{m_e} ⊕ 𝔪 and the slice map at a relative equilibrium.
pub fn build_slice(sys: &HamiltonianSystem, z_e: &DVector<f64>, xi: &DVector<f64>, tol_rank: f64) -> Result<SliceDecomposition> {
    let n = sys.dim();
    let k = sys.torus_rank();
    if z_e.len() != n || xi.len() != k {
        return Err(Error::DimensionMismatch("base point or generator size".into()));
    }
    let grad = sys.augmented_gradient(z_e, xi)?;
    let tol_re = 1e-8 * (1.0 + sys.gradient(z_e)?.norm());
    if grad.norm() > tol_re {
        return Err(Error::NotARelativeEquilibrium { residual: grad.norm(), tol: tol_re });
    }
    let g = sys.phase.inner();
    let orbit = sys.group_orbit_tangent(z_e);
    let (g_me_basis, m_basis, sig) = split_algebra(&orbit, tol_rank)?;
    let r = m_basis.ncols();

    let dj = sys.momentum_jacobian(z_e);
    let dj_scale = singular_values(&dj).first().copied().unwrap_or(0.0).max(1.0);
    let ker = null_space(&dj, tol_rank * dj_scale);
    let m_orbit = &orbit * &m_basis;
    let v_basis = complement_in(&m_orbit, &ker, g, tol_rank * dj_scale);

    let (w_basis, w_condition) = if r > 0 {
        let g_inv = g.clone().try_inverse().ok_or_else(|| Error::InvalidModel("singular inner product".into()))?;
        let y = &g_inv * dj.transpose() * &m_basis;
        let gram = m_basis.transpose() * &dj * &y;
        let sv = singular_values(&gram);
        let cond = sv[0] / sv[sv.len() - 1];
        let inv = gram.try_inverse().ok_or_else(|| Error::InvalidModel("DJ restricted to W is singular".into()))?;
        (y * inv, cond)
    } else {
        (DMatrix::zeros(n, 0), 1.0)
    };

    if v_basis.ncols() + 2 * r != n {
        return Err(Error::DimensionMismatch(format!(
            "dim V ({}) + dim m ({r}) + dim g.z ({r}) != {n}",
            v_basis.ncols()
        )));
    }

    let mut dec = SliceDecomposition {
        base_point: z_e.clone(),
        generator: xi.clone(),
        g_me_basis,
        m_basis,
        q_basis: DMatrix::zeros(k, 0),
        v_basis,
        w_basis,
        tol_rank,
        isotropy_singular_values: sig,
        w_condition,
        validity_radius: f64::INFINITY,
    };
    dec.validity_radius = validity_radius(sys, &dec);
    Ok(dec)
}

/// 0.5 · σ_min(column-normalized SM2 matrix at the origin) divided by the
/// relative Lipschitz constant of the group-direction columns.
fn validity_radius(sys: &HamiltonianSystem, dec: &SliceDecomposition) -> f64 {
    if dec.dim_m() == 0 {
        return f64::INFINITY;
    }
    let sigma = sm2_matrix(sys, dec, &dec.base_point, true);
    let smin = singular_values(&sigma).last().copied().unwrap_or(0.0);
    let dpsi = hstack(&[&dec.w_basis, &dec.v_basis]);
    let mut lip: f64 = 0.0;
    for j in 0..dec.dim_m() {
        let a = sys.symmetry.generator(&dec.m_basis.column(j).into_owned());
        let col = &a * &dec.base_point;
        let d = singular_values(&(&a * &dpsi)).first().copied().unwrap_or(0.0);
        lip = lip.max(d / col.norm());
    }
    if lip == 0.0 {
        f64::INFINITY
    } else {
        0.5 * smin / lip
    }
}

fn sm2_matrix(sys: &HamiltonianSystem, dec: &SliceDecomposition, p: &DVector<f64>, normalize: bool) -> DMatrix<f64> {
    let mut group = DMatrix::zeros(sys.dim(), dec.dim_m());
    for j in 0..dec.dim_m() {
        let a = sys.symmetry.generator(&dec.m_basis.column(j).into_owned());
        group.set_column(j, &(a * p));
    }
    let mut m = hstack(&[&group, &dec.w_basis, &dec.v_basis]);
    if normalize {
        for mut c in m.column_iter_mut() {
            let nrm = c.norm();
            if nrm > 0.0 {
                c /= nrm;
            }
        }
    }
    m
}

/// Ψ(η, v) without the chart check.
pub fn slice_point(dec: &SliceDecomposition, eta: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    &dec.base_point + &dec.v_basis * v + &dec.w_basis * eta
}

pub fn slice_map(dec: &SliceDecomposition, eta: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
    if eta.len() != dec.dim_m() || v.len() != dec.dim_v() {
        return Err(Error::DimensionMismatch("slice coordinates".into()));
    }
    let norm = (eta.norm_squared() + v.norm_squared()).sqrt();
    if norm > dec.validity_radius {
        return Err(Error::OutOfChart { norm, radius: dec.validity_radius });
    }
    Ok(slice_point(dec, eta, v))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sm2Report {
    /// Smallest singular value of [(𝔪⊕𝔮)·Ψ | ∂Ψ/∂(η, v)].
    pub sigma_min: f64,
    /// Same after normalizing every column.
    pub sigma_min_normalized: f64,
    pub holds: bool,
}

pub fn verify_sm2(sys: &HamiltonianSystem, dec: &SliceDecomposition, eta: &DVector<f64>, v: &DVector<f64>) -> Sm2Report {
    let p = slice_point(dec, eta, v);
    let raw = singular_values(&sm2_matrix(sys, dec, &p, false));
    let nrm = singular_values(&sm2_matrix(sys, dec, &p, true));
    let sigma_min = raw.last().copied().unwrap_or(0.0);
    let sigma_min_normalized = nrm.last().copied().unwrap_or(0.0);
    Sm2Report { sigma_min, sigma_min_normalized, holds: sigma_min_normalized > dec.tol_rank }
}

/// Action of a symmetry matrix g (fixing z_e, commuting with A_ξ up to a
/// permutation of generators) on the slice coordinates (η, v).
pub fn induced_action(sys: &HamiltonianSystem, dec: &SliceDecomposition, g: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let k = sys.torus_rank();
    let gi = g.clone().try_inverse().ok_or_else(|| Error::InvalidModel("singular group element".into()))?;
    // g A_i g⁻¹ = Σ_l P_li A_l
    let n2 = sys.dim() * sys.dim();
    let mut basis = DMatrix::zeros(n2, k);
    for (i, a) in sys.symmetry.generators().iter().enumerate() {
        basis.set_column(i, &DVector::from_column_slice(a.as_slice()));
    }
    let mut p = DMatrix::zeros(k, k);
    for (i, a) in sys.symmetry.generators().iter().enumerate() {
        let c = g * a * &gi;
        let coeffs = crate::linalg::lstsq(&basis, &DVector::from_column_slice(c.as_slice()), 1e-12);
        p.set_column(i, &coeffs);
    }
    let eta_action = dec.m_basis.transpose() * &p * &dec.m_basis;
    let v_action = dec.v_basis.transpose() * sys.phase.inner() * g * &dec.v_basis;
    Ok((eta_action, v_action))
}

#[derive(Debug, Clone, Serialize)]
pub struct SliceExport {
    pub base_point: Vec<f64>,
    pub generator: Vec<f64>,
    pub g_me_basis: Vec<Vec<f64>>,
    pub m_basis: Vec<Vec<f64>>,
    pub q_basis: Vec<Vec<f64>>,
    pub v_basis: Vec<Vec<f64>>,
    pub w_basis: Vec<Vec<f64>>,
    pub tol_rank: f64,
    pub isotropy_singular_values: Vec<f64>,
    pub w_condition: f64,
    pub validity_radius: Option<f64>,
}

impl From<&SliceDecomposition> for SliceExport {
    fn from(d: &SliceDecomposition) -> Self {
        Self {
            base_point: d.base_point.iter().copied().collect(),
            generator: d.generator.iter().copied().collect(),
            g_me_basis: rows(&d.g_me_basis),
            m_basis: rows(&d.m_basis),
            q_basis: rows(&d.q_basis),
            v_basis: rows(&d.v_basis),
            w_basis: rows(&d.w_basis),
            tol_rank: d.tol_rank,
            isotropy_singular_values: d.isotropy_singular_values.clone(),
            w_condition: d.w_condition,
            validity_radius: d.validity_radius.is_finite().then_some(d.validity_radius),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::wave::{base_point, from_complex, wave_system, WaveParams};

    #[test]
    fn wave_dimensions_and_eta_direction() {
        let p = WaveParams::default_with(1.0, 0.5);
        let sys = wave_system(&p).unwrap();
        let (z, xi) = base_point(&p);
        let dec = build_slice(&sys, &z, &xi, DEFAULT_TOL_RANK).unwrap();
        assert_eq!(dec.dim_g_me(), 1);
        assert_eq!(dec.dim_m(), 1);
        assert_eq!(dec.dim_v(), 6);
        let eta = DVector::from_vec(vec![0.2]);
        let psi = slice_map(&dec, &eta, &DVector::zeros(6)).unwrap();
        let sign = dec.m_basis[(0, 0)];
        let expect = from_complex(&[(0.0, 0.0), (0.0, 0.0), (1.0 + sign * 0.2 / 4.0, 0.0), (0.0, 0.0)]);
        assert!((psi - expect).norm() < 1e-14);
    }

    #[test]
    fn rejects_non_equilibrium() {
        let p = WaveParams::default_with(1.0, 0.5);
        let sys = wave_system(&p).unwrap();
        let (z, _) = base_point(&p);
        let xi = DVector::from_vec(vec![0.3, 0.5]);
        assert!(matches!(build_slice(&sys, &z, &xi, DEFAULT_TOL_RANK), Err(Error::NotARelativeEquilibrium { .. })));
    }

    #[test]
    fn out_of_chart_reported() {
        let p = WaveParams::default_with(1.0, 0.5);
        let sys = wave_system(&p).unwrap();
        let (z, xi) = base_point(&p);
        let dec = build_slice(&sys, &z, &xi, DEFAULT_TOL_RANK).unwrap();
        let eta = DVector::from_vec(vec![10.0]);
        assert!(matches!(slice_map(&dec, &eta, &DVector::zeros(6)), Err(Error::OutOfChart { .. })));
    }
}
