//! Hamiltonian systems on a linear symplectic space with a linear torus action.
//!
//! Conventions: X_f = Ω⁻¹∇f, and the momentum map is Jᵢ(z) = ½ zᵀΩAᵢz so that
//! X_{Jᵢ}(z) = Aᵢz. Relative equilibria are the critical points of h − J^ξ.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{max_abs, sym, sym_eigen_sorted};

pub trait Hamiltonian: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, z: &DVector<f64>) -> f64;
    fn gradient(&self, _z: &DVector<f64>) -> Option<DVector<f64>> {
        None
    }
    fn hessian(&self, _z: &DVector<f64>) -> Option<DMatrix<f64>> {
        None
    }
}

#[derive(Debug, Clone)]
pub struct PhaseSpace {
    omega: DMatrix<f64>,
    omega_inv: DMatrix<f64>,
    inner: DMatrix<f64>,
}

/// Block [[0, s], [-s, 0]] on each interleaved (x_j, y_j) pair.
fn paired_form(pairs: usize, s: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(2 * pairs, 2 * pairs);
    for j in 0..pairs {
        m[(2 * j, 2 * j + 1)] = s;
        m[(2 * j + 1, 2 * j)] = -s;
    }
    m
}

impl PhaseSpace {
    pub fn new(omega: DMatrix<f64>, inner: DMatrix<f64>) -> Result<Self> {
        let n = omega.nrows();
        if n == 0 || n % 2 == 1 || omega.ncols() != n {
            return Err(Error::InvalidModel(format!("omega must be square of even size, got {:?}", omega.shape())));
        }
        if inner.shape() != (n, n) {
            return Err(Error::DimensionMismatch("inner product size".into()));
        }
        if max_abs(&(&omega + omega.transpose())) != 0.0 {
            return Err(Error::InvalidModel("omega is not antisymmetric".into()));
        }
        let omega_inv = omega
            .clone()
            .try_inverse()
            .filter(|_| omega.determinant().abs() > 0.0)
            .ok_or_else(|| Error::InvalidModel("omega is singular".into()))?;
        if max_abs(&(&inner - inner.transpose())) > 1e-14 * max_abs(&inner) {
            return Err(Error::InvalidModel("inner product is not symmetric".into()));
        }
        let (vals, _) = sym_eigen_sorted(&inner);
        if vals[0] <= 0.0 {
            return Err(Error::InvalidModel("inner product is not positive definite".into()));
        }
        Ok(Self { omega, omega_inv, inner })
    }

    /// Standard form on interleaved (x_j, y_j) pairs with the Euclidean inner product.
    pub fn standard(pairs: usize) -> Self {
        Self::new(paired_form(pairs, 1.0), DMatrix::identity(2 * pairs, 2 * pairs)).expect("standard form")
    }

    /// Complex-amplitude convention: ω = 2·standard, inner = 2·I, so that
    /// |z_j|² generates z_j ↦ e^{it} z_j and second variations match the
    /// Wirtinger-calculus eigenvalues.
    pub fn complex(pairs: usize) -> Self {
        Self::new(paired_form(pairs, 2.0), DMatrix::identity(2 * pairs, 2 * pairs) * 2.0).expect("complex form")
    }

    pub fn dim(&self) -> usize {
        self.omega.nrows()
    }
    pub fn omega(&self) -> &DMatrix<f64> {
        &self.omega
    }
    pub fn omega_inv(&self) -> &DMatrix<f64> {
        &self.omega_inv
    }
    pub fn inner(&self) -> &DMatrix<f64> {
        &self.inner
    }
}

/// Rotation generator of weight `w` on complex pair `j`: (x, y) ↦ w·(−y, x).
pub fn rotation_generator(pairs: usize, weights: &[(usize, f64)]) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(2 * pairs, 2 * pairs);
    for &(j, w) in weights {
        a[(2 * j, 2 * j + 1)] = -w;
        a[(2 * j + 1, 2 * j)] = w;
    }
    a
}

/// Matrix permuting complex pairs (no conjugation): pair j goes to perm[j].
pub fn pair_permutation(perm: &[usize]) -> DMatrix<f64> {
    let n = 2 * perm.len();
    let mut g = DMatrix::zeros(n, n);
    for (j, &pj) in perm.iter().enumerate() {
        g[(2 * pj, 2 * j)] = 1.0;
        g[(2 * pj + 1, 2 * j + 1)] = 1.0;
    }
    g
}

#[derive(Debug, Clone)]
pub struct SymmetrySpec {
    generators: Vec<DMatrix<f64>>,
    finite_elements: Vec<DMatrix<f64>>,
    structure_constants: Vec<f64>,
}

impl SymmetrySpec {
    /// Torus action plus a finite group; validates every invariant that does
    /// not involve the Hamiltonian.
    pub fn torus(
        phase: &PhaseSpace,
        generators: Vec<DMatrix<f64>>,
        finite_elements: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        let n = phase.dim();
        let om = phase.omega();
        let g = phase.inner();
        for (i, a) in generators.iter().enumerate() {
            if a.shape() != (n, n) {
                return Err(Error::DimensionMismatch(format!("generator {i} has shape {:?}", a.shape())));
            }
            let oa = om * a;
            let defect = max_abs(&(&oa + a.transpose() * om));
            if defect > 1e-12 * max_abs(&oa).max(f64::MIN_POSITIVE) {
                return Err(Error::SymmetryViolation(format!("generator {i} is not infinitesimally symplectic ({defect:e})")));
            }
            for t in [0.37, 1.91] {
                let e = (a * t).exp();
                let d = max_abs(&(e.transpose() * g * &e - g));
                if d > 1e-10 * max_abs(g) {
                    return Err(Error::SymmetryViolation(format!("inner product not invariant under exp(t A{i}) ({d:e})")));
                }
            }
        }
        for i in 0..generators.len() {
            for j in i + 1..generators.len() {
                let c = &generators[i] * &generators[j] - &generators[j] * &generators[i];
                if max_abs(&c) > 1e-12 * (1.0 + max_abs(&generators[i]) * max_abs(&generators[j])) {
                    return Err(Error::SymmetryViolation(format!("generators {i} and {j} do not commute")));
                }
            }
        }
        let id = DMatrix::<f64>::identity(n, n);
        for (i, e) in finite_elements.iter().enumerate() {
            if e.shape() != (n, n) {
                return Err(Error::DimensionMismatch(format!("finite element {i} has shape {:?}", e.shape())));
            }
            if max_abs(&(e.transpose() * om * e - om)) > 1e-12 * max_abs(om) {
                return Err(Error::SymmetryViolation(format!("finite element {i} is not symplectic")));
            }
            if max_abs(&(e.transpose() * g * e - g)) > 1e-12 * max_abs(g) {
                return Err(Error::SymmetryViolation(format!("inner product not invariant under finite element {i}")));
            }
        }
        let close = |m: &DMatrix<f64>| {
            max_abs(&(m - &id)) <= 1e-10 || finite_elements.iter().any(|f| max_abs(&(m - f)) <= 1e-10)
        };
        for a in &finite_elements {
            for b in &finite_elements {
                if !close(&(a * b)) {
                    return Err(Error::SymmetryViolation("finite elements are not closed under product".into()));
                }
            }
        }
        let k = generators.len();
        Ok(Self {
            generators,
            finite_elements,
            structure_constants: vec![0.0; k * k * k],
        })
    }

    pub fn rank(&self) -> usize {
        self.generators.len()
    }
    pub fn generators(&self) -> &[DMatrix<f64>] {
        &self.generators
    }
    pub fn finite_elements(&self) -> &[DMatrix<f64>] {
        &self.finite_elements
    }
    /// Structure constants c[i*k*k + j*k + l] of [e_i, e_j] = Σ_l c_ijl e_l (zero for a torus).
    pub fn structure_constants(&self) -> &[f64] {
        &self.structure_constants
    }

    /// A_ξ = Σ ξᵢAᵢ.
    pub fn generator(&self, xi: &DVector<f64>) -> DMatrix<f64> {
        let n = self.generators.first().map(|a| a.nrows()).unwrap_or(0);
        let mut m = DMatrix::zeros(n, n);
        for (a, &x) in self.generators.iter().zip(xi.iter()) {
            m += a * x;
        }
        m
    }

    /// The torus element exp(A_θ).
    pub fn group_element(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        self.generator(theta).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub orbit_drift: f64,
    pub momentum_drift: f64,
}

#[derive(Clone)]
pub struct HamiltonianSystem {
    pub phase: PhaseSpace,
    pub symmetry: SymmetrySpec,
    h: Arc<dyn Hamiltonian>,
    s_mats: Vec<DMatrix<f64>>,
    pub fd_step: f64,
    pub name: String,
}

impl fmt::Debug for HamiltonianSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HamiltonianSystem")
            .field("name", &self.name)
            .field("dim", &self.phase.dim())
            .field("torus_rank", &self.symmetry.rank())
            .finish()
    }
}

/// Deterministic sample points for structural checks.
pub(crate) fn probe_points(n: usize, count: usize, scale: f64) -> Vec<DVector<f64>> {
    (0..count)
        .map(|p| DVector::from_fn(n, |i, _| scale * ((1.7 * (i + 1) as f64 + 2.3 * (p + 1) as f64).sin() + 0.3 * ((i * p) as f64).cos())))
        .collect()
}

impl HamiltonianSystem {
    pub fn new(name: impl Into<String>, phase: PhaseSpace, symmetry: SymmetrySpec, h: Arc<dyn Hamiltonian>) -> Result<Self> {
        let n = phase.dim();
        if h.dim() != n {
            return Err(Error::DimensionMismatch(format!("hamiltonian in {} variables, phase space {}", h.dim(), n)));
        }
        let s_mats = symmetry.generators().iter().map(|a| sym(&(phase.omega() * a))).collect();
        let sys = Self { phase, symmetry, h, s_mats, fd_step: 1e-6, name: name.into() };
        sys.check_invariance()?;
        Ok(sys)
    }

    fn check_invariance(&self) -> Result<()> {
        let n = self.dim();
        for z in probe_points(n, 4, 0.6) {
            let h0 = self.energy(&z);
            let tol = 1e-10 * (1.0 + h0.abs());
            for (i, g) in self.symmetry.finite_elements().iter().enumerate() {
                let d = (self.energy(&(g * &z)) - h0).abs();
                if d > tol {
                    return Err(Error::SymmetryViolation(format!("h not invariant under finite element {i} ({d:e})")));
                }
            }
            for (i, a) in self.symmetry.generators().iter().enumerate() {
                for t in [0.37, 1.91, 4.2] {
                    let d = (self.energy(&((a * t).exp() * &z)) - h0).abs();
                    if d > tol {
                        return Err(Error::SymmetryViolation(format!("h not invariant under exp(t A{i}) ({d:e})")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.phase.dim()
    }
    pub fn torus_rank(&self) -> usize {
        self.symmetry.rank()
    }
    pub fn hamiltonian(&self) -> &dyn Hamiltonian {
        self.h.as_ref()
    }
    pub fn has_analytic_gradient(&self) -> bool {
        self.h.gradient(&DVector::zeros(self.dim())).is_some()
    }
    pub fn has_analytic_hessian(&self) -> bool {
        self.h.hessian(&DVector::zeros(self.dim())).is_some()
    }

    pub fn energy(&self, z: &DVector<f64>) -> f64 {
        self.h.value(z)
    }

    fn fd_base_step(&self, z: &DVector<f64>, rel: f64) -> Result<f64> {
        let step = rel * (1.0 + z.norm());
        let zmax = z.amax();
        if (zmax + step) - zmax == 0.0 || !step.is_finite() {
            return Err(Error::FdStepDegenerate { norm: z.norm() });
        }
        Ok(step)
    }

    /// Central-difference gradient of the energy.
    pub fn fd_gradient(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        let h = self.fd_base_step(z, self.fd_step)?;
        let mut g = DVector::zeros(self.dim());
        let mut zp = z.clone();
        for i in 0..self.dim() {
            zp[i] = z[i] + h;
            let fp = self.energy(&zp);
            zp[i] = z[i] - h;
            let fm = self.energy(&zp);
            zp[i] = z[i];
            g[i] = (fp - fm) / (2.0 * h);
        }
        Ok(g)
    }

    /// Finite-difference Hessian: central differences of the analytic gradient
    /// when available, otherwise second differences of values with a larger step.
    pub fn fd_hessian(&self, z: &DVector<f64>) -> Result<DMatrix<f64>> {
        let n = self.dim();
        let mut hm = DMatrix::zeros(n, n);
        if self.has_analytic_gradient() {
            let h = self.fd_base_step(z, self.fd_step)?;
            let mut zp = z.clone();
            for j in 0..n {
                zp[j] = z[j] + h;
                let gp = self.gradient(&zp)?;
                zp[j] = z[j] - h;
                let gm = self.gradient(&zp)?;
                zp[j] = z[j];
                hm.set_column(j, &((gp - gm) / (2.0 * h)));
            }
        } else {
            let h = self.fd_base_step(z, 1e-4)?;
            let f0 = self.energy(z);
            let mut zp = z.clone();
            for i in 0..n {
                for j in i..n {
                    let v = if i == j {
                        zp[i] = z[i] + h;
                        let fp = self.energy(&zp);
                        zp[i] = z[i] - h;
                        let fm = self.energy(&zp);
                        zp[i] = z[i];
                        (fp - 2.0 * f0 + fm) / (h * h)
                    } else {
                        let mut e = |si: f64, sj: f64| {
                            zp[i] = z[i] + si * h;
                            zp[j] = z[j] + sj * h;
                            let f = self.energy(&zp);
                            zp[i] = z[i];
                            zp[j] = z[j];
                            f
                        };
                        (e(1.0, 1.0) - e(1.0, -1.0) - e(-1.0, 1.0) + e(-1.0, -1.0)) / (4.0 * h * h)
                    };
                    hm[(i, j)] = v;
                    hm[(j, i)] = v;
                }
            }
        }
        Ok(sym(&hm))
    }

    pub fn gradient(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        match self.h.gradient(z) {
            Some(g) => Ok(g),
            None => self.fd_gradient(z),
        }
    }

    pub fn hessian(&self, z: &DVector<f64>) -> Result<DMatrix<f64>> {
        match self.h.hessian(z) {
            Some(h) => Ok(sym(&h)),
            None => self.fd_hessian(z),
        }
    }

    /// Symmetric matrices Sᵢ = ΩAᵢ with Jᵢ(z) = ½zᵀSᵢz.
    pub fn momentum_forms(&self) -> &[DMatrix<f64>] {
        &self.s_mats
    }

    /// S_ξ = Σ ξᵢSᵢ, the Hessian of J^ξ.
    pub fn momentum_form(&self, xi: &DVector<f64>) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (s, &x) in self.s_mats.iter().zip(xi.iter()) {
            m += s * x;
        }
        m
    }

    pub fn momentum(&self, z: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.torus_rank(), self.s_mats.iter().map(|s| 0.5 * z.dot(&(s * z))))
    }

    /// DJ(z) as a k×2n matrix; row i is ∇Jᵢ(z)ᵀ = (Sᵢz)ᵀ.
    pub fn momentum_jacobian(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.torus_rank(), self.dim());
        for (i, s) in self.s_mats.iter().enumerate() {
            m.set_row(i, &(s * z).transpose());
        }
        m
    }

    pub fn augmented_value(&self, z: &DVector<f64>, xi: &DVector<f64>) -> f64 {
        self.energy(z) - self.momentum(z).dot(xi)
    }

    pub fn augmented_gradient(&self, z: &DVector<f64>, xi: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.gradient(z)? - self.momentum_form(xi) * z)
    }

    pub fn augmented_hessian(&self, z: &DVector<f64>, xi: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(sym(&(self.hessian(z)? - self.momentum_form(xi))))
    }

    /// Columns Aᵢz.
    pub fn group_orbit_tangent(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim(), self.torus_rank());
        for (i, a) in self.symmetry.generators().iter().enumerate() {
            m.set_column(i, &(a * z));
        }
        m
    }

    /// Hamiltonian vector field Ω⁻¹∇h.
    pub fn vector_field(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.phase.omega_inv() * self.gradient(z)?)
    }

    /// Integrate the flow with classical RK4 and compare with exp(tA_ξ)z.
    pub fn check_relative_equilibrium(&self, z: &DVector<f64>, xi: &DVector<f64>, t_max: f64, steps: usize) -> Result<DriftReport> {
        if t_max <= 0.0 || steps == 0 {
            return Err(Error::InvalidModel("t_max and steps must be positive".into()));
        }
        let dt = t_max / steps as f64;
        let step_rot = (self.symmetry.generator(xi) * dt).exp();
        let j0 = self.momentum(z);
        let bound = 1e6 * (1.0 + z.norm());
        let mut x = z.clone();
        let mut r = z.clone();
        let mut rep = DriftReport { orbit_drift: 0.0, momentum_drift: 0.0 };
        for s in 0..steps {
            let k1 = self.vector_field(&x)?;
            let k2 = self.vector_field(&(&x + &k1 * (0.5 * dt)))?;
            let k3 = self.vector_field(&(&x + &k2 * (0.5 * dt)))?;
            let k4 = self.vector_field(&(&x + &k3 * dt))?;
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
            r = &step_rot * r;
            let nx = x.norm();
            if !nx.is_finite() || nx > bound {
                return Err(Error::IntegrationBlowup { t: (s + 1) as f64 * dt });
            }
            rep.orbit_drift = rep.orbit_drift.max((&x - &r).norm());
            rep.momentum_drift = rep.momentum_drift.max((self.momentum(&x) - &j0).norm());
        }
        Ok(rep)
    }
}
