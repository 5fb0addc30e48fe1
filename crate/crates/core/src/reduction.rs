//! Lyapunov-Schmidt reduction of the critical point equation on a slice.
//!
//! With ω = ξ + α + β (α ∈ 𝔤_{m_e}, β ∈ 𝔪) the equation D(h − J^ω)(Ψ(η, v)) = 0
//! splits into the 𝔪* part, solved for β, the V₁ part, solved for v₁, and the
//! bifurcation function on V₀. For a torus the rigid residual vanishes.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{solve, sym, sym_eigen_sorted};
use crate::slice::{slice_point, SliceDecomposition};
use crate::system::HamiltonianSystem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-11, max_iter: 50 }
    }
}

#[derive(Debug, Clone)]
pub struct ReducedProblem {
    pub sys: HamiltonianSystem,
    pub dec: SliceDecomposition,
    /// Second variation on V in V-coordinates.
    pub l: DMatrix<f64>,
    pub eigenvalues: DVector<f64>,
    /// ℓ × d, orthonormal eigenvectors of L with |λ| ≤ kernel_tol.
    pub v0_basis: DMatrix<f64>,
    /// ℓ × (ℓ − d).
    pub v1_basis: DMatrix<f64>,
    pub kernel_tol: f64,
    pub newton: NewtonOptions,
    /// max_i ‖D²(h − J^ξ)(z_e)·Aᵢz_e‖ relative to ‖D²(h − J^ξ)(z_e)‖.
    pub containment: f64,
}

/// Solved reduced state at (η, v₀, α).
#[derive(Debug, Clone)]
pub struct ReducedState {
    pub v1: DVector<f64>,
    /// Full V-coordinates v₀ + v₁.
    pub v: DVector<f64>,
    pub beta: DVector<f64>,
    pub generator: DVector<f64>,
    pub point: DVector<f64>,
    /// Augmented gradient at the point with the solved generator.
    pub gradient: DVector<f64>,
}

struct Eval {
    point: DVector<f64>,
    beta: DVector<f64>,
    generator: DVector<f64>,
    gradient: DVector<f64>,
}

pub fn build_reduced(sys: &HamiltonianSystem, dec: &SliceDecomposition, kernel_tol: Option<f64>, newton: NewtonOptions) -> Result<ReducedProblem> {
    let hx = sys.augmented_hessian(&dec.base_point, &dec.generator)?;
    let l = sym(&(dec.v_basis.transpose() * &hx * &dec.v_basis));
    let (vals, vecs) = sym_eigen_sorted(&l);
    let lnorm = vals.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let ktol = kernel_tol.unwrap_or(1e-7 * lnorm.max(f64::MIN_POSITIVE));
    if !(ktol > 0.0) {
        return Err(Error::InvalidModel("kernel_tol must be positive".into()));
    }
    let mut k0 = Vec::new();
    let mut k1 = Vec::new();
    for (i, &v) in vals.iter().enumerate() {
        if v.abs() <= ktol {
            k0.push(i);
        } else if v.abs() < 10.0 * ktol {
            return Err(Error::SpectralGapViolated { value: v, kernel_tol: ktol });
        } else {
            k1.push(i);
        }
    }
    let hnorm = crate::linalg::singular_values(&hx).first().copied().unwrap_or(0.0);
    let orbit = sys.group_orbit_tangent(&dec.base_point);
    let containment = (0..orbit.ncols()).map(|i| (&hx * orbit.column(i)).norm()).fold(0.0_f64, f64::max) / hnorm.max(f64::MIN_POSITIVE);
    Ok(ReducedProblem {
        sys: sys.clone(),
        dec: dec.clone(),
        v0_basis: crate::linalg::select_columns(&vecs, &k0),
        v1_basis: crate::linalg::select_columns(&vecs, &k1),
        l,
        eigenvalues: vals,
        kernel_tol: ktol,
        newton,
        containment,
    })
}

impl ReducedProblem {
    pub fn kernel_dim(&self) -> usize {
        self.v0_basis.ncols()
    }

    fn chart_check(&self, eta: &DVector<f64>, v: &DVector<f64>, stage: &'static str) -> Result<()> {
        let norm = (eta.norm_squared() + v.norm_squared()).sqrt();
        if norm > self.dec.validity_radius {
            return Err(Error::ChartExceeded { stage });
        }
        Ok(())
    }

    /// Columns S_{m_l}p.
    fn m_columns(&self, p: &DVector<f64>) -> DMatrix<f64> {
        let r = self.dec.dim_m();
        let mut cols = DMatrix::zeros(p.len(), r);
        for l in 0..r {
            let s = self.sys.momentum_form(&self.dec.m_basis.column(l).into_owned());
            cols.set_column(l, &(s * p));
        }
        cols
    }

    fn beta_at(&self, p: &DVector<f64>, alpha: &DVector<f64>, grad_h: &DVector<f64>) -> Result<DVector<f64>> {
        let r = self.dec.dim_m();
        let mut beta = DVector::zeros(r);
        if r == 0 {
            return Ok(beta);
        }
        let w = &self.dec.w_basis;
        let jac = -(w.transpose() * self.m_columns(p));
        let mut last = f64::INFINITY;
        let mut polish = 0;
        for it in 0..self.newton.max_iter {
            let om = self.dec.full_generator(alpha, &beta);
            let f2 = w.transpose() * (grad_h - self.sys.momentum_form(&om) * p);
            let res = f2.norm();
            if res <= self.newton.tol {
                if polish >= 1 || res >= last {
                    return Ok(beta);
                }
                polish += 1;
            }
            if !res.is_finite() {
                return Err(Error::NewtonDiverged { stage: "beta", iterations: it, residual: res });
            }
            last = res;
            let d = solve(&jac, &(-f2)).ok_or(Error::NewtonDiverged { stage: "beta", iterations: it, residual: res })?;
            beta += d;
        }
        let om = self.dec.full_generator(alpha, &beta);
        let res = (w.transpose() * (grad_h - self.sys.momentum_form(&om) * p)).norm();
        if res <= self.newton.tol {
            Ok(beta)
        } else {
            Err(Error::NewtonDiverged { stage: "beta", iterations: self.newton.max_iter, residual: res })
        }
    }

    fn eval(&self, eta: &DVector<f64>, v: &DVector<f64>, alpha: &DVector<f64>) -> Result<Eval> {
        let p = slice_point(&self.dec, eta, v);
        let gh = self.sys.gradient(&p)?;
        let beta = self.beta_at(&p, alpha, &gh)?;
        let generator = self.dec.full_generator(alpha, &beta);
        let gradient = gh - self.sys.momentum_form(&generator) * &p;
        Ok(Eval { point: p, beta, generator, gradient })
    }

    /// Derivative of v ↦ Vᵀ D(h − J^{ω(v)})(Ψ(η, v)) with β eliminated.
    fn reduced_hessian(&self, e: &Eval) -> Result<DMatrix<f64>> {
        let hw = self.sys.hessian(&e.point)? - self.sys.momentum_form(&e.generator);
        let v = &self.dec.v_basis;
        let mut k = v.transpose() * &hw * v;
        if self.dec.dim_m() > 0 {
            let w = &self.dec.w_basis;
            let cols = self.m_columns(&e.point);
            let m = -(w.transpose() * &cols);
            let rhs = -(w.transpose() * &hw * v);
            let minv = m.try_inverse().ok_or(Error::ChartExceeded { stage: "beta" })?;
            let dbeta = minv * rhs;
            k -= v.transpose() * cols * dbeta;
        }
        Ok(k)
    }

    /// β(η, v, α) in 𝔪-coordinates.
    pub fn solve_beta(&self, eta: &DVector<f64>, v: &DVector<f64>, alpha: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dims(eta, alpha)?;
        if v.len() != self.dec.dim_v() {
            return Err(Error::DimensionMismatch("v".into()));
        }
        if (eta.norm_squared() + v.norm_squared()).sqrt() > self.dec.validity_radius {
            return Err(Error::OutOfChart { norm: (eta.norm_squared() + v.norm_squared()).sqrt(), radius: self.dec.validity_radius });
        }
        Ok(self.eval(eta, v, alpha)?.beta)
    }

    fn check_dims(&self, eta: &DVector<f64>, alpha: &DVector<f64>) -> Result<()> {
        if eta.len() != self.dec.dim_m() || alpha.len() != self.dec.dim_g_me() {
            return Err(Error::DimensionMismatch("eta or alpha".into()));
        }
        Ok(())
    }

    /// Solve the V₁ equation with β re-solved at every step.
    pub fn solve(&self, eta: &DVector<f64>, v0: &DVector<f64>, alpha: &DVector<f64>) -> Result<ReducedState> {
        self.check_dims(eta, alpha)?;
        if v0.len() != self.kernel_dim() {
            return Err(Error::DimensionMismatch("v0".into()));
        }
        let base = &self.v0_basis * v0;
        let mut v1 = DVector::zeros(self.v1_basis.ncols());
        let mut last = f64::INFINITY;
        let mut polish = 0;
        for it in 0..=self.newton.max_iter {
            let v = &base + &self.v1_basis * &v1;
            self.chart_check(eta, &v, "v1")?;
            let e = self.eval(eta, &v, alpha)?;
            let f3 = self.dec.v_basis.transpose() * &e.gradient;
            let r = self.v1_basis.transpose() * &f3;
            let res = r.norm();
            if !res.is_finite() {
                return Err(Error::NewtonDiverged { stage: "v1", iterations: it, residual: res });
            }
            let done = res <= self.newton.tol && (polish >= 2 || res >= 0.5 * last);
            if done || r.is_empty() {
                return Ok(ReducedState { v1, v, beta: e.beta, generator: e.generator, point: e.point, gradient: e.gradient });
            }
            if res <= self.newton.tol {
                polish += 1;
            }
            if it == self.newton.max_iter {
                break;
            }
            last = res;
            let k = self.reduced_hessian(&e)?;
            let j = self.v1_basis.transpose() * k * &self.v1_basis;
            let d = solve(&j, &(-r)).ok_or(Error::NewtonDiverged { stage: "v1", iterations: it, residual: res })?;
            v1 += d;
        }
        Err(Error::NewtonDiverged { stage: "v1", iterations: self.newton.max_iter, residual: last })
    }

    pub fn solve_v1(&self, eta: &DVector<f64>, v0: &DVector<f64>, alpha: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.solve(eta, v0, alpha)?.v1)
    }

    /// Ξ(η, v₀, α) = ξ + α + β in ℝ^k.
    pub fn generator_map(&self, eta: &DVector<f64>, v0: &DVector<f64>, alpha: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.solve(eta, v0, alpha)?.generator)
    }

    /// b(η, v₀, α) in V₀-coordinates.
    pub fn bifurcation_function(&self, eta: &DVector<f64>, v0: &DVector<f64>, alpha: &DVector<f64>) -> Result<DVector<f64>> {
        let s = self.solve(eta, v0, alpha)?;
        Ok(self.kernel_component(&s))
    }

    pub fn kernel_component(&self, s: &ReducedState) -> DVector<f64> {
        self.v0_basis.transpose() * (self.dec.v_basis.transpose() * &s.gradient)
    }

    /// D_{v₀}b by implicit differentiation of the V₁ and 𝔪* equations.
    pub fn bifurcation_jacobian(&self, eta: &DVector<f64>, v0: &DVector<f64>, alpha: &DVector<f64>) -> Result<DMatrix<f64>> {
        let s = self.solve(eta, v0, alpha)?;
        let e = Eval { point: s.point, beta: s.beta, generator: s.generator, gradient: s.gradient };
        let k = self.reduced_hessian(&e)?;
        let (p0, p1) = (&self.v0_basis, &self.v1_basis);
        let k00 = p0.transpose() * &k * p0;
        if p1.ncols() == 0 {
            return Ok(k00);
        }
        let k11 = p1.transpose() * &k * p1;
        let k10 = p1.transpose() * &k * p0;
        let k01 = p0.transpose() * &k * p1;
        let k11_inv = k11.try_inverse().ok_or(Error::NewtonDiverged { stage: "v1", iterations: 0, residual: f64::NAN })?;
        Ok(k00 - k01 * k11_inv * k10)
    }

    /// D_{v₀}b by central differences with one Richardson step.
    pub fn bifurcation_jacobian_fd(&self, eta: &DVector<f64>, v0: &DVector<f64>, alpha: &DVector<f64>, h: f64) -> Result<DMatrix<f64>> {
        let d = self.kernel_dim();
        let central = |step: f64| -> Result<DMatrix<f64>> {
            let mut m = DMatrix::zeros(d, d);
            for j in 0..d {
                let mut vp = v0.clone();
                vp[j] += step;
                let mut vm = v0.clone();
                vm[j] -= step;
                let bp = self.bifurcation_function(eta, &vp, alpha)?;
                let bm = self.bifurcation_function(eta, &vm, alpha)?;
                m.set_column(j, &((bp - bm) / (2.0 * step)));
            }
            Ok(m)
        };
        let coarse = central(h)?;
        let fine = central(0.5 * h)?;
        Ok((fine * 4.0 - coarse) / 3.0)
    }
}

/// Check antisymmetry and the Jacobi identity of c[i][j][l] (flattened i*k*k + j*k + l).
pub fn validate_structure_constants(c: &[f64], k: usize) -> Result<()> {
    if c.len() != k * k * k {
        return Err(Error::InvalidStructureConstants(format!("expected {} entries, got {}", k * k * k, c.len())));
    }
    let at = |i: usize, j: usize, l: usize| c[i * k * k + j * k + l];
    for i in 0..k {
        for j in 0..k {
            for l in 0..k {
                if (at(i, j, l) + at(j, i, l)).abs() > 1e-10 {
                    return Err(Error::InvalidStructureConstants(format!("not antisymmetric at ({i}, {j}, {l})")));
                }
            }
        }
    }
    for i in 0..k {
        for j in 0..k {
            for l in 0..k {
                for q in 0..k {
                    let mut s = 0.0;
                    for p in 0..k {
                        s += at(i, j, p) * at(p, l, q) + at(j, l, p) * at(p, i, q) + at(l, i, p) * at(p, j, q);
                    }
                    if s.abs() > 1e-10 {
                        return Err(Error::InvalidStructureConstants(format!("Jacobi identity fails for ({i}, {j}, {l})")));
                    }
                }
            }
        }
    }
    Ok(())
}

/// ρ_j = ⟨J, [ξ, m_j]⟩ for the columns m_j of `m_basis`.
pub fn rigid_residual(structure_constants: &[f64], j_value: &DVector<f64>, xi: &DVector<f64>, m_basis: &DMatrix<f64>) -> Result<DVector<f64>> {
    let k = j_value.len();
    if xi.len() != k || m_basis.nrows() != k {
        return Err(Error::DimensionMismatch("rigid residual inputs".into()));
    }
    validate_structure_constants(structure_constants, k)?;
    let mut rho = DVector::zeros(m_basis.ncols());
    for (col, out) in rho.iter_mut().enumerate() {
        let mut s = 0.0;
        for a in 0..k {
            for b in 0..k {
                let coef = xi[a] * m_basis[(b, col)];
                if coef == 0.0 {
                    continue;
                }
                for l in 0..k {
                    let c = structure_constants[a * k * k + b * k + l];
                    if c != 0.0 {
                        s += coef * c * j_value[l];
                    }
                }
            }
        }
        *out = s;
    }
    Ok(rho)
}

/// Structure constants of so(3): [e₁, e₂] = e₃ and cyclic.
pub fn so3_structure_constants() -> Vec<f64> {
    let mut c = vec![0.0; 27];
    for (i, j, l) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
        c[i * 9 + j * 3 + l] = 1.0;
        c[j * 9 + i * 3 + l] = -1.0;
    }
    c
}
