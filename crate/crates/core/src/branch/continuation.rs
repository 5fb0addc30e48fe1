//! Pseudo-arclength continuation of relative equilibria in (z, ξ).
//!
//! Equations: the gradient of h − J^ξ projected off the orbit directions at
//! the reference point, phase pins ⟨z − z_ref, Aᵢz_ref⟩ = 0, k − 1 fixed
//! momentum/generator constraints, and one scalar closing equation (arclength
//! or a bisection hyperplane).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{make_point, Branch, BranchKind, BranchPoint};
use crate::error::{Error, Result};
use crate::isotropy::{weight_spaces, WeightSpace};
use crate::linalg::{gram_schmidt, null_space, solve, svd_full};
use crate::slice::split_algebra;
use crate::system::HamiltonianSystem;

/// The quantity varied along the branch: c·J(z) or c·ξ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContinuationParameter {
    Momentum(Vec<f64>),
    Generator(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Constraint {
    Momentum { direction: Vec<f64>, value: f64 },
    Generator { direction: Vec<f64>, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuationSetup {
    pub parameter: ContinuationParameter,
    pub fixed: Vec<Constraint>,
    /// dim 𝔪 at the start point: number of phase pins.
    pub orbit_rank: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContinuationOptions {
    pub step: f64,
    pub n_steps: usize,
    /// +1 to increase the parameter initially, −1 to decrease it.
    pub direction: f64,
    /// Stop once the parameter passes this value.
    pub until: Option<f64>,
    pub newton_tol: f64,
    pub max_iter: usize,
    pub branch_tol: f64,
    pub tol_rank: f64,
    pub max_halvings: usize,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        Self {
            step: 0.05,
            n_steps: 20,
            direction: 1.0,
            until: None,
            newton_tol: 1e-12,
            max_iter: 25,
            branch_tol: 1e-9,
            tol_rank: 1e-8,
            max_halvings: 4,
        }
    }
}

fn dot(a: &[f64], x: &DVector<f64>) -> f64 {
    a.iter().zip(x.iter()).map(|(p, q)| p * q).sum()
}

impl ContinuationSetup {
    /// Fix every momentum (𝔪) and generator (𝔤_{m_e}) coordinate at the start
    /// point except the one most aligned with the free parameter.
    pub fn new(sys: &HamiltonianSystem, z: &DVector<f64>, xi: &DVector<f64>, parameter: ContinuationParameter, tol_rank: f64) -> Result<Self> {
        let k = sys.torus_rank();
        let c = match &parameter {
            ContinuationParameter::Momentum(c) | ContinuationParameter::Generator(c) => c,
        };
        if c.len() != k || c.iter().all(|&x| x == 0.0) {
            return Err(Error::InvalidModel(format!("continuation direction must be a nonzero vector of length {k}")));
        }
        let (g_me, m, _) = split_algebra(&sys.group_orbit_tangent(z), tol_rank)?;
        let mu = sys.momentum(z);
        let mut cands: Vec<(Constraint, f64)> = Vec::new();
        for j in 0..m.ncols() {
            let d: Vec<f64> = m.column(j).iter().copied().collect();
            let score = if matches!(parameter, ContinuationParameter::Momentum(_)) { dot(&d, &DVector::from_vec(c.clone())).abs() } else { 0.0 };
            cands.push((Constraint::Momentum { value: dot(&d, &mu), direction: d }, score));
        }
        for l in 0..g_me.ncols() {
            let d: Vec<f64> = g_me.column(l).iter().copied().collect();
            let score = if matches!(parameter, ContinuationParameter::Generator(_)) { dot(&d, &DVector::from_vec(c.clone())).abs() } else { 0.0 };
            cands.push((Constraint::Generator { value: dot(&d, xi), direction: d }, score));
        }
        let (drop, best) = cands.iter().enumerate().fold((usize::MAX, 0.0), |(bi, bs), (i, (_, s))| if *s > bs + 1e-12 { (i, *s) } else { (bi, bs) });
        if drop == usize::MAX || best < 1e-8 {
            return Err(Error::InvalidModel("continuation parameter is not a free direction at this point".into()));
        }
        let fixed = cands.into_iter().enumerate().filter(|(i, _)| *i != drop).map(|(_, (c, _))| c).collect();
        Ok(Self { parameter, fixed, orbit_rank: m.ncols() })
    }

    pub fn parameter_value(&self, sys: &HamiltonianSystem, z: &DVector<f64>, xi: &DVector<f64>) -> f64 {
        match &self.parameter {
            ContinuationParameter::Momentum(c) => dot(c, &sys.momentum(z)),
            ContinuationParameter::Generator(c) => dot(c, xi),
        }
    }

    /// Gradient of the parameter with respect to x = (z, ξ).
    fn parameter_gradient(&self, sys: &HamiltonianSystem, z: &DVector<f64>) -> DVector<f64> {
        let n = sys.dim();
        let k = sys.torus_rank();
        let mut g = DVector::zeros(n + k);
        match &self.parameter {
            ContinuationParameter::Momentum(c) => {
                let dj = sys.momentum_jacobian(z);
                g.rows_mut(0, n).copy_from(&(dj.transpose() * DVector::from_vec(c.clone())));
            }
            ContinuationParameter::Generator(c) => {
                g.rows_mut(n, k).copy_from(&DVector::from_vec(c.clone()));
            }
        }
        g
    }
}

/// Corrector for a fixed reference point and closing hyperplane.
pub(crate) struct Corrector<'a> {
    sys: &'a HamiltonianSystem,
    setup: &'a ContinuationSetup,
    q: DMatrix<f64>,
    p: DMatrix<f64>,
    z_ref: DVector<f64>,
}

impl<'a> Corrector<'a> {
    pub(crate) fn new(sys: &'a HamiltonianSystem, setup: &'a ContinuationSetup, z_ref: &DVector<f64>) -> Self {
        let n = sys.dim();
        let orbit = sys.group_orbit_tangent(z_ref);
        let r = setup.orbit_rank;
        let p = if r == 0 {
            DMatrix::zeros(n, 0)
        } else {
            let (_, v) = svd_full(&orbit);
            gram_schmidt(&(&orbit * v.columns(0, r)), &DMatrix::identity(n, n), 1e-12)
        };
        let q = if p.ncols() == 0 { DMatrix::identity(n, n) } else { null_space(&p.transpose(), 1e-12) };
        Self { sys, setup, q, p, z_ref: z_ref.clone() }
    }

    fn split(&self, x: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let n = self.sys.dim();
        (x.rows(0, n).into_owned(), x.rows(n, x.len() - n).into_owned())
    }

    /// Residual and Jacobian of the square system with closing row dᵀx = c.
    fn system(&self, x: &DVector<f64>, d: &DVector<f64>, c: f64) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let (z, xi) = self.split(x);
        let n = z.len();
        let k = xi.len();
        let nn = n + k;
        let mut r = DVector::zeros(nn);
        let mut jac = DMatrix::zeros(nn, nn);
        let f = self.sys.augmented_gradient(&z, &xi)?;
        let hx = self.sys.augmented_hessian(&z, &xi)?;
        let nq = self.q.ncols();
        r.rows_mut(0, nq).copy_from(&(self.q.transpose() * &f));
        jac.view_mut((0, 0), (nq, n)).copy_from(&(self.q.transpose() * &hx));
        for (i, s) in self.sys.momentum_forms().iter().enumerate() {
            jac.view_mut((0, n + i), (nq, 1)).copy_from(&(-(self.q.transpose() * (s * &z))));
        }
        let mut row = nq;
        for j in 0..self.p.ncols() {
            r[row] = self.p.column(j).dot(&(&z - &self.z_ref));
            jac.view_mut((row, 0), (1, n)).copy_from(&self.p.column(j).transpose());
            row += 1;
        }
        for con in &self.setup.fixed {
            match con {
                Constraint::Momentum { direction, value } => {
                    let dv = DVector::from_vec(direction.clone());
                    r[row] = dot(direction, &self.sys.momentum(&z)) - value;
                    let g = self.sys.momentum_jacobian(&z).transpose() * dv;
                    jac.view_mut((row, 0), (1, n)).copy_from(&g.transpose());
                }
                Constraint::Generator { direction, value } => {
                    r[row] = dot(direction, &xi) - value;
                    for (i, &dv) in direction.iter().enumerate() {
                        jac[(row, n + i)] = dv;
                    }
                }
            }
            row += 1;
        }
        if row != nn - 1 {
            return Err(Error::DimensionMismatch(format!("continuation system has {} equations for {} unknowns", row + 1, nn)));
        }
        r[row] = d.dot(x) - c;
        jac.view_mut((row, 0), (1, nn)).copy_from(&d.transpose());
        Ok((r, jac))
    }

    /// Newton on the square system; returns the corrected x.
    pub(crate) fn correct(&self, x0: &DVector<f64>, d: &DVector<f64>, c: f64, tol: f64, max_iter: usize) -> Result<DVector<f64>> {
        let mut x = x0.clone();
        let mut polished = false;
        for it in 0..max_iter {
            let (r, jac) = self.system(&x, d, c)?;
            let res = r.norm();
            if !res.is_finite() {
                break;
            }
            if res <= tol {
                if polished {
                    return Ok(x);
                }
                polished = true;
            }
            let dx = solve(&jac, &(-r)).ok_or(Error::NewtonDiverged { stage: "continuation", iterations: it, residual: res })?;
            x += dx;
        }
        let (r, _) = self.system(&x, d, c)?;
        if r.norm() <= tol {
            Ok(x)
        } else {
            Err(Error::NewtonDiverged { stage: "continuation", iterations: max_iter, residual: r.norm() })
        }
    }

    /// Unit null vector of the Jacobian without the closing row.
    pub(crate) fn tangent(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let nn = x.len();
        let (_, jac) = self.system(x, &DVector::zeros(nn), 0.0)?;
        let top = jac.rows(0, nn - 1).into_owned();
        let (_, v) = svd_full(&top);
        Ok(v.column(nn - 1).into_owned())
    }
}

pub(crate) fn join(z: &DVector<f64>, xi: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(z.len() + xi.len(), z.iter().chain(xi.iter()).copied())
}

pub(crate) fn split(n: usize, x: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    (x.rows(0, n).into_owned(), x.rows(n, x.len() - n).into_owned())
}

/// Continue the family through (z, ξ) in the given parameter.
pub fn continue_branch(sys: &HamiltonianSystem, z: &DVector<f64>, xi: &DVector<f64>, parameter: ContinuationParameter, opts: &ContinuationOptions) -> Result<Branch> {
    let setup = ContinuationSetup::new(sys, z, xi, parameter, opts.tol_rank)?;
    continue_with_setup(sys, z, xi, setup, opts)
}

pub fn continue_with_setup(sys: &HamiltonianSystem, z: &DVector<f64>, xi: &DVector<f64>, setup: ContinuationSetup, opts: &ContinuationOptions) -> Result<Branch> {
    if !(opts.step > 0.0) {
        return Err(Error::InvalidModel("step must be positive".into()));
    }
    let n = sys.dim();
    let spaces = weight_spaces(sys)?;
    let res0 = sys.augmented_gradient(z, xi)?.norm();
    if res0 > opts.branch_tol {
        return Err(Error::NotARelativeEquilibrium { residual: res0, tol: opts.branch_tol });
    }
    let mut x = join(z, xi);
    let mut t = Corrector::new(sys, &setup, z).tangent(&x)?;
    let dp = setup.parameter_gradient(sys, z).dot(&t);
    let sign = if opts.direction < 0.0 { -1.0 } else { 1.0 };
    if dp * sign < 0.0 {
        t.neg_mut();
    }
    let mut points = vec![make_point(sys, &spaces, z.clone(), xi.clone(), 0.0)?];
    let mut folds = Vec::new();
    let mut s = 0.0;
    let mut last_dp = setup.parameter_gradient(sys, z).dot(&t);
    for _ in 0..opts.n_steps {
        let (zc, _) = split(n, &x);
        let corr = Corrector::new(sys, &setup, &zc);
        let mut ds = opts.step;
        let mut halvings = 0;
        let x_new = loop {
            let pred = &x + &t * ds;
            let attempt = corr.correct(&pred, &t, t.dot(&x) + ds, opts.newton_tol, opts.max_iter).and_then(|xn| {
                let (zn, xin) = split(n, &xn);
                let res = sys.augmented_gradient(&zn, &xin)?.norm();
                if res > opts.branch_tol || (&zn - &zc).norm() > 2.0 * opts.step {
                    Err(Error::NewtonDiverged { stage: "continuation", iterations: 0, residual: res })
                } else {
                    Ok(xn)
                }
            });
            match attempt {
                Ok(xn) => break xn,
                Err(_) if halvings < opts.max_halvings => {
                    ds *= 0.5;
                    halvings += 1;
                }
                Err(_) => return Err(Error::StepFailed { arclength: s, step: ds }),
            }
        };
        let mut t_new = Corrector::new(sys, &setup, &split(n, &x_new).0).tangent(&x_new)?;
        if t_new.dot(&t) < 0.0 {
            t_new.neg_mut();
        }
        let (zn, xin) = split(n, &x_new);
        let dpn = setup.parameter_gradient(sys, &zn).dot(&t_new);
        if dpn * last_dp < 0.0 {
            folds.push(points.len() - 1);
        }
        last_dp = dpn;
        s += ds;
        let before = setup.parameter_value(sys, &split(n, &x).0, &split(n, &x).1);
        points.push(make_point(sys, &spaces, zn.clone(), xin.clone(), s)?);
        x = x_new;
        t = t_new;
        if let Some(u) = opts.until {
            let after = setup.parameter_value(sys, &zn, &xin);
            if (before - u) * (after - u) <= 0.0 {
                break;
            }
        }
    }
    Ok(Branch { kind: BranchKind::PersistenceSigma, parent: None, points, folds, setup: Some(setup) })
}

/// Corrected point on the segment between two branch points, cut by the
/// hyperplane through x(θ) normal to the secant.
pub(crate) fn point_on_segment(
    sys: &HamiltonianSystem,
    setup: &ContinuationSetup,
    a: &BranchPoint,
    b: &BranchPoint,
    theta: f64,
    opts: &ContinuationOptions,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let xa = join(&a.z, &a.xi);
    let xb = join(&b.z, &b.xi);
    let d = &xb - &xa;
    let xt = &xa + &d * theta;
    let corr = Corrector::new(sys, setup, &a.z);
    let x = corr.correct(&xt, &d, d.dot(&xt), opts.newton_tol, opts.max_iter)?;
    Ok(split(sys.dim(), &x))
}

/// Weight spaces are needed by callers that build points outside a run.
pub fn spaces(sys: &HamiltonianSystem) -> Result<Vec<WeightSpace>> {
    weight_spaces(sys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{base_point, wave_system, WaveParams};

    #[test]
    fn wave_sweep_in_c_stays_on_trivial_family() {
        let p = WaveParams::default_with(0.5, 0.5);
        let sys = wave_system(&p).unwrap();
        let (z, xi) = base_point(&p);
        let opts = ContinuationOptions { n_steps: 6, ..Default::default() };
        let b = continue_branch(&sys, &z, &xi, ContinuationParameter::Momentum(vec![1.0, 0.0]), &opts).unwrap();
        assert_eq!(b.points.len(), 7);
        for pt in &b.points {
            let c = (pt.z[4] * pt.z[4] + pt.z[5] * pt.z[5]).sqrt();
            let others: f64 = pt.z.iter().enumerate().filter(|(i, _)| *i != 4 && *i != 5).map(|(_, v)| v.abs()).sum();
            assert!(others < 1e-12);
            assert!((pt.xi[0] - 1.0).abs() < 1e-10, "{}", pt.xi[0]);
            assert!((pt.xi[1] - 0.5).abs() < 1e-12);
            assert!(pt.residual < 1e-9);
            assert!(c > 0.5 - 1e-12);
        }
        assert!(b.points.last().unwrap().z[4] > 0.75);
    }
}
