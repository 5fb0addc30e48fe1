//! Branch switching at a classified crossing.
//!
//! With v₀ = a·u on the line (or a point of the circle) V₀^K, the bifurcation
//! equation reduces to one scalar equation u·b(η, a u, α) = 0 in a single
//! unfolding coordinate t: η along the first 𝔪 direction (pitchfork and
//! saddle-node, α when 𝔪 = 0) or α along the circle generator (complex).

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::crossings::{Classification, CrossingKind};
use super::{make_point, Branch, BranchKind, Parent};
use crate::error::{Error, Result};
use crate::isotropy::weight_spaces;
use crate::reduction::{ReducedProblem, ReducedState};
use crate::system::HamiltonianSystem;

#[derive(Debug, Clone, Serialize)]
pub struct SwitchResult {
    pub kind: BranchKind,
    pub branch: Branch,
    /// Pitchfork only: the branch at −a.
    pub mirror: Option<Branch>,
    pub amplitudes: Vec<f64>,
    /// Solved unfolding coordinate t for each amplitude.
    pub unfolding: Vec<f64>,
    /// c₁ in t ≈ c₀ + c₁a² + c₂a⁴.
    pub slope: f64,
    /// max ‖g·z(a) − z(−a)‖ over amplitudes.
    pub symmetry_error: Option<f64>,
    /// max ‖R·z − z(R·v₀)‖ over amplitudes for a rotation R of the circle.
    pub closure_error: Option<f64>,
    /// max |b·(J u)| / a: the equation along the orbit of the circle.
    pub orthogonality: Option<f64>,
    /// ‖∇(h − J^Ξ)‖ at each recombined point.
    pub recombination: Vec<f64>,
}

enum Unfold {
    Eta(DVector<f64>),
    Alpha(DVector<f64>),
}

struct Line<'a> {
    rp: &'a ReducedProblem,
    u: DVector<f64>,
    dir: Unfold,
}

impl Line<'_> {
    fn args(&self, a: f64, t: f64) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let (eta, alpha) = match &self.dir {
            Unfold::Eta(d) => (d * t, DVector::zeros(self.rp.dec.dim_g_me())),
            Unfold::Alpha(d) => (DVector::zeros(self.rp.dec.dim_m()), d * t),
        };
        (eta, &self.u * a, alpha)
    }

    fn state(&self, a: f64, t: f64) -> Result<ReducedState> {
        let (eta, v0, alpha) = self.args(a, t);
        self.rp.solve(&eta, &v0, &alpha)
    }

    fn residual(&self, a: f64, t: f64) -> Result<f64> {
        let s = self.state(a, t)?;
        Ok(self.u.dot(&self.rp.kernel_component(&s)) / a)
    }

    /// Secant iteration on t from t = 0.
    fn solve(&self, a: f64, guess: f64) -> Result<(f64, ReducedState)> {
        let mut t0 = guess;
        let mut f0 = self.residual(a, t0)?;
        let mut t1 = guess + 1e-4 * a.abs().max(1e-3);
        let mut f1 = self.residual(a, t1)?;
        for _ in 0..60 {
            if f1.abs() <= 1e-13 {
                break;
            }
            let den = f1 - f0;
            if den == 0.0 || !den.is_finite() {
                return Err(Error::NoBranchFound);
            }
            let t2 = t1 - f1 * (t1 - t0) / den;
            t0 = t1;
            f0 = f1;
            t1 = t2;
            f1 = self.residual(a, t1)?;
            if (t1 - t0).abs() <= 1e-15 * (1.0 + t1.abs()) {
                break;
            }
        }
        if !(f1.abs() <= 1e-10) {
            return Err(Error::NoBranchFound);
        }
        Ok((t1, self.state(a, t1)?))
    }
}

/// Least-squares fit t = c₀ + c₁a² + c₂a⁴, returning c₁.
fn fit_slope(a: &[f64], t: &[f64]) -> f64 {
    if a.len() < 2 {
        return f64::NAN;
    }
    let cols = if a.len() >= 3 { 3 } else { 2 };
    let m = DMatrix::from_fn(a.len(), cols, |i, j| (a[i] * a[i]).powi(j as i32));
    let c = crate::linalg::lstsq(&m, &DVector::from_column_slice(t), 1e-14);
    c[1]
}

/// Follow the bifurcating branch for each amplitude a. Amplitudes that fail
/// to converge are dropped; if all fail the result is NoBranchFound.
pub fn switch_branch(
    sys: &HamiltonianSystem,
    class: &Classification,
    amplitudes: &[f64],
    parent: Option<Parent>,
) -> Result<SwitchResult> {
    let rp = &class.reduced;
    if class.fixed_basis.ncols() == 0 || class.kind == CrossingKind::Unclassified {
        return Err(Error::NoBranchFound);
    }
    let u0 = class.fixed_basis.column(0).normalize();
    let (kind, dir) = match class.kind {
        CrossingKind::ComplexCircle => {
            let c = class.circle_generator.as_ref().ok_or(Error::NoBranchFound)?;
            let cv = DVector::from_iterator(c.len(), c.iter().map(|&x| x as f64));
            let d = rp.dec.g_me_basis.transpose() * cv;
            if d.norm() == 0.0 {
                return Err(Error::NoBranchFound);
            }
            (BranchKind::ComplexCircle, Unfold::Alpha(d.normalize()))
        }
        k => {
            let kind = if k == CrossingKind::Pitchfork { BranchKind::Pitchfork } else { BranchKind::SaddleNode };
            let dir = if rp.dec.dim_m() > 0 {
                let mut e = DVector::zeros(rp.dec.dim_m());
                e[0] = 1.0;
                Unfold::Eta(e)
            } else if rp.dec.dim_g_me() > 0 {
                let mut e = DVector::zeros(rp.dec.dim_g_me());
                e[0] = 1.0;
                Unfold::Alpha(e)
            } else {
                return Err(Error::NoBranchFound);
            };
            (kind, dir)
        }
    };
    let line = Line { rp, u: u0.clone(), dir };
    let spaces = weight_spaces(sys)?;
    let circle = match (kind, &class.circle_generator) {
        (BranchKind::ComplexCircle, Some(c)) => {
            let theta = DVector::from_iterator(c.len(), c.iter().map(|&x| 0.7 * x as f64));
            Some((sys.symmetry.group_element(&theta), sys.symmetry.generator(&DVector::from_iterator(c.len(), c.iter().map(|&x| x as f64)))))
        }
        _ => None,
    };

    let mut branch = Branch { kind, parent, points: Vec::new(), folds: Vec::new(), setup: None };
    let mut mirror = (kind == BranchKind::Pitchfork).then(|| Branch { kind, parent, points: Vec::new(), folds: Vec::new(), setup: None });
    let (mut amps, mut ts, mut recomb) = (Vec::new(), Vec::new(), Vec::new());
    let mut sym_err: Option<f64> = None;
    let mut closure: Option<f64> = None;
    let mut orth: Option<f64> = None;
    let mut guess = 0.0;
    let g = sys.phase.inner();
    for &a in amplitudes {
        let Ok((t, s)) = line.solve(a, guess) else { continue };
        guess = t;
        recomb.push(s.gradient.norm());
        branch.points.push(make_point(sys, &spaces, s.point.clone(), s.generator.clone(), a)?);
        if let (Some(m), Some(el)) = (mirror.as_mut(), class.element.as_ref()) {
            if let Ok((_, sm)) = line.solve(-a, t) {
                let e = (el * &s.point - &sm.point).norm();
                sym_err = Some(sym_err.map_or(e, |x| x.max(e)));
                m.points.push(make_point(sys, &spaces, sm.point.clone(), sm.generator.clone(), -a)?);
            }
        }
        if let Some((rot, gen)) = &circle {
            let (eta, v0, alpha) = line.args(a, t);
            let vv = &rp.dec.v_basis * (&rp.v0_basis * &v0 + &rp.v1_basis * &s.v1);
            let v_rot = rp.dec.v_basis.transpose() * g * rot * vv;
            let v0_rot = rp.v0_basis.transpose() * v_rot;
            if let Ok(sr) = rp.solve(&eta, &v0_rot, &alpha) {
                let e = (rot * &s.point - &sr.point).norm();
                closure = Some(closure.map_or(e, |x| x.max(e)));
            }
            let ju = rp.v0_basis.transpose() * rp.dec.v_basis.transpose() * g * gen * (&rp.dec.v_basis * &rp.v0_basis * &u0);
            let o = (rp.kernel_component(&s).dot(&ju) / a).abs();
            orth = Some(orth.map_or(o, |x| x.max(o)));
        }
        amps.push(a);
        ts.push(t);
    }
    if amps.is_empty() {
        return Err(Error::NoBranchFound);
    }
    Ok(SwitchResult {
        kind,
        slope: fit_slope(&amps, &ts),
        branch,
        mirror,
        amplitudes: amps,
        unfolding: ts,
        symmetry_error: sym_err,
        closure_error: closure,
        orthogonality: orth,
        recombination: recomb,
    })
}
