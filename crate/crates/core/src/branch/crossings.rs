//! Eigenvalue crossings of the stability form along a branch and their
//! classification by the symmetry of the kernel.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::continuation::{point_on_segment, ContinuationOptions};
use super::stability::stability_form;
use super::{make_point, Branch, BranchPoint};
use crate::error::{Error, Result};
use crate::isotropy::{active_weights, kernel_isotropy_label, point_stabilizer, stabilizer, weight_spaces, TorusStabilizer, WeightSpace};
use crate::linalg::{lstsq, null_space, sym_eigen_sorted};
use crate::reduction::{build_reduced, NewtonOptions, ReducedProblem};
use crate::slice::build_slice;
use crate::system::HamiltonianSystem;

#[derive(Debug, Clone, Serialize)]
pub struct CrossingEvent {
    /// The crossing lies between points `index` and `index + 1`.
    pub index: usize,
    /// Position of the crossing eigenvalue in the sorted spectrum.
    pub eigen_index: usize,
    pub multiplicity: usize,
    /// Eigenvalue of smallest modulus at the refined point.
    pub lambda: f64,
    pub theta: f64,
    pub point: BranchPoint,
    pub kernel_isotropy: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossingKind {
    Pitchfork,
    SaddleNode,
    ComplexCircle,
    Unclassified,
}

#[derive(Debug, Clone)]
pub struct Classification {
    pub kind: CrossingKind,
    /// Integer weight of the circle action on V₀^K (complex crossings).
    pub weight: Option<i64>,
    /// Primitive torus direction generating the circle (complex crossings).
    pub circle_generator: Option<Vec<i64>>,
    /// Element acting as −Id on V₀^K (pitchforks).
    pub element: Option<DMatrix<f64>>,
    /// Basis of V₀^K in V₀-coordinates.
    pub fixed_basis: DMatrix<f64>,
    pub reduced: ReducedProblem,
    pub isotropy_k: String,
}

fn negatives(e: &[f64]) -> usize {
    e.iter().filter(|&&v| v < 0.0).count()
}

fn min_abs(e: &[f64]) -> (usize, f64) {
    e.iter().enumerate().fold((0, f64::INFINITY), |(bi, bv), (i, &v)| if v.abs() < bv { (i, v.abs()) } else { (bi, bv) })
}

/// Generic vector in the span of the kernel eigenvectors of the stability form.
fn kernel_vector(sys: &HamiltonianSystem, z: &DVector<f64>, xi: &DVector<f64>, tol: f64) -> Result<Option<DVector<f64>>> {
    let (vals, w) = stability_form(sys, z, xi)?;
    let h = sys.augmented_hessian(z, xi)?;
    let (_, vecs) = sym_eigen_sorted(&(w.transpose() * h * &w));
    let mut v = DVector::zeros(sys.dim());
    let mut any = false;
    for (i, &l) in vals.iter().enumerate() {
        if l.abs() <= tol {
            v += &w * vecs.column(i) * (1.0 + 0.618_034 * i as f64);
            any = true;
        }
    }
    Ok(any.then_some(v))
}

/// Locate sign changes of stability-form eigenvalues by bisection on the
/// number of negative eigenvalues, refining to |λ| ≤ 1e-9.
pub fn detect_crossings(sys: &HamiltonianSystem, branch: &Branch, opts: &ContinuationOptions) -> Result<Vec<CrossingEvent>> {
    let setup = branch.setup.as_ref().ok_or_else(|| Error::InvalidModel("branch has no continuation setup".into()))?;
    let spaces = weight_spaces(sys)?;
    let mut out = Vec::new();
    for (i, pair) in branch.points.windows(2).enumerate() {
        let (a, b) = (&pair[0], &pair[1]);
        let na = negatives(&a.eigs);
        if na == negatives(&b.eigs) || a.eigs.len() != b.eigs.len() {
            continue;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        let mut best: Option<(f64, DVector<f64>, DVector<f64>, Vec<f64>)> = None;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            let (z, xi) = point_on_segment(sys, setup, a, b, mid, opts)?;
            let (vals, _) = stability_form(sys, &z, &xi)?;
            let e: Vec<f64> = vals.iter().copied().collect();
            let (_, m) = min_abs(&e);
            let better = best.as_ref().is_none_or(|(_, _, _, be)| m < min_abs(be).1);
            if better {
                best = Some((mid, z, xi, e.clone()));
            }
            if m <= 1e-9 {
                break;
            }
            if negatives(&e) == na {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let Some((theta, z, xi, e)) = best else { continue };
        let (idx, lam) = min_abs(&e);
        let max = e.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        let ktol = 1e-7 * max;
        let multiplicity = e.iter().filter(|v| v.abs() <= ktol).count().max(1);
        let s = a.arclength + theta * (b.arclength - a.arclength);
        let point = make_point(sys, &spaces, z.clone(), xi.clone(), s)?;
        let kernel_isotropy = match kernel_vector(sys, &z, &xi, ktol.max(lam * 1.0001))? {
            Some(v) => kernel_isotropy_label(sys, &spaces, &z, &v),
            None => "unknown".into(),
        };
        out.push(CrossingEvent { index: i, eigen_index: idx, multiplicity, lambda: e[idx], theta, point, kernel_isotropy });
    }
    Ok(out)
}

/// G-orthogonal projector onto the sum of weight spaces fixed by `k`.
fn fixed_projector(spaces: &[WeightSpace], g: &DMatrix<f64>, k: &TorusStabilizer) -> DMatrix<f64> {
    let n = g.nrows();
    let mut p = DMatrix::zeros(n, n);
    for s in spaces.iter().filter(|s| k.fixes_weight(&s.weights)) {
        p += &s.basis * s.basis.transpose() * g;
    }
    p
}

/// All torus elements of the discrete part of a stabilizer, as angle vectors.
fn discrete_elements(h: &TorusStabilizer, k: usize) -> Vec<DVector<f64>> {
    let mut out = vec![DVector::zeros(k)];
    for (ang, (_, d)) in h.discrete_angles().into_iter().zip(&h.discrete) {
        let mut next = Vec::new();
        for base in &out {
            for j in 0..*d {
                next.push(base + &ang * j as f64);
            }
        }
        out = next;
    }
    out
}

/// Classify a crossing by the action of the isotropy of the base point on
/// the fixed-point space V₀^K of the kernel isotropy K.
pub fn classify_crossing(sys: &HamiltonianSystem, event: &CrossingEvent, tol_rank: f64, newton: NewtonOptions) -> Result<Classification> {
    let z_e = &event.point.z;
    let dec = build_slice(sys, z_e, &event.point.xi, tol_rank)?;
    let rp = build_reduced(sys, &dec, None, newton)?;
    let spaces = weight_spaces(sys)?;
    let g = sys.phase.inner().clone();
    let n = sys.dim();
    let k = sys.torus_rank();
    let d = rp.kernel_dim();
    let e_phase = &dec.v_basis * &rp.v0_basis;
    let unclassified = |rp: ReducedProblem, fixed: DMatrix<f64>, label: String| Classification {
        kind: CrossingKind::Unclassified,
        weight: None,
        circle_generator: None,
        element: None,
        fixed_basis: fixed,
        reduced: rp,
        isotropy_k: label,
    };
    if d == 0 {
        return Ok(unclassified(rp, DMatrix::zeros(0, 0), "unknown".into()));
    }
    let coeffs = DVector::from_fn(d, |i, _| 1.0 + 0.618_034 * i as f64);
    let v = &e_phase * coeffs;
    let h = point_stabilizer(sys, &spaces, z_e);
    let mut w = active_weights(&spaces, &g, z_e, 1e-9);
    w.extend(active_weights(&spaces, &g, &v, 1e-9));
    let kstab = stabilizer(&w, k);
    let tol = 1e-9 * (1.0 + z_e.norm());
    let finite_k: Vec<&DMatrix<f64>> = sys
        .symmetry
        .finite_elements()
        .iter()
        .filter(|f| (*f * z_e - z_e).norm() <= tol && (*f * &v - &v).norm() <= 1e-9 * v.norm())
        .collect();
    let mut cond = (DMatrix::identity(n, n) - fixed_projector(&spaces, &g, &kstab)) * &e_phase;
    for f in &finite_k {
        cond = crate::linalg::hstack(&[&cond.transpose(), &((*f - DMatrix::identity(n, n)) * &e_phase).transpose()]).transpose();
    }
    let fixed = null_space(&cond, 1e-8);
    let label = kstab.label();
    match fixed.ncols() {
        1 => {
            let e = &e_phase * fixed.column(0);
            let minus_id = |m: &DMatrix<f64>| (m * &e + &e).norm() <= 1e-8 * e.norm() && (m * z_e - z_e).norm() <= 1e-8 * (1.0 + z_e.norm());
            let mut element = None;
            let we = active_weights(&spaces, &g, &e, 1e-9);
            if !we.is_empty() {
                let wm = DMatrix::from_fn(we.len(), k, |i, j| we[i][j] as f64);
                let vc = h.continuous_matrix(k);
                for dth in discrete_elements(&h, k) {
                    let rhs = DVector::from_element(we.len(), std::f64::consts::PI) - &wm * &dth;
                    let a = &wm * &vc;
                    let phi = lstsq(&a, &rhs, 1e-12);
                    let theta = &dth + &vc * phi;
                    let m = sys.symmetry.group_element(&theta);
                    if minus_id(&m) {
                        element = Some(m);
                        break;
                    }
                }
            }
            if element.is_none() {
                element = sys.symmetry.finite_elements().iter().find(|f| minus_id(f)).cloned();
            }
            let kind = if element.is_some() { CrossingKind::Pitchfork } else { CrossingKind::SaddleNode };
            Ok(Classification { kind, weight: None, circle_generator: None, element, fixed_basis: fixed, reduced: rp, isotropy_k: label })
        }
        2 => {
            let e = &e_phase * fixed.column(0);
            let we = active_weights(&spaces, &g, &e, 1e-9);
            if we.len() == 1 {
                for c in &h.continuous {
                    let wk: i64 = we[0].iter().zip(c).map(|(a, b)| a * b).sum();
                    if wk != 0 {
                        return Ok(Classification {
                            kind: CrossingKind::ComplexCircle,
                            weight: Some(wk.abs()),
                            circle_generator: Some(c.clone()),
                            element: None,
                            fixed_basis: fixed,
                            reduced: rp,
                            isotropy_k: label,
                        });
                    }
                }
            }
            Ok(unclassified(rp, fixed, label))
        }
        _ => Ok(unclassified(rp, fixed, label)),
    }
}
