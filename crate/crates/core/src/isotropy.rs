//! Isotropy of points under a torus action.
//!
//! The phase space splits into planes on which the torus acts by rotations
//! with integer weight vectors w ∈ ℤ^k; θ fixes a plane iff w·θ ∈ 2πℤ. The
//! stabilizer of a set of planes is read off the Smith normal form of the
//! stacked weights.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{spd_sqrt, sym_eigen_sorted};
use crate::system::HamiltonianSystem;

/// A torus-invariant subspace with a common weight vector. Planes have a
/// 2-column basis (x, y) with A_θ x = (w·θ) y; the zero-weight space may have
/// any number of columns. Bases are orthonormal in the reference inner product.
#[derive(Debug, Clone)]
pub struct WeightSpace {
    pub weights: Vec<i64>,
    pub basis: DMatrix<f64>,
}

impl WeightSpace {
    pub fn is_trivial(&self) -> bool {
        self.weights.iter().all(|&w| w == 0)
    }
}

// Generic combination coefficients: powers of the plastic number's reciprocal.
const GENERIC: [f64; 8] = [1.0, 0.754_877_666_2, 0.569_840_290_9, 0.430_159_709_0, 0.324_717_957_2, 0.245_122_333_8, 0.185_037_170_8, 0.139_680_581_6];

/// Decompose phase space into torus weight spaces.
pub fn weight_spaces(sys: &HamiltonianSystem) -> Result<Vec<WeightSpace>> {
    let n = sys.dim();
    let k = sys.torus_rank();
    if k == 0 {
        return Ok(vec![WeightSpace { weights: vec![], basis: DMatrix::identity(n, n) }]);
    }
    let (s, si) = spd_sqrt(sys.phase.inner());
    let whitened: Vec<DMatrix<f64>> = sys.symmetry.generators().iter().map(|a| &s * a * &si).collect();
    let mut comb = DMatrix::zeros(n, n);
    for (i, a) in whitened.iter().enumerate() {
        let c = GENERIC.get(i).copied().unwrap_or(1.0 / (i as f64 + 2.0).sqrt());
        comb += a * c;
    }
    let sq = &comb * &comb;
    let (vals, vecs) = sym_eigen_sorted(&sq);
    let scale = vals.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
    let tol = 1e-9 * scale;

    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && (vals[j] - vals[i]).abs() <= tol {
            j += 1;
        }
        let block = vecs.columns(i, j - i).into_owned();
        if vals[i].abs() <= tol {
            for (g, a) in whitened.iter().enumerate() {
                if (a * &block).norm() > 1e-8 * scale.sqrt() {
                    return Err(Error::NonIntegralWeights(format!("generator {g} does not vanish on the zero-weight space")));
                }
            }
            out.push(WeightSpace { weights: vec![0; k], basis: &si * block });
        } else {
            let omega = (-vals[i]).sqrt();
            let jm = &comb / omega;
            let mut remaining = block;
            while remaining.ncols() > 0 {
                let u = remaining.column(0).normalize();
                let ju = &jm * &u;
                let mut w = Vec::with_capacity(k);
                for (g, a) in whitened.iter().enumerate() {
                    let au = a * &u;
                    let wf = au.dot(&ju);
                    if (&au - &ju * wf).norm() > 1e-8 * (1.0 + wf.abs()) {
                        return Err(Error::NonIntegralWeights(format!("generator {g} is not a rotation on a common plane")));
                    }
                    let r = wf.round();
                    if (wf - r).abs() > 1e-8 {
                        return Err(Error::NonIntegralWeights(format!("generator {g} has weight {wf}")));
                    }
                    w.push(r as i64);
                }
                let mut plane = DMatrix::zeros(n, 2);
                plane.set_column(0, &u);
                plane.set_column(1, &ju);
                let keep = crate::linalg::null_space(&(plane.transpose() * &remaining), 1e-6);
                remaining = &remaining * keep;
                out.push(WeightSpace { weights: w, basis: &si * plane });
            }
        }
        i = j;
    }
    Ok(merge_equal_weights(out, n))
}

/// Canonical ordering: planes with the same weight vector (up to sign) are
/// kept separate, sorted lexicographically by |w| then the first basis entry.
fn merge_equal_weights(mut spaces: Vec<WeightSpace>, _n: usize) -> Vec<WeightSpace> {
    for s in &mut spaces {
        // orient so that the first nonzero weight is positive
        if let Some(&f) = s.weights.iter().find(|&&w| w != 0) {
            if f < 0 {
                s.weights.iter_mut().for_each(|w| *w = -*w);
                let y = s.basis.column(1).into_owned();
                s.basis.set_column(1, &(-y));
            }
        }
    }
    spaces.sort_by(|a, b| a.weights.cmp(&b.weights));
    spaces
}

/// Smith normal form U·A·V = D with unimodular U, V and d₁ | d₂ | … ≥ 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SmithForm {
    pub u: Vec<Vec<i64>>,
    pub d: Vec<Vec<i64>>,
    pub v: Vec<Vec<i64>>,
}

impl SmithForm {
    pub fn diagonal(&self) -> Vec<i64> {
        (0..self.d.len().min(self.d.first().map_or(0, |r| r.len()))).map(|i| self.d[i][i]).collect()
    }
    pub fn rank(&self) -> usize {
        self.diagonal().iter().filter(|&&x| x != 0).count()
    }
}

fn identity(n: usize) -> Vec<Vec<i64>> {
    (0..n).map(|i| (0..n).map(|j| i64::from(i == j)).collect()).collect()
}

pub fn smith_normal_form(a: &[Vec<i64>], cols: usize) -> SmithForm {
    let m = a.len();
    let mut d: Vec<Vec<i64>> = a.to_vec();
    let mut u = identity(m);
    let mut v = identity(cols);
    let row_op = |mat: &mut Vec<Vec<i64>>, dst: usize, src: usize, q: i64| {
        for c in 0..mat[dst].len() {
            mat[dst][c] -= q * mat[src][c];
        }
    };
    let col_op = |mat: &mut Vec<Vec<i64>>, dst: usize, src: usize, q: i64| {
        for r in mat.iter_mut() {
            r[dst] -= q * r[src];
        }
    };
    for t in 0..m.min(cols) {
        loop {
            let mut best: Option<(usize, usize)> = None;
            for i in t..m {
                for j in t..cols {
                    if d[i][j] != 0 && best.is_none_or(|(bi, bj)| d[i][j].abs() < d[bi][bj].abs()) {
                        best = Some((i, j));
                    }
                }
            }
            let Some((pi, pj)) = best else { break };
            d.swap(t, pi);
            u.swap(t, pi);
            for r in d.iter_mut() {
                r.swap(t, pj);
            }
            for r in v.iter_mut() {
                r.swap(t, pj);
            }
            let p = d[t][t];
            let mut dirty = false;
            for i in t + 1..m {
                let q = d[i][t] / p;
                if q != 0 {
                    row_op(&mut d, i, t, q);
                    row_op(&mut u, i, t, q);
                }
                dirty |= d[i][t] != 0;
            }
            for j in t + 1..cols {
                let q = d[t][j] / p;
                if q != 0 {
                    col_op(&mut d, j, t, q);
                    col_op(&mut v, j, t, q);
                }
                dirty |= d[t][j] != 0;
            }
            if dirty {
                continue;
            }
            let bad = (t + 1..m).find(|&i| (t + 1..cols).any(|j| d[i][j] % p != 0));
            match bad {
                Some(i) => {
                    row_op(&mut d, t, i, -1);
                    row_op(&mut u, t, i, -1);
                }
                None => break,
            }
        }
        if t < m && d[t][t] < 0 {
            d[t].iter_mut().for_each(|x| *x = -*x);
            u[t].iter_mut().for_each(|x| *x = -*x);
        }
    }
    SmithForm { u, d, v }
}

/// Subgroup of the torus {θ : Wθ ∈ 2πℤ^m}.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusStabilizer {
    /// Primitive integer directions of the identity component (columns).
    pub continuous: Vec<Vec<i64>>,
    /// Generators (integer direction c, order d): θ = 2π c / d.
    pub discrete: Vec<(Vec<i64>, i64)>,
}

impl TorusStabilizer {
    pub fn dim(&self) -> usize {
        self.continuous.len()
    }

    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        match self.continuous.len() {
            0 => {}
            1 => parts.push("S1".to_string()),
            c => parts.push(format!("T{c}")),
        }
        for (_, d) in &self.discrete {
            parts.push(format!("Z{d}"));
        }
        if parts.is_empty() {
            "1".into()
        } else {
            parts.join("x")
        }
    }

    /// Columns of the identity component as a real k×c matrix.
    pub fn continuous_matrix(&self, k: usize) -> DMatrix<f64> {
        DMatrix::from_fn(k, self.continuous.len(), |i, j| self.continuous[j][i] as f64)
    }

    /// Discrete generators as angle vectors θ = 2πc/d.
    pub fn discrete_angles(&self) -> Vec<DVector<f64>> {
        self.discrete
            .iter()
            .map(|(c, d)| DVector::from_iterator(c.len(), c.iter().map(|&x| 2.0 * std::f64::consts::PI * x as f64 / *d as f64)))
            .collect()
    }

    /// Does every element fix a plane of weight w?
    pub fn fixes_weight(&self, w: &[i64]) -> bool {
        let dot = |c: &[i64]| c.iter().zip(w).map(|(a, b)| a * b).sum::<i64>();
        self.continuous.iter().all(|c| dot(c) == 0) && self.discrete.iter().all(|(c, d)| dot(c).rem_euclid(*d) == 0)
    }
}

/// Stabilizer of the planes with weights `w` (rows), torus rank k.
pub fn stabilizer(w: &[Vec<i64>], k: usize) -> TorusStabilizer {
    if w.is_empty() {
        return TorusStabilizer { continuous: (0..k).map(|i| (0..k).map(|j| i64::from(i == j)).collect()).collect(), discrete: vec![] };
    }
    let snf = smith_normal_form(w, k);
    let diag = snf.diagonal();
    let r = snf.rank();
    let col = |j: usize| (0..k).map(|i| snf.v[i][j]).collect::<Vec<i64>>();
    TorusStabilizer {
        continuous: (r..k).map(col).collect(),
        discrete: (0..r).filter(|&j| diag[j] > 1).map(|j| (col(j), diag[j])).collect(),
    }
}

/// Stabilizer of `w` restricted to the subtorus exp(span C), C integer k×c
/// with primitive columns. Returned directions are in C-coordinates.
pub fn stabilizer_within(w: &[Vec<i64>], sub: &[Vec<i64>]) -> TorusStabilizer {
    let c = sub.len();
    let k = sub.first().map_or(0, |s| s.len());
    let restricted: Vec<Vec<i64>> = w.iter().map(|row| (0..c).map(|j| (0..k).map(|i| row[i] * sub[j][i]).sum()).collect()).collect();
    stabilizer(&restricted, c)
}

/// Weight spaces on which `z` has a component larger than `tol`·‖z‖.
pub fn active_weights(spaces: &[WeightSpace], g: &DMatrix<f64>, z: &DVector<f64>, tol: f64) -> Vec<Vec<i64>> {
    let nz = z.dot(&(g * z)).sqrt();
    let mut out = Vec::new();
    for s in spaces {
        let coeffs = s.basis.transpose() * g * z;
        if coeffs.norm() > tol * nz.max(1e-300) {
            out.push(s.weights.clone());
        }
    }
    out
}

/// Points closer than this to the origin are treated as the origin.
const ORIGIN_TOL: f64 = 1e-12;

/// Torus stabilizer of a point.
pub fn point_stabilizer(sys: &HamiltonianSystem, spaces: &[WeightSpace], z: &DVector<f64>) -> TorusStabilizer {
    let w = if z.norm() <= ORIGIN_TOL { Vec::new() } else { active_weights(spaces, sys.phase.inner(), z, 1e-9) };
    stabilizer(&w, sys.torus_rank())
}

/// Isotropy label of a point: torus stabilizer, plus the number of finite
/// elements fixing it when that is more than the identity.
pub fn isotropy_label(sys: &HamiltonianSystem, spaces: &[WeightSpace], z: &DVector<f64>) -> String {
    let base = point_stabilizer(sys, spaces, z).label();
    let tol = 1e-9 * (1.0 + z.norm());
    let fixed = sys.symmetry.finite_elements().iter().filter(|g| (*g * z - z).norm() <= tol).count();
    let id_listed = sys.symmetry.finite_elements().iter().any(|g| (g - DMatrix::identity(g.nrows(), g.ncols())).norm() == 0.0);
    let order = fixed + usize::from(!id_listed);
    if order > 1 {
        if base == "1" {
            format!("F{order}")
        } else {
            format!("{base}xF{order}")
        }
    } else {
        base
    }
}

/// Isotropy label of `v` inside the identity component of Stab(z_e).
pub fn kernel_isotropy_label(sys: &HamiltonianSystem, spaces: &[WeightSpace], z_e: &DVector<f64>, v: &DVector<f64>) -> String {
    let h = point_stabilizer(sys, spaces, z_e);
    let w = active_weights(spaces, sys.phase.inner(), v, 1e-9);
    stabilizer_within(&w, &h.continuous).label()
}
