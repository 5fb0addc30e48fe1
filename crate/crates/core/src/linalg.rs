//! Dense linear algebra helpers on top of nalgebra.
//!
//! Everything here is deterministic: eigen- and singular-vectors come back in a
//! fixed order with a fixed sign so that downstream bases are reproducible.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};

/// Symmetric part (M + Mᵀ)/2.
pub fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Largest absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |a, &x| a.max(x.abs()))
}

/// Flip the sign so the largest-magnitude component is positive.
pub fn canonical_sign(v: &mut DVector<f64>) {
    let mut best = 0.0_f64;
    for &x in v.iter() {
        if x.abs() > best.abs() + 1e-12 {
            best = x;
        }
    }
    if best < 0.0 {
        v.neg_mut();
    }
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues ascending.
pub fn sym_eigen_sorted(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (DVector::zeros(0), DMatrix::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(sym(m));
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = DVector::from_iterator(n, idx.iter().map(|&i| eig.eigenvalues[i]));
    let mut vecs = DMatrix::zeros(n, n);
    for (c, &i) in idx.iter().enumerate() {
        let mut v = eig.eigenvectors.column(i).into_owned();
        canonical_sign(&mut v);
        vecs.set_column(c, &v);
    }
    (vals, vecs)
}

/// Singular values (descending) and a full set of right singular vectors as
/// columns, padding with zero rows when the matrix is wide.
pub fn svd_full(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let (r, c) = m.shape();
    if c == 0 {
        return (vec![], DMatrix::zeros(0, 0));
    }
    let padded = if r < c {
        let mut p = DMatrix::zeros(c, c);
        p.view_mut((0, 0), (r, c)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = SVD::new(padded, false, true);
    let vt = svd.v_t.expect("requested v_t");
    let s = svd.singular_values;
    let mut idx: Vec<usize> = (0..s.len()).collect();
    idx.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let sig: Vec<f64> = idx.iter().map(|&i| s[i]).collect();
    let mut v = DMatrix::zeros(c, c);
    for (col, &i) in idx.iter().enumerate() {
        let mut x = vt.row(i).transpose().into_owned();
        canonical_sign(&mut x);
        v.set_column(col, &x);
    }
    (sig, v)
}

/// Singular values, descending.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return vec![];
    }
    let mut s: Vec<f64> = SVD::new(m.clone(), false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Orthonormal (Euclidean) basis of the null space: right singular vectors
/// whose singular value is at most `tol`.
pub fn null_space(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let c = m.ncols();
    if m.nrows() == 0 {
        return DMatrix::identity(c, c);
    }
    let (sig, v) = svd_full(m);
    let keep: Vec<usize> = (0..c)
        .filter(|&i| sig.get(i).copied().unwrap_or(0.0) <= tol)
        .collect();
    select_columns(&v, &keep)
}

pub fn numerical_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    singular_values(m).iter().filter(|&&s| s > tol).count()
}

pub fn select_columns(m: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows(), cols.len());
    for (j, &c) in cols.iter().enumerate() {
        out.set_column(j, &m.column(c));
    }
    out
}

pub fn hstack(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let rows = blocks.iter().map(|b| b.nrows()).max().unwrap_or(0);
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut c0 = 0;
    for b in blocks {
        if b.ncols() > 0 {
            out.view_mut((0, c0), (b.nrows(), b.ncols())).copy_from(*b);
        }
        c0 += b.ncols();
    }
    out
}

/// Modified Gram-Schmidt (two passes) in the inner product `g`. Columns whose
/// remaining norm drops below `drop_tol` times their original norm, or times
/// the largest column norm, are discarded.
pub fn gram_schmidt(cols: &DMatrix<f64>, g: &DMatrix<f64>, drop_tol: f64) -> DMatrix<f64> {
    let gnorm = |v: &DVector<f64>| v.dot(&(g * v)).max(0.0).sqrt();
    let scale = (0..cols.ncols()).map(|j| gnorm(&cols.column(j).into_owned())).fold(0.0_f64, f64::max);
    let mut out: Vec<DVector<f64>> = Vec::new();
    for j in 0..cols.ncols() {
        let mut v = cols.column(j).into_owned();
        let n0 = gnorm(&v);
        if n0 <= drop_tol * scale || n0 == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for u in &out {
                let p = u.dot(&(g * &v));
                v -= u * p;
            }
        }
        let n1 = (v.dot(&(g * &v))).max(0.0).sqrt();
        if n1 > drop_tol * n0 {
            out.push(v / n1);
        }
    }
    let mut m = DMatrix::zeros(cols.nrows(), out.len());
    for (j, v) in out.iter().enumerate() {
        m.set_column(j, v);
    }
    m
}

/// Basis of `ambient ∩ sub^⊥` (orthogonality in `g`), orthonormal in `g`.
/// `ambient` columns span the ambient subspace; `sub` need not be orthonormal.
pub fn complement_in(
    sub: &DMatrix<f64>,
    ambient: &DMatrix<f64>,
    g: &DMatrix<f64>,
    tol: f64,
) -> DMatrix<f64> {
    if sub.ncols() == 0 {
        return gram_schmidt(ambient, g, 1e-10);
    }
    let sub_o = gram_schmidt(sub, g, 1e-10);
    let c = sub_o.transpose() * g * ambient;
    let coeffs = null_space(&c, tol);
    gram_schmidt(&(ambient * coeffs), g, 1e-10)
}

/// Symmetric positive definite square root and its inverse.
pub fn spd_sqrt(g: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (vals, vecs) = sym_eigen_sorted(g);
    let s = DMatrix::from_diagonal(&vals.map(|x| x.max(0.0).sqrt()));
    let si = DMatrix::from_diagonal(&vals.map(|x| 1.0 / x.max(f64::MIN_POSITIVE).sqrt()));
    (&vecs * s * vecs.transpose(), &vecs * si * vecs.transpose())
}

/// Pfaffian of a skew-symmetric matrix by Parlett-Reid elimination with
/// partial pivoting. Odd dimension gives 0, the empty matrix gives 1.
pub fn pfaffian(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    if n % 2 == 1 {
        return 0.0;
    }
    let mut a = a.clone();
    let mut pf = 1.0;
    let mut k = 0;
    while k + 1 < n {
        let mut kp = k + 1;
        for i in k + 1..n {
            if a[(i, k)].abs() > a[(kp, k)].abs() {
                kp = i;
            }
        }
        if kp != k + 1 {
            a.swap_rows(k + 1, kp);
            a.swap_columns(k + 1, kp);
            pf = -pf;
        }
        if a[(k + 1, k)] == 0.0 {
            return 0.0;
        }
        pf *= a[(k, k + 1)];
        if k + 2 < n {
            let piv = a[(k, k + 1)];
            let tau: Vec<f64> = (k + 2..n).map(|j| a[(k, j)] / piv).collect();
            let col: Vec<f64> = (k + 2..n).map(|i| a[(i, k + 1)]).collect();
            for (ii, i) in (k + 2..n).enumerate() {
                for (jj, j) in (k + 2..n).enumerate() {
                    a[(i, j)] += tau[ii] * col[jj] - col[ii] * tau[jj];
                }
            }
        }
        k += 2;
    }
    pf
}

/// Solve a square system, falling back to an SVD least-squares solve when LU
/// reports singularity.
pub fn solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    if a.nrows() == 0 {
        return Some(DVector::zeros(0));
    }
    if let Some(x) = a.clone().lu().solve(b) {
        if x.iter().all(|v| v.is_finite()) {
            return Some(x);
        }
    }
    let svd = SVD::new(a.clone(), true, true);
    let smax = svd.singular_values.max();
    svd.solve(b, 1e-14 * smax.max(1e-300)).ok()
}

/// Minimum-norm least-squares solve via SVD.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>, rel_tol: f64) -> DVector<f64> {
    if a.ncols() == 0 {
        return DVector::zeros(0);
    }
    let svd = SVD::new(a.clone(), true, true);
    let smax = svd.singular_values.max();
    svd.solve(b, rel_tol * smax.max(1e-300))
        .unwrap_or_else(|_| DVector::zeros(a.ncols()))
}

/// Row-major nested vectors for serialization.
pub fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pfaffian_of_standard_blocks() {
        let mut a = DMatrix::zeros(4, 4);
        a[(0, 1)] = 2.0;
        a[(1, 0)] = -2.0;
        a[(2, 3)] = 3.0;
        a[(3, 2)] = -3.0;
        assert!((pfaffian(&a) - 6.0).abs() < 1e-14);
    }

    #[test]
    fn pfaffian_squared_is_determinant() {
        let m = DMatrix::from_fn(6, 6, |i, j| ((i * 7 + j * 3) as f64).sin());
        let a = &m - m.transpose();
        let pf = pfaffian(&a);
        let det = a.determinant();
        assert!((pf * pf - det).abs() < 1e-9 * det.abs().max(1.0));
    }

    #[test]
    fn null_space_of_wide_matrix() {
        let m = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let n = null_space(&m, 1e-12);
        assert_eq!(n.ncols(), 2);
        assert!((&m * &n).norm() < 1e-14);
    }

    #[test]
    fn eigen_sorted_ascending() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let (vals, vecs) = sym_eigen_sorted(&m);
        assert!((vals[0] - 1.0).abs() < 1e-14 && (vals[1] - 3.0).abs() < 1e-14);
        assert!((&m * vecs.column(1) - vecs.column(1) * 3.0).norm() < 1e-14);
    }

    #[test]
    fn complement_is_orthogonal_in_inner_product() {
        let g = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0, 3.0]));
        let sub = DMatrix::from_column_slice(3, 1, &[1.0, 1.0, 0.0]);
        let amb = DMatrix::identity(3, 3);
        let c = complement_in(&sub, &amb, &g, 1e-12);
        assert_eq!(c.ncols(), 2);
        assert!((sub.transpose() * &g * &c).norm() < 1e-14);
        assert!((c.transpose() * &g * &c - DMatrix::identity(2, 2)).norm() < 1e-13);
    }
}
