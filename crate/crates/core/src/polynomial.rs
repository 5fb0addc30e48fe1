//! Sparse real polynomials with exact first and second derivatives.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::Hamiltonian;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coeff: f64,
    pub monomial: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    nvars: usize,
    terms: Vec<Term>,
}

fn powi(x: f64, e: u32) -> f64 {
    x.powi(e as i32)
}

impl Polynomial {
    pub fn new(nvars: usize, terms: Vec<Term>) -> Result<Self> {
        for t in &terms {
            if t.monomial.len() != nvars {
                return Err(Error::DimensionMismatch(format!(
                    "monomial of length {} in {} variables",
                    t.monomial.len(),
                    nvars
                )));
            }
            if !t.coeff.is_finite() {
                return Err(Error::InvalidModel("non-finite coefficient".into()));
            }
        }
        Ok(Self { nvars, terms })
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                t.coeff
                    * t.monomial
                        .iter()
                        .zip(x)
                        .map(|(&e, &xi)| powi(xi, e))
                        .product::<f64>()
            })
            .sum()
    }

    /// Derivative of one term with respect to the listed variables (repeats allowed).
    fn partial_product(t: &Term, x: &[f64], wrt: &[usize]) -> f64 {
        let mut p = t.coeff;
        for (k, (&e, &xk)) in t.monomial.iter().zip(x).enumerate() {
            let mut e = e as i64;
            for &idx in wrt {
                if idx == k {
                    p *= e as f64;
                    e -= 1;
                }
            }
            if e < 0 {
                return 0.0;
            }
            p *= powi(xk, e as u32);
        }
        p
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.nvars];
        for t in &self.terms {
            for (i, gi) in g.iter_mut().enumerate() {
                if t.monomial[i] > 0 {
                    *gi += Self::partial_product(t, x, &[i]);
                }
            }
        }
        g
    }

    pub fn hess(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let n = self.nvars;
        let mut h = vec![vec![0.0; n]; n];
        for t in &self.terms {
            for i in 0..n {
                if t.monomial[i] == 0 {
                    continue;
                }
                for j in i..n {
                    if t.monomial[j] == 0 || (i == j && t.monomial[i] < 2) {
                        continue;
                    }
                    let v = Self::partial_product(t, x, &[i, j]);
                    h[i][j] += v;
                    if i != j {
                        h[j][i] += v;
                    }
                }
            }
        }
        h
    }
}

impl Hamiltonian for Polynomial {
    fn dim(&self) -> usize {
        self.nvars
    }
    fn value(&self, z: &DVector<f64>) -> f64 {
        self.eval(z.as_slice())
    }
    fn gradient(&self, z: &DVector<f64>) -> Option<DVector<f64>> {
        Some(DVector::from_vec(self.grad(z.as_slice())))
    }
    fn hessian(&self, z: &DVector<f64>) -> Option<DMatrix<f64>> {
        let h = self.hess(z.as_slice());
        let n = self.nvars;
        Some(DMatrix::from_fn(n, n, |i, j| h[i][j]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Polynomial {
        Polynomial::new(
            2,
            vec![
                Term { coeff: 3.0, monomial: vec![2, 1] },
                Term { coeff: -1.0, monomial: vec![0, 3] },
                Term { coeff: 0.5, monomial: vec![1, 0] },
            ],
        )
        .unwrap()
    }

    #[test]
    fn derivatives_by_hand() {
        // p = 3x²y - y³ + x/2
        let p = sample();
        let (x, y) = (0.7, -1.3);
        assert!((p.eval(&[x, y]) - (3.0 * x * x * y - y * y * y + 0.5 * x)).abs() < 1e-14);
        let g = p.grad(&[x, y]);
        assert!((g[0] - (6.0 * x * y + 0.5)).abs() < 1e-14);
        assert!((g[1] - (3.0 * x * x - 3.0 * y * y)).abs() < 1e-14);
        let h = p.hess(&[x, y]);
        assert!((h[0][0] - 6.0 * y).abs() < 1e-14);
        assert!((h[0][1] - 6.0 * x).abs() < 1e-14);
        assert!((h[1][0] - 6.0 * x).abs() < 1e-14);
        assert!((h[1][1] + 6.0 * y).abs() < 1e-14);
    }

    #[test]
    fn rejects_wrong_length() {
        assert!(Polynomial::new(2, vec![Term { coeff: 1.0, monomial: vec![1] }]).is_err());
    }
}
