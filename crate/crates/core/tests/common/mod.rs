#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use releq_core::models::wave::{InvariantTerm, WaveParams};
use releq_core::HamiltonianSystem;

fn swap(e: [u32; 6]) -> [u32; 6] {
    [e[1], e[0], e[3], e[2], e[5], e[4]]
}

/// Random swap-symmetric invariant polynomial of degree ≤ 3 with b₁ bounded
/// away from zero.
pub fn random_wave_params(rng: &mut ChaCha8Rng, c: f64, xi2: f64) -> WaveParams {
    let mut terms = Vec::new();
    let mut push = |coeff: f64, e: [u32; 6]| {
        terms.push(InvariantTerm::new(coeff, e));
        if swap(e) != e {
            terms.push(InvariantTerm::new(coeff, swap(e)));
        }
    };
    for j in 0..4 {
        let mut e = [0; 6];
        e[j] = 1;
        if j == 0 || j == 2 {
            push(rng.gen_range(0.5..2.5), e);
        }
    }
    push(rng.gen_range(0.5..1.5) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 }, [0, 0, 0, 0, 1, 0]);
    for _ in 0..5 {
        let mut e = [0u32; 6];
        let deg = rng.gen_range(2..=3);
        for _ in 0..deg {
            e[rng.gen_range(0..6)] += 1;
        }
        push(rng.gen_range(-1.0..1.0), e);
    }
    WaveParams { terms, c, xi2 }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// max_i ‖D²(h − J^ξ)·Aᵢz‖ / ‖D²(h − J^ξ)‖₂.
pub fn containment(sys: &HamiltonianSystem, z: &DVector<f64>, xi: &DVector<f64>) -> f64 {
    let h = sys.augmented_hessian(z, xi).unwrap();
    let norm = h.clone().svd(false, false).singular_values.max();
    let orbit = sys.group_orbit_tangent(z);
    (0..orbit.ncols()).map(|i| (&h * orbit.column(i)).norm()).fold(0.0, f64::max) / norm
}

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    (m - m.transpose()).amax() <= tol * m.amax().max(1.0)
}
