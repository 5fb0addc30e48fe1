//! Acceptance suite: one line per criterion. Runs without the libtest
//! harness so the lines are always printed; exits non-zero on any failure.

mod common;

use common::{containment, random_wave_params, rel_err};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use releq_core::branch::{
    classify_crossing, continue_branch, detect_crossings, persistence_surface, switch_branch, ContinuationOptions, ContinuationParameter,
    CrossingEvent, CrossingKind, PersistenceGrid, SwitchResult,
};
use releq_core::models::wave::{base_point, from_complex, invariants, pair, wave_reference, wave_system, InvariantTerm, WaveParams};
use releq_core::models::{oscillator_system, resonance_base, resonance_system, ResonanceParams};
use releq_core::reduction::{build_reduced, rigid_residual, so3_structure_constants, NewtonOptions, ReducedProblem};
use releq_core::slice::{build_slice, DEFAULT_TOL_RANK};
use releq_core::HamiltonianSystem;

const NEWTON: NewtonOptions = NewtonOptions { tol: 1e-11, max_iter: 50 };

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn reduced_at(sys: &HamiltonianSystem, z: &DVector<f64>, xi: &DVector<f64>) -> ReducedProblem {
    let dec = build_slice(sys, z, xi, DEFAULT_TOL_RANK).expect("slice");
    build_reduced(sys, &dec, None, NEWTON).expect("reduced")
}

// ---------------------------------------------------------------- 1

fn eigenvalue_regression() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0_f64;
    let mut sets = 0;
    while sets < 20 {
        let xi2 = rng.gen_range(-1.0..1.0);
        let seed = rng.gen::<u64>();
        let params: Vec<WaveParams> = [0.3, 0.6, 0.9, 1.2, 1.5].iter().map(|&c| random_wave_params(&mut ChaCha8Rng::seed_from_u64(seed), c, xi2)).collect();
        let spectra: Vec<Vec<f64>> = params.iter().map(|p| wave_reference(p).spectrum()).collect();
        // draws whose spectrum touches zero sit on a crossing, not a regression point
        if spectra.iter().any(|s| s.iter().any(|l| l.abs() < 1e-3)) {
            continue;
        }
        for (p, want) in params.iter().zip(&spectra) {
            let sys = wave_system(p).unwrap();
            let (z, xi) = base_point(p);
            let rp = reduced_at(&sys, &z, &xi);
            let got: Vec<f64> = rp.eigenvalues.iter().copied().collect();
            for (g, w) in got.iter().zip(want) {
                worst = worst.max(rel_err(*g, *w));
            }
        }
        sets += 1;
    }
    outcome(worst <= 1e-8, format!("100 spectra, max relative error {worst:.2e} (tol 1e-8)"))
}

// ---------------------------------------------------------------- 2

/// Ξ₁ on the slice: a₃(Ψ)/2 + b₁Y₁/(4n), Y₁ = x₁² − y₁², n = |z₃|.
fn xi1_closed_form(p: &WaveParams, point: &DVector<f64>) -> f64 {
    let inv = invariants(point);
    let d = p.partials_at(&inv);
    let (x1, y1) = pair(point, 0);
    let (n, _) = pair(point, 2);
    0.5 * d.a[2] + d.b[0] * (x1 * x1 - y1 * y1) / (4.0 * n)
}

fn beta_closed_form() -> Outcome {
    let mut worst_xi = 0.0_f64;
    let mut worst_beta = 0.0_f64;
    let linear: Vec<InvariantTerm> = [[1, 0, 0, 0, 0, 0], [0, 1, 0, 0, 0, 0], [0, 0, 1, 0, 0, 0], [0, 0, 0, 1, 0, 0], [0, 0, 0, 0, 1, 0], [0, 0, 0, 0, 0, 1]]
        .iter()
        .zip([1.0, 1.0, 2.0, 2.0, 1.0, 1.0])
        .map(|(e, c)| InvariantTerm::new(c, *e))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for c in [0.8, 1.0, 1.3] {
        for (which, p) in [(0, WaveParams::default_with(c, 0.5)), (1, WaveParams { terms: linear.clone(), c, xi2: 0.5 })] {
            let sys = wave_system(&p).unwrap();
            let (z, xi) = base_point(&p);
            let rp = reduced_at(&sys, &z, &xi);
            let dec = &rp.dec;
            for i in 0..5 {
                for _ in 0..8 {
                    let eta = DVector::from_vec(vec![0.1 * c * c * (i as f64 / 2.0 - 1.0)]);
                    let dir = DVector::from_fn(dec.dim_v(), |_, _| rng.gen_range(-1.0..1.0));
                    let v = dir.normalize() * rng.gen_range(0.0..0.1);
                    for alpha in [0.0, 0.05] {
                        let a = DVector::from_vec(vec![alpha]);
                        let beta = rp.solve_beta(&eta, &v, &a).unwrap();
                        let gen = dec.full_generator(&a, &beta);
                        let point = releq_core::slice::slice_point(dec, &eta, &v);
                        if which == 0 {
                            worst_xi = worst_xi.max((gen[0] - xi1_closed_form(&p, &point)).abs());
                        } else {
                            let (x1, y1) = pair(&point, 0);
                            let (n, _) = pair(&point, 2);
                            let b1 = p.partials_at(&invariants(&point)).b[0];
                            let beta_e1 = (dec.m_basis.clone() * &beta)[0];
                            worst_beta = worst_beta.max((beta_e1 - b1 * (x1 * x1 - y1 * y1) / (4.0 * n)).abs());
                        }
                    }
                }
            }
        }
    }
    outcome(worst_xi <= 1e-8 && worst_beta <= 1e-8, format!("max |Ξ₁ error| {worst_xi:.2e}, max |β error| {worst_beta:.2e} (tol 1e-8)"))
}

// ---------------------------------------------------------------- 3

fn v1_closed_form() -> Outcome {
    let c = 0.8;
    let p = WaveParams::default_with(c, 0.5);
    let sys = wave_system(&p).unwrap();
    // λ₂ = a₂ − ξ₂ vanishes at ξ₂ = a₂(z_e) = 1 + C²/2
    let xi2 = wave_reference(&p).a[1];
    let (z, _) = base_point(&p);
    let xi = DVector::from_vec(vec![wave_reference(&p).xi1_hat, xi2]);
    let rp = reduced_at(&sys, &z, &xi);
    if rp.kernel_dim() != 2 {
        return outcome(false, format!("kernel dim {} at the λ₂ crossing", rp.kernel_dim()));
    }
    let g = sys.phase.inner();
    let basis = &rp.dec.v_basis * &rp.v0_basis;
    let mut worst = 0.0_f64;
    for q in [0.005, 0.01, 0.02, 0.035, 0.05] {
        for phi in [0.0, 0.4, 1.3] {
            for alpha in [0.0, 0.02] {
                let target = from_complex(&[(0.0, 0.0), (q * f64::cos(phi), q * f64::sin(phi)), (0.0, 0.0), (0.0, 0.0)]);
                let v0 = basis.transpose() * g * target;
                let s = rp.solve(&DVector::zeros(1), &v0, &DVector::from_vec(vec![alpha])).unwrap();
                let d = p.partials_at(&invariants(&s.point));
                let (x2, y2) = pair(&s.point, 1);
                let (x4, y4) = pair(&s.point, 3);
                let den = 2.0 * (d.a[3] - 2.0 * s.generator[1]);
                let (ex, ey) = (-d.b[1] * (x2 * x2 - y2 * y2) / den, -d.b[1] * 2.0 * x2 * y2 / den);
                let err = ((x4 - ex).powi(2) + (y4 - ey).powi(2)).sqrt() / (ex * ex + ey * ey).sqrt();
                worst = worst.max(err);
            }
        }
    }
    outcome(worst <= 1e-6, format!("|z₂| ∈ [0.005, 0.05], max relative z₄ error {worst:.2e} (tol 1e-6)"))
}

// ---------------------------------------------------------------- 4

fn find_event(sys: &HamiltonianSystem, z: &DVector<f64>, xi: &DVector<f64>, param: ContinuationParameter, opts: &ContinuationOptions) -> Vec<CrossingEvent> {
    let br = continue_branch(sys, z, xi, param, opts).expect("continuation");
    detect_crossings(sys, &br, opts).expect("crossings")
}

fn pitchfork(state: &mut Vec<(HamiltonianSystem, SwitchResult)>) -> Outcome {
    let p = WaveParams::default_with(0.9, 0.5);
    let sys = wave_system(&p).unwrap();
    let (z, xi) = base_point(&p);
    let opts = ContinuationOptions { step: 0.04, n_steps: 6, ..Default::default() };
    let events = find_event(&sys, &z, &xi, ContinuationParameter::Momentum(vec![1.0, 0.0]), &opts);
    let Some(ev) = events.first() else { return outcome(false, "no crossing found in the C-sweep") };
    let c_star = pair(&ev.point.z, 2).0;
    let class = classify_crossing(&sys, ev, DEFAULT_TOL_RANK, NEWTON).unwrap();
    if class.kind != CrossingKind::Pitchfork {
        return outcome(false, format!("classified as {:?}", class.kind));
    }
    // amplitudes spanning s = |z₁|² ∈ [1e-3, 1e-2]; with G = 2I, |z₁|² = a²/2
    let amps: Vec<f64> = (0..10).map(|i| (2.0 * (1e-3 + 1e-3 * i as f64)).sqrt()).collect();
    let sw = switch_branch(&sys, &class, &amps, None).unwrap();
    let (mut ss, mut shift) = (Vec::new(), Vec::new());
    for pt in &sw.branch.points {
        let (x1, y1) = pair(&pt.z, 0);
        ss.push(x1 * x1 + y1 * y1);
        shift.push(pair(&pt.z, 2).0.hypot(pair(&pt.z, 2).1) - c_star);
    }
    let m = DMatrix::from_fn(ss.len(), 2, |i, j| ss[i].powi(j as i32 + 1));
    let coef = m.svd(true, true).solve(&DVector::from_vec(shift), 1e-14).unwrap();
    let want = 1.0 / (4.0 * c_star);
    let slope_err = rel_err(coef[0], want);
    let el = class.element.clone().unwrap();
    let mirror = sw.mirror.as_ref().unwrap();
    let img = sw.branch.points.iter().zip(&mirror.points).map(|(a, b)| (&el * &a.z - &b.z).norm()).fold(0.0, f64::max);
    let pass = slope_err <= 0.05 && img <= 1e-8 && mirror.points.len() == sw.branch.points.len() && ss.first().unwrap() <= &1.01e-3 && ss.last().unwrap() >= &0.99e-2;
    let detail = format!("crossing at C = {c_star:.9}, fitted slope {:.6} vs 1/(4C) = {want:.6} (rel {slope_err:.2e}, tol 5%), ℤ₂ image error {img:.2e} (tol 1e-8)", coef[0]);
    state.push((sys, sw));
    outcome(pass, detail)
}

// ---------------------------------------------------------------- 5

fn complex_circles(state: &mut Vec<(HamiltonianSystem, SwitchResult)>) -> Outcome {
    let c = 0.8;
    let p = WaveParams::default_with(c, 0.5);
    let sys = wave_system(&p).unwrap();
    let (z, xi) = base_point(&p);
    let opts = ContinuationOptions { step: 0.1, n_steps: 10, ..Default::default() };
    let events = find_event(&sys, &z, &xi, ContinuationParameter::Generator(vec![0.0, 1.0]), &opts);
    // closed form: λ₄ = 2 − 2ξ₂ at ξ₂ = 1, λ₂ = 1 + C²/2 − ξ₂ at ξ₂ = 1.32
    let expect = [(1.0, "Z2"), (1.0 + 0.5 * c * c, "1")];
    if events.len() != 2 {
        return outcome(false, format!("{} crossings found, expected 2", events.len()));
    }
    let mut lines = Vec::new();
    let mut pass = true;
    for (ev, (xi2, label)) in events.iter().zip(expect) {
        let class = classify_crossing(&sys, ev, DEFAULT_TOL_RANK, NEWTON).unwrap();
        let amps: Vec<f64> = (1..=6).map(|i| 0.01 * i as f64).collect();
        let Ok(sw) = switch_branch(&sys, &class, &amps, None) else {
            pass = false;
            lines.push(format!("ξ₂ = {:.6}: no branch", ev.point.xi[1]));
            continue;
        };
        let closure = sw.closure_error.unwrap_or(f64::INFINITY);
        let ok = class.kind == CrossingKind::ComplexCircle && (ev.point.xi[1] - xi2).abs() < 1e-8 && closure <= 1e-8 && ev.kernel_isotropy == label;
        pass &= ok;
        lines.push(format!("ξ₂ = {:.9}: {:?} weight {:?}, isotropy {}, closure {closure:.1e}", ev.point.xi[1], class.kind, class.weight, ev.kernel_isotropy));
        state.push((sys.clone(), sw));
    }
    outcome(pass, lines.join("; "))
}

// ---------------------------------------------------------------- 6

fn persistence_rank(persist_points: &mut Vec<(DVector<f64>, DVector<f64>)>) -> Outcome {
    let p = WaveParams::default_with(0.8, 0.5);
    let sys = wave_system(&p).unwrap();
    let (z, xi) = base_point(&p);
    let rp = reduced_at(&sys, &z, &xi);
    let grid = PersistenceGrid { eta: (-3..=3).map(|i| 0.02 * i as f64).collect(), alpha: (-2..=2).map(|i| 0.05 * i as f64).collect() };
    let rep = persistence_surface(&rp, &grid).unwrap();
    for s in rep.samples.iter().filter(|s| s.error.is_none()) {
        persist_points.push((s.z.clone(), s.xi.clone()));
    }
    let rank2 = rep.samples.iter().filter(|s| s.sigma_rank == 2).count() as f64 / rep.samples.len() as f64;
    let pass = rep.expected_sigma_rank == 2 && rank2 >= 0.95 && rep.fraction_ok >= 0.95 && rep.min_abs_pfaffian > rep.pfaffian_threshold;
    outcome(pass, format!("{} samples, rank 2 at {:.0}%, min |Pf| {:.4} (threshold {:.3})", rep.samples.len(), 100.0 * rank2, rep.min_abs_pfaffian, rep.pfaffian_threshold))
}

// ---------------------------------------------------------------- 7, 8

fn recombination(switched: &[(HamiltonianSystem, SwitchResult)], persist: &[(DVector<f64>, DVector<f64>)], persist_sys: &HamiltonianSystem) -> Outcome {
    let mut worst_res = 0.0_f64;
    let mut worst_drift = 0.0_f64;
    let mut count = 0;
    let mut check = |sys: &HamiltonianSystem, z: &DVector<f64>, xi: &DVector<f64>| {
        worst_res = worst_res.max(sys.augmented_gradient(z, xi).unwrap().norm());
        let d = sys.check_relative_equilibrium(z, xi, 1.0, 200).unwrap();
        worst_drift = worst_drift.max(d.orbit_drift);
        count += 1;
    };
    for (sys, sw) in switched {
        for pt in sw.branch.points.iter().chain(sw.mirror.iter().flat_map(|m| m.points.iter())) {
            check(sys, &pt.z, &pt.xi);
        }
    }
    for (z, xi) in persist {
        check(persist_sys, z, xi);
    }
    let tol = 10.0 * NEWTON.tol;
    outcome(worst_res <= tol && worst_drift <= 1e-5, format!("{count} zeros, max ‖D(h − J^Ξ)‖ {worst_res:.2e} (tol {tol:.0e}), max drift {worst_drift:.2e} (tol 1e-5)"))
}

fn kernel_containment(switched: &[(HamiltonianSystem, SwitchResult)]) -> Outcome {
    let mut worst = 0.0_f64;
    let mut count = 0;
    for c in [0.8, 1.0, 1.3] {
        let p = WaveParams::default_with(c, 0.5);
        let sys = wave_system(&p).unwrap();
        let (z, xi) = base_point(&p);
        worst = worst.max(reduced_at(&sys, &z, &xi).containment);
        count += 1;
    }
    for (sys, sw) in switched {
        for pt in &sw.branch.points {
            worst = worst.max(containment(sys, &pt.z, &pt.xi));
            count += 1;
        }
    }
    let osc = oscillator_system(&[1.0, 2.0]).unwrap();
    worst = worst.max(containment(&osc, &DVector::from_vec(vec![0.3, 0.1, -0.2, 0.4]), &DVector::from_vec(vec![1.0, 2.0])));
    outcome(worst <= 1e-7, format!("{} verified points, max relative ‖D²·Aᵢz‖ {worst:.2e} (tol 1e-7)", count + 1))
}

// ---------------------------------------------------------------- 9

fn gradient_structure() -> Outcome {
    let p = ResonanceParams::default();
    let sys = resonance_system(&p).unwrap();
    let (z, xi) = resonance_base(&p);
    let rp = reduced_at(&sys, &z, &xi);
    if rp.dec.dim_g_me() != 1 || rp.kernel_dim() != 2 {
        return outcome(false, format!("dim 𝔤_me {} kernel {}", rp.dec.dim_g_me(), rp.kernel_dim()));
    }
    let mut worst = 0.0_f64;
    for v0 in [[0.05, 0.0], [0.03, -0.04], [-0.01, 0.07]] {
        for alpha in [0.0, 0.01] {
            let j = rp.bifurcation_jacobian(&DVector::zeros(0), &DVector::from_row_slice(&v0), &DVector::from_vec(vec![alpha])).unwrap();
            worst = worst.max((&j - j.transpose()).amax() / j.amax().max(1e-300));
        }
    }
    outcome(worst <= 1e-8, format!("max relative asymmetry of D_v₀b {worst:.2e} (tol 1e-8)"))
}

// ---------------------------------------------------------------- 10

fn rigid_residual_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut torus_max = 0.0_f64;
    for k in 1..=3 {
        for _ in 0..10 {
            let j = DVector::from_fn(k, |_, _| rng.gen_range(-2.0..2.0));
            let xi = DVector::from_fn(k, |_, _| rng.gen_range(-2.0..2.0));
            let m = DMatrix::identity(k, k);
            let r = rigid_residual(&vec![0.0; k * k * k], &j, &xi, &m).unwrap();
            torus_max = torus_max.max(r.amax());
        }
    }
    // so(3), J = e₃*, ξ = e₁, 𝔪 = span(e₁, e₂): ρ = (⟨J,[e₁,e₁]⟩, ⟨J,[e₁,e₂]⟩) = (0, 1)
    let j = DVector::from_vec(vec![0.0, 0.0, 1.0]);
    let xi = DVector::from_vec(vec![1.0, 0.0, 0.0]);
    let m = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
    let r = rigid_residual(&so3_structure_constants(), &j, &xi, &m).unwrap();
    let so3_err = (r - DVector::from_vec(vec![0.0, 1.0])).amax();
    outcome(torus_max == 0.0 && so3_err <= 1e-12, format!("torus max |ρ| {torus_max:e} (exact 0), so(3) error {so3_err:.1e} (tol 1e-12)"))
}

// ---------------------------------------------------------------- 11

fn derivative_hygiene() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11_11);
    let models: Vec<HamiltonianSystem> = vec![
        wave_system(&WaveParams::default_with(1.0, 0.5)).unwrap(),
        wave_system(&random_wave_params(&mut rng, 0.8, 0.3)).unwrap(),
        oscillator_system(&[1.0, 2.0, 3.5]).unwrap(),
        resonance_system(&ResonanceParams::default()).unwrap(),
    ];
    let mut worst = 0.0_f64;
    for sys in &models {
        for _ in 0..100 {
            let z = DVector::from_fn(sys.dim(), |_, _| rng.gen_range(-1.0..1.0));
            let g = sys.gradient(&z).unwrap();
            let gf = sys.fd_gradient(&z).unwrap();
            worst = worst.max((&g - &gf).norm() / g.norm().max(1.0));
            let h = sys.hessian(&z).unwrap();
            let hf = sys.fd_hessian(&z).unwrap();
            worst = worst.max((&h - &hf).norm() / h.norm().max(1.0));
        }
    }
    outcome(worst <= 1e-6, format!("{} models × 100 points, max relative error {worst:.2e} (tol 1e-6)", models.len()))
}

fn main() {
    let mut switched = Vec::new();
    let mut persist = Vec::new();
    let persist_sys = wave_system(&WaveParams::default_with(0.8, 0.5)).unwrap();
    let results = vec![
        ("1 eigenvalue regression", eigenvalue_regression()),
        ("2 beta closed form", beta_closed_form()),
        ("3 v1 closed form", v1_closed_form()),
        ("4 pitchfork slope", pitchfork(&mut switched)),
        ("5 complex circles", complex_circles(&mut switched)),
        ("6 persistence rank", persistence_rank(&mut persist)),
        ("7 recombination", recombination(&switched, &persist, &persist_sys)),
        ("8 kernel containment", kernel_containment(&switched)),
        ("9 gradient structure", gradient_structure()),
        ("10 rigid residual", rigid_residual_check()),
        ("11 derivative hygiene", derivative_hygiene()),
    ];
    let mut failed = Vec::new();
    for (name, o) in &results {
        println!("[{}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed.push(*name);
        }
    }
    println!("acceptance: {} passed, {} failed", results.len() - failed.len(), failed.len());
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
