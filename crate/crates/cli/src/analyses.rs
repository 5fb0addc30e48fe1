//! The six analyses. Each returns the files to write, the relative equilibria
//! it produced (for the drift check) and a JSON summary for the manifest.

use anyhow::{anyhow, bail, Context, Result};
use nalgebra::DVector;
use releq_core::branch::continuation::spaces;
use releq_core::branch::export::{branch_csv, points_csv};
use releq_core::branch::{
    classify_crossing, continue_branch, detect_crossings, formal_stability, make_point, persistence_surface, switch_branch, Branch, BranchPoint,
    ContinuationParameter, ContinuationSetup, Parent, PersistenceReport, SwitchResult,
};
use releq_core::linalg::lstsq;
use releq_core::model_config::Model;
use releq_core::reduction::{build_reduced, ReducedProblem};
use releq_core::slice::{build_slice, SliceExport};
use releq_core::HamiltonianSystem;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Analysis, DiagramQuantity, Format, RunConfig};
use crate::svg::{self, Series};

pub struct Emitted {
    pub files: Vec<(String, Vec<u8>)>,
    pub equilibria: Vec<(DVector<f64>, DVector<f64>)>,
    pub summary: Value,
}

struct Out<'a> {
    cfg: &'a RunConfig,
    files: Vec<(String, Vec<u8>)>,
    equilibria: Vec<(DVector<f64>, DVector<f64>)>,
}

impl<'a> Out<'a> {
    fn new(cfg: &'a RunConfig) -> Self {
        Self { cfg, files: Vec::new(), equilibria: Vec::new() }
    }

    fn put(&mut self, f: Format, name: &str, body: impl Into<Vec<u8>>) {
        if self.cfg.wants(f) {
            self.files.push((name.to_string(), body.into()));
        }
    }

    fn json<T: Serialize>(&mut self, name: &str, v: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(v)?;
        s.push('\n');
        self.put(Format::Json, name, s);
        Ok(())
    }

    fn branch(&mut self, name: &str, b: &Branch) -> Result<()> {
        self.put(Format::Csv, &format!("{name}.csv"), branch_csv(b));
        self.json(&format!("{name}.json"), b)?;
        self.equilibria.extend(b.points.iter().map(|p| (p.z.clone(), p.xi.clone())));
        Ok(())
    }

    fn finish(self, summary: Value) -> Emitted {
        Emitted { files: self.files, equilibria: self.equilibria, summary }
    }
}

/// Model-dependent validation; failures are configuration errors.
pub fn validate(cfg: &RunConfig, model: &Model, analysis: Analysis) -> std::result::Result<(), String> {
    let sys = &model.system;
    let (n, k) = (sys.dim(), sys.torus_rank());
    let needs_base = matches!(analysis, Analysis::Reduce | Analysis::Continue | Analysis::Persist | Analysis::Bifurcate)
        || (analysis == Analysis::Stability && cfg.points.is_empty());
    if needs_base && model.base.is_none() {
        return Err(format!("'{}' needs a base point: set 'base_point' or use a builtin model that has one", analysis.name()));
    }
    for (what, list) in [("seeds", &cfg.seeds), ("points", &cfg.points)] {
        if list.iter().any(|p| p.z.len() != n || p.xi.len() != k) {
            return Err(format!("every entry of '{what}' needs z of length {n} and xi of length {k}"));
        }
    }
    if let Some(p) = &cfg.continuation.parameter {
        let c = match p {
            ContinuationParameter::Momentum(c) | ContinuationParameter::Generator(c) => c,
        };
        if c.len() != k {
            return Err(format!("continuation parameter needs {k} components, got {}", c.len()));
        }
    }
    let limit = match cfg.diagram.quantity {
        DiagramQuantity::PairAbs(j) => Some((j, n / 2)),
        DiagramQuantity::Component(i) => Some((i, n)),
        _ => None,
    };
    if let Some((i, max)) = limit {
        if i >= max {
            return Err(format!("diagram quantity index {i} out of range (< {max})"));
        }
    }
    Ok(())
}

pub fn run(cfg: &RunConfig, model: &Model, analysis: Analysis) -> Result<Emitted> {
    match analysis {
        Analysis::FindRe => find_re(cfg, &model.system),
        Analysis::Reduce => reduce(cfg, model),
        Analysis::Continue => continuation(cfg, model),
        Analysis::Persist => persist(cfg, model),
        Analysis::Bifurcate => bifurcate(cfg, model),
        Analysis::Stability => stability(cfg, model),
    }
}

fn base(model: &Model) -> Result<(DVector<f64>, DVector<f64>)> {
    model.base.clone().ok_or_else(|| anyhow!("model has no base point"))
}

fn reduced(cfg: &RunConfig, model: &Model) -> Result<ReducedProblem> {
    let (z, xi) = base(model)?;
    let dec = build_slice(&model.system, &z, &xi, cfg.numeric.tol_rank).context("slice decomposition")?;
    build_reduced(&model.system, &dec, cfg.numeric.kernel_tol, cfg.numeric.newton()).context("reduction")
}

fn vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

// ------------------------------------------------------------------ find-re

/// Newton on ∇(h − J^ξ) = 0 with ξ fixed. The Hessian is singular along the
/// orbit, so steps are minimum-norm least-squares solutions.
fn newton_re(sys: &HamiltonianSystem, z0: &DVector<f64>, xi: &DVector<f64>, tol: f64, max_iter: usize) -> Result<DVector<f64>> {
    let mut z = z0.clone();
    for _ in 0..max_iter {
        let f = sys.augmented_gradient(&z, xi)?;
        if f.norm() <= tol {
            return Ok(z);
        }
        let h = sys.augmented_hessian(&z, xi)?;
        z -= lstsq(&h, &f, 1e-10);
        if !z.iter().all(|x| x.is_finite()) {
            bail!("newton iterate is not finite");
        }
    }
    let r = sys.augmented_gradient(&z, xi)?.norm();
    if r <= tol {
        Ok(z)
    } else {
        bail!("newton did not converge in {max_iter} iterations (residual {r:e})")
    }
}

fn find_re(cfg: &RunConfig, sys: &HamiltonianSystem) -> Result<Emitted> {
    let mut out = Out::new(cfg);
    let sp = spaces(sys)?;
    let mut found = Vec::new();
    let mut report = Vec::new();
    for (i, seed) in cfg.seeds.iter().enumerate() {
        let (z0, xi) = seed.vectors();
        match newton_re(sys, &z0, &xi, cfg.numeric.newton_tol, cfg.numeric.max_iter) {
            Ok(z) => {
                let p = make_point(sys, &sp, z, xi, 0.0)?;
                report.push(json!({"seed": i, "converged": true, "residual": p.residual, "isotropy": p.isotropy, "stability": p.stability}));
                found.push(p);
            }
            Err(e) => report.push(json!({"seed": i, "converged": false, "error": e.to_string()})),
        }
    }
    if found.is_empty() {
        bail!("no seed converged to a relative equilibrium");
    }
    out.put(Format::Csv, "relative_equilibria.csv", points_csv(&found));
    out.json("relative_equilibria.json", &json!({"seeds": report, "equilibria": found}))?;
    out.equilibria.extend(found.iter().map(|p| (p.z.clone(), p.xi.clone())));
    Ok(out.finish(json!({"seeds": cfg.seeds.len(), "converged": found.len()})))
}

// ------------------------------------------------------------------ reduce

fn reduce(cfg: &RunConfig, model: &Model) -> Result<Emitted> {
    let mut out = Out::new(cfg);
    let rp = reduced(cfg, model)?;
    let dec = &rp.dec;
    let eig = vec(&rp.eigenvalues);
    let summary = json!({
        "dim_m": dec.dim_m(),
        "dim_g_me": dec.dim_g_me(),
        "dim_v": dec.dim_v(),
        "kernel_dim": rp.kernel_dim(),
        "kernel_tol": rp.kernel_tol,
        "containment": rp.containment,
    });
    out.json(
        "reduce.json",
        &json!({"slice": SliceExport::from(dec), "l_eigenvalues": eig, "l": releq_core::linalg::rows(&rp.l), "summary": summary}),
    )?;
    let mut csv = String::from("index,eigenvalue,kernel\n");
    for (i, l) in eig.iter().enumerate() {
        csv.push_str(&format!("{i},{l:?},{}\n", l.abs() <= rp.kernel_tol));
    }
    out.put(Format::Csv, "spectrum.csv", csv);
    out.equilibria.push((dec.base_point.clone(), dec.generator.clone()));
    Ok(out.finish(summary))
}

// ------------------------------------------------------------------ continue

fn parameter(cfg: &RunConfig, sys: &HamiltonianSystem) -> ContinuationParameter {
    cfg.continuation.parameter.clone().unwrap_or_else(|| {
        let mut c = vec![0.0; sys.torus_rank()];
        c[0] = 1.0;
        ContinuationParameter::Momentum(c)
    })
}

fn parent_branch(cfg: &RunConfig, model: &Model) -> Result<Branch> {
    let (z, xi) = base(model)?;
    let sys = &model.system;
    continue_branch(sys, &z, &xi, parameter(cfg, sys), &cfg.continuation.options).context("continuation")
}

fn continuation(cfg: &RunConfig, model: &Model) -> Result<Emitted> {
    let mut out = Out::new(cfg);
    let br = parent_branch(cfg, model)?;
    out.branch("branch", &br)?;
    let setup = br.setup.clone().ok_or_else(|| anyhow!("branch has no continuation setup"))?;
    let series = vec![series_of(cfg, &model.system, &setup, &br, 0, None)];
    out.put(Format::Svg, "diagram.svg", diagram(cfg, &setup, &series));
    let summary = json!({"points": br.len(), "folds": br.folds, "stable_points": br.points.iter().filter(|p| p.stability.is_stable()).count()});
    Ok(out.finish(summary))
}

// ------------------------------------------------------------------ diagram

fn quantity(q: DiagramQuantity, p: &BranchPoint, amplitude: f64) -> f64 {
    match q {
        DiagramQuantity::PairAbs(j) => p.z[2 * j].hypot(p.z[2 * j + 1]),
        DiagramQuantity::Component(i) => p.z[i],
        DiagramQuantity::Norm => p.z.norm(),
        DiagramQuantity::KernelAmplitude => amplitude,
    }
}

fn series_of(cfg: &RunConfig, sys: &HamiltonianSystem, setup: &ContinuationSetup, br: &Branch, id: usize, amps: Option<&[f64]>) -> Series {
    let points = br
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let a = amps.and_then(|a| a.get(i)).copied().unwrap_or(0.0);
            (setup.parameter_value(sys, &p.z, &p.xi), quantity(cfg.diagram.quantity, p, a), p.stability.is_stable())
        })
        .collect();
    let iso = br.points.get(br.len() / 2).map(|p| p.isotropy.as_str()).unwrap_or("-");
    Series { label: format!("branch {id} ({}): isotropy {iso}", br.kind), points }
}

fn diagram(cfg: &RunConfig, setup: &ContinuationSetup, series: &[Series]) -> String {
    let x_label = match &setup.parameter {
        ContinuationParameter::Momentum(c) => format!("momentum {c:?}·J"),
        ContinuationParameter::Generator(c) => format!("generator {c:?}·ξ"),
    };
    let y_label = match cfg.diagram.quantity {
        DiagramQuantity::PairAbs(j) => format!("|z{j}|"),
        DiagramQuantity::Component(i) => format!("z[{i}]"),
        DiagramQuantity::Norm => "‖z‖".to_string(),
        DiagramQuantity::KernelAmplitude => "kernel amplitude".to_string(),
    };
    svg::render(series, &x_label, &y_label, cfg.diagram.width, cfg.diagram.height)
}

// ------------------------------------------------------------------ persist

fn persist(cfg: &RunConfig, model: &Model) -> Result<Emitted> {
    let mut out = Out::new(cfg);
    let rp = reduced(cfg, model)?;
    let rep: PersistenceReport = persistence_surface(&rp, &cfg.persistence)?;
    let (r, h) = (rp.dec.dim_m(), rp.dec.dim_g_me());
    let mut header: Vec<String> = (0..r).map(|i| format!("eta{i}")).collect();
    header.extend((0..h).map(|i| format!("alpha{i}")));
    header.extend((0..rp.sys.dim()).map(|i| format!("z{i}")));
    header.extend((0..rp.sys.torus_rank()).map(|i| format!("xi{i}")));
    header.extend(["sigma_rank", "surface_rank", "pfaffian", "error"].map(String::from));
    let mut csv = header.join(",") + "\n";
    for s in &rep.samples {
        let nums: Vec<String> = s.eta.iter().chain(s.alpha.iter()).chain(s.z.iter()).chain(s.xi.iter()).map(|x| format!("{x:?}")).collect();
        let err = s.error.as_deref().unwrap_or("").replace(',', ";");
        csv.push_str(&format!("{},{},{},{:?},{err}\n", nums.join(","), s.sigma_rank, s.surface_rank, s.pfaffian));
    }
    out.put(Format::Csv, "persistence.csv", csv);
    out.json("persistence.json", &rep)?;
    out.equilibria.extend(rep.samples.iter().filter(|s| s.error.is_none()).map(|s| (s.z.clone(), s.xi.clone())));
    let rank_hits = rep.samples.iter().filter(|s| s.sigma_rank == rep.expected_sigma_rank).count();
    let summary = json!({
        "samples": rep.samples.len(),
        "failed_samples": rep.samples.iter().filter(|s| s.error.is_some()).count(),
        "expected_sigma_rank": rep.expected_sigma_rank,
        "fraction_expected_rank": rank_hits as f64 / rep.samples.len().max(1) as f64,
        "fraction_ok": rep.fraction_ok,
        "min_abs_pfaffian": rep.min_abs_pfaffian,
        "pfaffian_threshold": rep.pfaffian_threshold,
    });
    Ok(out.finish(summary))
}

// ------------------------------------------------------------------ bifurcate

fn switch_summary(sw: &SwitchResult, ids: &[usize]) -> Value {
    json!({
        "branches": ids,
        "kind": sw.kind,
        "amplitudes": sw.amplitudes,
        "unfolding": sw.unfolding,
        "slope": sw.slope,
        "symmetry_error": sw.symmetry_error,
        "closure_error": sw.closure_error,
        "orthogonality": sw.orthogonality,
        "max_recombination_residual": sw.recombination.iter().copied().fold(0.0, f64::max),
    })
}

fn bifurcate(cfg: &RunConfig, model: &Model) -> Result<Emitted> {
    let sys = &model.system;
    let mut out = Out::new(cfg);
    let parent = parent_branch(cfg, model)?;
    let setup = parent.setup.clone().ok_or_else(|| anyhow!("branch has no continuation setup"))?;
    let events = detect_crossings(sys, &parent, &cfg.continuation.options).context("crossing detection")?;
    out.branch("branch_0", &parent)?;
    let mut series = vec![series_of(cfg, sys, &setup, &parent, 0, None)];
    let mut records = Vec::new();
    let mut next_id = 1;
    for ev in events.iter().take(cfg.bifurcation.max_events) {
        let mut rec = json!({"event": ev});
        let class = match classify_crossing(sys, ev, cfg.numeric.tol_rank, cfg.numeric.newton()) {
            Ok(c) => c,
            Err(e) => {
                rec["error"] = json!(format!("classification: {e}"));
                records.push(rec);
                continue;
            }
        };
        rec["classification"] = json!({
            "kind": class.kind,
            "weight": class.weight,
            "circle_generator": class.circle_generator,
            "kernel_isotropy": class.isotropy_k,
            "kernel_dim": class.reduced.kernel_dim(),
            "fixed_dim": class.fixed_basis.ncols(),
        });
        let link = Parent { branch: 0, arclength: ev.point.arclength };
        match switch_branch(sys, &class, &cfg.bifurcation.amplitudes, Some(link)) {
            Ok(sw) => {
                let mut ids = vec![next_id];
                out.branch(&format!("branch_{next_id}"), &sw.branch)?;
                series.push(series_of(cfg, sys, &setup, &sw.branch, next_id, Some(&sw.amplitudes)));
                next_id += 1;
                if let Some(m) = &sw.mirror {
                    ids.push(next_id);
                    out.branch(&format!("branch_{next_id}"), m)?;
                    let neg: Vec<f64> = sw.amplitudes.iter().map(|a| -a).collect();
                    series.push(series_of(cfg, sys, &setup, m, next_id, Some(&neg)));
                    next_id += 1;
                }
                rec["switch"] = switch_summary(&sw, &ids);
            }
            Err(e) => rec["error"] = json!(format!("branch switching: {e}")),
        }
        records.push(rec);
    }
    out.json("bifurcate.json", &json!({"parent": {"points": parent.len(), "folds": parent.folds}, "events": records}))?;
    out.put(Format::Svg, "diagram.svg", diagram(cfg, &setup, &series));
    let kinds: Vec<Value> = records.iter().map(|r| r["classification"]["kind"].clone()).collect();
    let at: Vec<f64> = events.iter().take(cfg.bifurcation.max_events).map(|e| setup.parameter_value(sys, &e.point.z, &e.point.xi)).collect();
    Ok(out.finish(json!({"events": records.len(), "kinds": kinds, "parameter_at_events": at, "branches": next_id})))
}

// ------------------------------------------------------------------ stability

fn stability(cfg: &RunConfig, model: &Model) -> Result<Emitted> {
    let sys = &model.system;
    let mut out = Out::new(cfg);
    let points: Vec<(DVector<f64>, DVector<f64>)> = if cfg.points.is_empty() { vec![base(model)?] } else { cfg.points.iter().map(|p| p.vectors()).collect() };
    let tol = 10.0 * cfg.numeric.newton_tol;
    let mut rows = Vec::new();
    let mut csv = String::from("point,verdict,min_abs,dim_w,eigs\n");
    for (i, (z, xi)) in points.iter().enumerate() {
        let residual = sys.augmented_gradient(z, xi)?.norm();
        if residual > tol {
            bail!("point {i} is not a relative equilibrium: residual {residual:e} > {tol:e}");
        }
        let r = formal_stability(sys, z, xi, None)?;
        let eigs: Vec<String> = r.eigs.iter().map(|e| format!("{e:?}")).collect();
        csv.push_str(&format!("{i},{},{:?},{},{}\n", r.verdict, r.min_abs, r.dim_w, eigs.join(";")));
        rows.push(json!({"point": i, "z": vec(z), "xi": vec(xi), "residual": residual, "report": r}));
    }
    out.put(Format::Csv, "stability.csv", csv);
    out.json("stability.json", &rows)?;
    out.equilibria.extend(points);
    let verdicts: Vec<Value> = rows.iter().map(|r| r["report"]["verdict"].clone()).collect();
    Ok(out.finish(json!({"verdicts": verdicts})))
}
