//! `releq <analysis> --config <path> [--out <dir>] [--seed <u64>]`
//!
//! Exit status: 0 on success, 1 when the analysis fails (the error is written
//! to manifest.json), 2 when the configuration is invalid (nothing written).

mod analyses;
mod config;
mod svg;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Parser;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use releq_core::model_config::Model;
use releq_core::HamiltonianSystem;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use config::{Analysis, RunConfig};

#[derive(Parser)]
#[command(name = "releq", version, about = "Relative equilibria, reduction, continuation and bifurcation of symmetric Hamiltonian systems")]
struct Cli {
    analysis: Analysis,
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides output.directory in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for sampled checks (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Serialize)]
struct DerivativeCheck {
    points: usize,
    max_gradient_error: f64,
    max_hessian_error: f64,
}

#[derive(Serialize)]
struct DriftCheck {
    points: usize,
    t_max: f64,
    max_orbit_drift: f64,
    max_momentum_drift: f64,
    tol: f64,
}

#[derive(Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    analysis: &'static str,
    status: &'static str,
    config_sha256: String,
    seed: u64,
    tolerances: Value,
    derivative_check: Option<DerivativeCheck>,
    drift_check: Option<DriftCheck>,
    files: Vec<String>,
    summary: Value,
    error: Option<String>,
}

/// Relative error of analytic derivatives against central differences at
/// random points near the base point.
fn derivative_check(sys: &HamiltonianSystem, center: Option<&DVector<f64>>, count: usize, seed: u64) -> Result<DerivativeCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = DerivativeCheck { points: count, max_gradient_error: 0.0, max_hessian_error: 0.0 };
    for _ in 0..count {
        let scale = center.map_or(1.0, |c| 0.1 * (1.0 + c.norm()));
        let mut z = DVector::from_fn(sys.dim(), |_, _| rng.gen_range(-scale..scale));
        if let Some(c) = center {
            z += c;
        }
        let g = sys.gradient(&z)?;
        let h = sys.hessian(&z)?;
        rep.max_gradient_error = rep.max_gradient_error.max((&g - sys.fd_gradient(&z)?).norm() / g.norm().max(1.0));
        rep.max_hessian_error = rep.max_hessian_error.max((&h - sys.fd_hessian(&z)?).norm() / h.norm().max(1.0));
    }
    Ok(rep)
}

fn drift_check(sys: &HamiltonianSystem, cfg: &RunConfig, points: &[(DVector<f64>, DVector<f64>)]) -> Result<DriftCheck> {
    let n = &cfg.numeric;
    let mut rep = DriftCheck { points: points.len(), t_max: n.drift_t_max, max_orbit_drift: 0.0, max_momentum_drift: 0.0, tol: n.drift_tol };
    for (i, (z, xi)) in points.iter().enumerate() {
        let d = sys.check_relative_equilibrium(z, xi, n.drift_t_max, n.drift_steps)?;
        if d.orbit_drift > n.drift_tol {
            bail!("emitted point {i} drifts {:e} from its orbit by t = {} (tol {:e})", d.orbit_drift, n.drift_t_max, n.drift_tol);
        }
        rep.max_orbit_drift = rep.max_orbit_drift.max(d.orbit_drift);
        rep.max_momentum_drift = rep.max_momentum_drift.max(d.momentum_drift);
    }
    Ok(rep)
}

fn write_all(dir: &Path, files: &[(String, Vec<u8>)], manifest: &Manifest) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (name, body) in files {
        fs::write(dir.join(name), body).with_context(|| format!("writing {name}"))?;
    }
    let mut m = serde_json::to_string_pretty(manifest)?;
    m.push('\n');
    fs::write(dir.join("manifest.json"), m).context("writing manifest.json")?;
    Ok(())
}

struct Prepared {
    cfg: RunConfig,
    model: Model,
    hash: String,
}

fn prepare(cli: &Cli) -> std::result::Result<Prepared, String> {
    let raw = fs::read(&cli.config).map_err(|e| format!("cannot read {}: {e}", cli.config.display()))?;
    let cfg: RunConfig = serde_json::from_slice(&raw).map_err(|e| format!("config: {e}"))?;
    cfg.validate(cli.analysis)?;
    let model = cfg.model.build().map_err(|e| format!("model: {e}"))?;
    analyses::validate(&cfg, &model, cli.analysis)?;
    Ok(Prepared { cfg, model, hash: hex::encode(Sha256::digest(&raw)) })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Prepared { cfg, model, hash } = match prepare(&cli) {
        Ok(p) => p,
        Err(msg) => {
            eprintln!("releq: invalid configuration: {msg}");
            return ExitCode::from(2);
        }
    };
    let dir = cli.out.clone().or_else(|| cfg.output.directory.clone()).unwrap_or_else(|| PathBuf::from("releq-out"));
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    let sys = &model.system;

    let mut manifest = Manifest {
        tool: "releq",
        version: env!("CARGO_PKG_VERSION"),
        analysis: cli.analysis.name(),
        status: "ok",
        config_sha256: hash,
        seed,
        tolerances: json!({"numeric": cfg.numeric, "continuation": cfg.continuation.options}),
        derivative_check: None,
        drift_check: None,
        files: Vec::new(),
        summary: Value::Null,
        error: None,
    };
    let outcome = (|| -> Result<analyses::Emitted> {
        manifest.derivative_check = Some(derivative_check(sys, model.base.as_ref().map(|b| &b.0), cfg.numeric.spot_check_points, seed)?);
        let emitted = analyses::run(&cfg, &model, cli.analysis)?;
        manifest.drift_check = Some(drift_check(sys, &cfg, &emitted.equilibria)?);
        Ok(emitted)
    })();
    let (files, code) = match outcome {
        Ok(e) => {
            manifest.summary = e.summary;
            manifest.files = e.files.iter().map(|f| f.0.clone()).collect();
            (e.files, 0)
        }
        Err(e) => {
            eprintln!("releq: {} failed: {e:#}", cli.analysis.name());
            manifest.status = "failed";
            manifest.error = Some(format!("{e:#}"));
            (Vec::new(), 1)
        }
    };
    if let Err(e) = write_all(&dir, &files, &manifest) {
        eprintln!("releq: {e:#}");
        return ExitCode::from(1);
    }
    ExitCode::from(code)
}
