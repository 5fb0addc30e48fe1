use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;
use tempfile::TempDir;

struct Run {
    code: i32,
    dir: PathBuf,
    _tmp: TempDir,
}

fn releq(analysis: &str, config: &str, extra: &[&str]) -> Run {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("config.json");
    fs::write(&cfg, config).unwrap();
    let dir = tmp.path().join("out");
    let status = Command::new(env!("CARGO_BIN_EXE_releq"))
        .arg(analysis)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&dir)
        .args(extra)
        .output()
        .unwrap();
    Run { code: status.status.code().unwrap(), dir, _tmp: tmp }
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn listing(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    v.sort();
    v
}

const WAVE_08: &str = r#"{"hamiltonian": {"kind": "builtin", "name": "wave_resonance", "params": {"C": 0.8}}}"#;

#[test]
fn bifurcate_sweep_finds_one_pitchfork_at_c_one() {
    // J₁ = 2C² on the base family, so C ∈ [0.5, 1.5] is J₁ ∈ [0.5, 4.5]
    let cfg = r#"{"hamiltonian": {"kind": "builtin", "name": "wave_resonance", "params": {"C": 0.5}},
        "continuation": {"parameter": {"momentum": [1, 0]}, "step": 0.05, "n_steps": 60, "until": 4.5}}"#;
    let r = releq("bifurcate", cfg, &[]);
    assert_eq!(r.code, 0);
    let m = json(&r.dir.join("manifest.json"));
    assert_eq!(m["status"], "ok");
    assert_eq!(m["summary"]["events"], 1);
    assert_eq!(m["summary"]["kinds"][0], "pitchfork");
    let j = m["summary"]["parameter_at_events"][0].as_f64().unwrap();
    let c = (j / 2.0).sqrt();
    assert!((c - 1.0).abs() < 1e-6, "C = {c}");
    let b = json(&r.dir.join("bifurcate.json"));
    assert_eq!(b["events"][0]["switch"]["branches"], serde_json::json!([1, 2]));
    let files = listing(&r.dir);
    for f in ["branch_0.csv", "branch_1.csv", "branch_2.csv", "diagram.svg", "bifurcate.json"] {
        assert!(files.contains(&f.to_string()), "{f} missing from {files:?}");
    }
    assert!(m["drift_check"]["max_orbit_drift"].as_f64().unwrap() <= 1e-5);
    let svg = fs::read_to_string(r.dir.join("diagram.svg")).unwrap();
    assert!(svg.contains("branch 1 (pitchfork)"));
    assert!(svg.contains("stroke-dasharray"));
}

#[test]
fn persist_reports_rank_two() {
    let r = releq("persist", WAVE_08, &[]);
    assert_eq!(r.code, 0);
    let m = json(&r.dir.join("manifest.json"));
    assert_eq!(m["summary"]["expected_sigma_rank"], 2);
    assert_eq!(m["summary"]["fraction_expected_rank"], 1.0);
    let csv = fs::read_to_string(r.dir.join("persistence.csv")).unwrap();
    assert!(csv.starts_with("eta0,alpha0,z0,"));
    assert_eq!(csv.lines().count(), 26);
}

#[test]
fn persist_at_a_degenerate_point_fails_with_the_error_in_the_manifest() {
    let r = releq("persist", r#"{"hamiltonian": {"kind": "builtin", "name": "wave_resonance", "params": {"C": 1.0}}}"#, &[]);
    assert_eq!(r.code, 1);
    assert_eq!(listing(&r.dir), ["manifest.json"]);
    let m = json(&r.dir.join("manifest.json"));
    assert_eq!(m["status"], "failed");
    assert!(m["error"].as_str().unwrap().contains("degenerate kernel"));
}

#[test]
fn empty_seed_list_is_a_config_error() {
    let r = releq("find-re", r#"{"hamiltonian": {"kind": "builtin", "name": "wave_resonance"}, "seeds": []}"#, &[]);
    assert_eq!(r.code, 2);
    assert!(!r.dir.exists());
}

#[test]
fn malformed_configs_exit_two() {
    for cfg in [
        "{not json",
        r#"{"hamiltonian": {"kind": "builtin", "name": "nope"}}"#,
        r#"{"hamiltonian": {"kind": "builtin", "name": "wave_resonance"}, "numeric": {"drift_tol": -1}}"#,
        r#"{"hamiltonian": {"kind": "builtin", "name": "wave_resonance"}, "continuation": {"parameter": {"momentum": [1]}}}"#,
        r#"{"hamiltonian": {"kind": "builtin", "name": "wave_resonance"}, "analysis": "persist"}"#,
    ] {
        let r = releq("reduce", cfg, &[]);
        assert_eq!(r.code, 2, "{cfg}");
        assert!(!r.dir.exists());
    }
}

#[test]
fn reruns_are_byte_identical() {
    let cfg = r#"{"hamiltonian": {"kind": "builtin", "name": "wave_resonance", "params": {"C": 0.8}},
        "continuation": {"step": 0.05, "n_steps": 8}}"#;
    let a = releq("continue", cfg, &["--seed", "7"]);
    let b = releq("continue", cfg, &["--seed", "7"]);
    assert_eq!(a.code, 0);
    let files = listing(&a.dir);
    assert_eq!(files, listing(&b.dir));
    for f in &files {
        assert_eq!(fs::read(a.dir.join(f)).unwrap(), fs::read(b.dir.join(f)).unwrap(), "{f} differs");
    }
    assert_eq!(json(&a.dir.join("manifest.json"))["seed"], 7);
}

#[test]
fn find_re_converges_from_seeds() {
    // h = |z|²/2 + |z|⁴/4: circles of radius ρ are relative equilibria with ξ = 1 + ρ²
    let cfg = r#"{"dim": 2, "omega": "standard", "torus_generators": [[[0,-1],[1,0]]],
        "hamiltonian": {"kind": "polynomial", "terms": [
            {"coeff": 0.5, "monomial": [2,0]}, {"coeff": 0.5, "monomial": [0,2]},
            {"coeff": 0.25, "monomial": [4,0]}, {"coeff": 0.5, "monomial": [2,2]}, {"coeff": 0.25, "monomial": [0,4]}]},
        "seeds": [{"z": [0.9, 0.1], "xi": [2.0]}, {"z": [0.1, 0.0], "xi": [0.5]}]}"#;
    let r = releq("find-re", cfg, &[]);
    assert_eq!(r.code, 0);
    let out = json(&r.dir.join("relative_equilibria.json"));
    let eq = out["equilibria"].as_array().unwrap();
    assert_eq!(eq.len(), 2);
    let z: Vec<f64> = eq[0]["z"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!((z[0].hypot(z[1]) - 1.0).abs() < 1e-10);
    assert_eq!(eq[1]["isotropy"], "S1");
}

#[test]
fn reduce_and_stability_on_the_wave_model() {
    let r = releq("reduce", WAVE_08, &[]);
    assert_eq!(r.code, 0);
    let m = json(&r.dir.join("manifest.json"));
    assert_eq!(m["summary"]["dim_m"], 1);
    assert_eq!(m["summary"]["dim_v"], 6);
    assert_eq!(m["summary"]["kernel_dim"], 0);
    assert_eq!(fs::read_to_string(r.dir.join("spectrum.csv")).unwrap().lines().count(), 7);

    let s = releq("stability", WAVE_08, &[]);
    assert_eq!(s.code, 0);
    // λ₁⁻ = −C² − C < 0 while the rest are positive
    assert_eq!(json(&s.dir.join("manifest.json"))["summary"]["verdicts"][0], "indefinite");
}

#[test]
fn stability_rejects_points_that_are_not_relative_equilibria() {
    let cfg = r#"{"hamiltonian": {"kind": "builtin", "name": "wave_resonance"},
        "points": [{"z": [0.1, 0, 0, 0, 1, 0, 0, 0], "xi": [1, 0.5]}]}"#;
    let r = releq("stability", cfg, &[]);
    assert_eq!(r.code, 1);
    assert!(json(&r.dir.join("manifest.json"))["error"].as_str().unwrap().contains("not a relative equilibrium"));
}

#[test]
fn formats_filter_the_outputs() {
    let cfg = r#"{"hamiltonian": {"kind": "builtin", "name": "wave_resonance", "params": {"C": 0.8}},
        "continuation": {"step": 0.05, "n_steps": 3}, "output": {"formats": ["csv"]}}"#;
    let r = releq("continue", cfg, &[]);
    assert_eq!(r.code, 0);
    assert_eq!(listing(&r.dir), ["branch.csv", "manifest.json"]);
}
