//! CSV rendering of branches.

use std::fmt::Write;

use super::{Branch, BranchPoint};

fn join(v: impl Iterator<Item = f64>, sep: &str) -> String {
    v.map(|x| format!("{x:?}")).collect::<Vec<_>>().join(sep)
}

/// One row per point: arclength, z, ξ, μ, eigenvalues (';'-separated),
/// isotropy label, stability verdict.
pub fn branch_csv(branch: &Branch) -> String {
    points_csv(&branch.points)
}

pub fn points_csv(points: &[BranchPoint]) -> String {
    let mut out = String::new();
    let Some(first) = points.first() else {
        return "arclength,eigs,isotropy,stability\n".into();
    };
    let mut header = vec!["arclength".to_string()];
    header.extend((0..first.z.len()).map(|i| format!("z{i}")));
    header.extend((0..first.xi.len()).map(|i| format!("xi{i}")));
    header.extend((0..first.mu.len()).map(|i| format!("mu{i}")));
    header.extend(["eigs", "isotropy", "stability"].map(String::from));
    writeln!(out, "{}", header.join(",")).unwrap();
    for p in points {
        writeln!(
            out,
            "{:?},{},{},{},{},{},{}",
            p.arclength,
            join(p.z.iter().copied(), ","),
            join(p.xi.iter().copied(), ","),
            join(p.mu.iter().copied(), ","),
            join(p.eigs.iter().copied(), ";"),
            p.isotropy,
            p.stability
        )
        .unwrap();
    }
    out
}
