//! Branches of relative equilibria: continuation, persistence, crossings,
//! classification, branch switching and formal stability.

pub mod continuation;
pub mod crossings;
pub mod export;
pub mod persistence;
pub mod stability;
pub mod switching;

use std::fmt;

use nalgebra::DVector;
use serde::Serialize;

pub use continuation::{continue_branch, ContinuationOptions, ContinuationParameter, ContinuationSetup, Constraint};
pub use crossings::{classify_crossing, detect_crossings, Classification, CrossingEvent, CrossingKind};
pub use persistence::{persistence_surface, PersistenceGrid, PersistenceReport, PersistenceSample};
pub use stability::{formal_stability, StabilityReport};
pub use switching::{switch_branch, SwitchResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Stability {
    #[serde(rename = "definite+")]
    DefinitePlus,
    #[serde(rename = "definite-")]
    DefiniteMinus,
    #[serde(rename = "indefinite")]
    Indefinite,
    #[serde(rename = "degenerate")]
    Degenerate,
}

impl Stability {
    /// Definite stability forms certify formal stability.
    pub fn is_stable(self) -> bool {
        matches!(self, Stability::DefinitePlus | Stability::DefiniteMinus)
    }
}

impl fmt::Display for Stability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stability::DefinitePlus => "definite+",
            Stability::DefiniteMinus => "definite-",
            Stability::Indefinite => "indefinite",
            Stability::Degenerate => "degenerate",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchKind {
    PersistenceSigma,
    Pitchfork,
    SaddleNode,
    ComplexCircle,
}

impl fmt::Display for BranchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BranchKind::PersistenceSigma => "persistence_sigma",
            BranchKind::Pitchfork => "pitchfork",
            BranchKind::SaddleNode => "saddle_node",
            BranchKind::ComplexCircle => "complex_circle",
        })
    }
}

pub(crate) fn ser_vec<S: serde::Serializer>(v: &DVector<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter())
}

#[derive(Debug, Clone, Serialize)]
pub struct BranchPoint {
    #[serde(serialize_with = "ser_vec")]
    pub z: DVector<f64>,
    #[serde(serialize_with = "ser_vec")]
    pub xi: DVector<f64>,
    #[serde(serialize_with = "ser_vec")]
    pub mu: DVector<f64>,
    pub arclength: f64,
    /// Eigenvalues of the stability form, ascending.
    pub eigs: Vec<f64>,
    pub isotropy: String,
    pub stability: Stability,
    /// ‖∇h(z) − S_ξ z‖.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Parent {
    pub branch: usize,
    pub arclength: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Branch {
    pub kind: BranchKind,
    pub parent: Option<Parent>,
    pub points: Vec<BranchPoint>,
    /// Indices of accepted points after which the continuation parameter turned.
    pub folds: Vec<usize>,
    pub setup: Option<ContinuationSetup>,
}

impl Branch {
    pub fn len(&self) -> usize {
        self.points.len()
    }
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Assemble a branch point, computing momentum, stability and isotropy.
pub fn make_point(
    sys: &crate::system::HamiltonianSystem,
    spaces: &[crate::isotropy::WeightSpace],
    z: DVector<f64>,
    xi: DVector<f64>,
    arclength: f64,
) -> crate::error::Result<BranchPoint> {
    let st = formal_stability(sys, &z, &xi, None)?;
    let residual = sys.augmented_gradient(&z, &xi)?.norm();
    Ok(BranchPoint {
        mu: sys.momentum(&z),
        isotropy: crate::isotropy::isotropy_label(sys, spaces, &z),
        eigs: st.eigs,
        stability: st.verdict,
        residual,
        z,
        xi,
        arclength,
    })
}
