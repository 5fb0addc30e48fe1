use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("symmetry violation: {0}")]
    SymmetryViolation(String),
    #[error("finite-difference step underflows at |z| = {norm}")]
    FdStepDegenerate { norm: f64 },
    #[error("integration blew up at t = {t}")]
    IntegrationBlowup { t: f64 },
    #[error("not a relative equilibrium: augmented gradient {residual:e} > {tol:e}")]
    NotARelativeEquilibrium { residual: f64, tol: f64 },
    #[error("isotropy rank ambiguous: singular value {value:e} inside ({lo:e}, {hi:e})")]
    RankAmbiguous { value: f64, lo: f64, hi: f64 },
    #[error("point outside chart: |(eta, v)| = {norm:e} > radius {radius:e}")]
    OutOfChart { norm: f64, radius: f64 },
    #[error("newton iterate left the chart during {stage}")]
    ChartExceeded { stage: &'static str },
    #[error("newton diverged in {stage} after {iterations} iterations (residual {residual:e})")]
    NewtonDiverged {
        stage: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("spectral gap violated: eigenvalue {value:e} between kernel_tol {kernel_tol:e} and 10x")]
    SpectralGapViolated { value: f64, kernel_tol: f64 },
    #[error("degenerate kernel of dimension {dim}")]
    DegenerateKernel { dim: usize },
    #[error("continuation step failed at arclength {arclength} after halving to {step:e}")]
    StepFailed { arclength: f64, step: f64 },
    #[error("no branch found for any amplitude")]
    NoBranchFound,
    #[error("invalid structure constants: {0}")]
    InvalidStructureConstants(String),
    #[error("torus weights are not integral: {0}")]
    NonIntegralWeights(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}
