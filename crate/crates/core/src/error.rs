//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("spatial dimension must be at least 3, got n = {0}")]
    DimensionTooLow(usize),
    #[error("grid must have at least 8 interior points per axis, got {0}")]
    GridTooCoarse(usize),
    #[error("boundary window {0} is empty or outside the face")]
    BadWindow(String),
    #[error("boundary patch selects no face nodes")]
    EmptyPatch,
    #[error("neighborhood widths must be strictly decreasing and resolvable: {0}")]
    BadWidths(String),
    #[error("cutoff regions overlap or leave fewer than 3 transition layers: {0}")]
    BadCutoff(String),
    #[error("field contains non-finite values ({0})")]
    NonFinite(&'static str),
    #[error("field does not vanish near the boundary; zero-extension invalid (max modulus {0:.3e} on the outer layers)")]
    ZeroExtensionInvalid(f64),
    #[error("Sobolev index out of range: |s| must be <= 8, got {0}")]
    SobolevIndexRange(f64),
    #[error("Sobolev indices must be strictly ordered, got ({0}, {1}, {2})")]
    IndexOrdering(f64, f64, f64),
    #[error("coefficient vector length {got} does not match basis size {expected}")]
    BasisSizeMismatch { got: usize, expected: usize },
    #[error("matrix shapes or weights do not match: {0}")]
    ShapeMismatch(String),
    #[error("solver did not reach tolerance: residual {residual:.3e} after {iterations} iterations (near-singular system?)")]
    NearSingular { residual: f64, iterations: usize },
    #[error("DtN column {column} failed: {source}")]
    DtnColumn {
        column: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("directions are not admissible: {0}")]
    BadDirections(String),
    #[error("symbol floor dominates: all {0} Fourier modes clamped; decrease eps_reg")]
    SymbolFloorDominates(usize),
    #[error("Neumann series divergent; decrease tau or coefficient magnitude (update norms {0:.3e} -> {1:.3e} -> {2:.3e})")]
    NeumannDivergent(f64, f64, f64),
    #[error("CGO residual {0:.3e} above guard threshold {1:.3e}; inputs unusable")]
    CgoResidualGuard(f64, f64),
    #[error("frequency set is empty")]
    EmptyFrequencySet,
    #[error("tau*|xi| = {0:.3} exceeds 2; directions undefined")]
    TauTooLarge(f64),
    #[error("inputs stem from different runs: {0}")]
    MixedRun(String),
    #[error("weight function invalid at node {node:?}: {reason}")]
    BadWeight { node: Vec<usize>, reason: String },
    #[error("beta0 must be positive, got {0}")]
    BadBeta0(f64),
    #[error("traces violate the homogeneous Navier conditions: max |{which}| = {max:.3e}")]
    InhomogeneousTraces { which: &'static str, max: f64 },
    #[error("stability fit needs at least 4 records spanning one decade of delta; need wider delta range")]
    FitSpanTooNarrow,
    #[error("admissibility violated: {0}")]
    NotAdmissible(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad field file: {0}")]
    BadFieldFile(String),
}

pub type Result<T> = std::result::Result<T, Error>;
