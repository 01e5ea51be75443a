use thiserror::Error;

use crate::group::IrrepLabel;

pub type Result<T, E = OsrError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum OsrError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid irrep label: {0}")]
    InvalidIrrep(String),
    #[error("quadrature needs at least 2 nodes, got {0}")]
    InvalidQuadrature(usize),
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),
    #[error("loop leaves the lattice: {0}")]
    OffLattice(String),
    #[error("invalid loop: {0}")]
    InvalidLoop(String),
    #[error("overlapping loops: {0}")]
    Overlap(String),
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("vector not supported in the positive half space: {0}")]
    SupportViolation(String),
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("reflection positivity violated: Gram eigenvalue {eigenvalue:e} below -{tolerance:e}")]
    IndefiniteGram { eigenvalue: f64, tolerance: f64 },
    #[error("translation by {rows} rows is not a symmetry of the lattice measure")]
    NonLatticeTranslation { rows: f64 },
    #[error("generator for irrep {irrep} depends on t (spread {spread:e})")]
    NonSemigroup { irrep: IrrepLabel, spread: f64 },
    #[error("contraction eigenvalue for irrep {irrep} is {value:e}; no generator exists")]
    NoGenerator { irrep: IrrepLabel, value: f64 },
    #[error("extrapolation diverges: {0}")]
    ExtrapolationDivergence(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}
