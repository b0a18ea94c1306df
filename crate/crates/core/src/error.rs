use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch { expected: Vec<usize>, found: Vec<usize> },
    #[error("slot {slot} out of range for rank {rank}")]
    SlotOutOfRange { slot: usize, rank: usize },
    #[error("operator is not Hermitian (max |A - A^dagger| = {deviation:e})")]
    NotHermitian { deviation: f64 },
    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),
    #[error("invalid frame grid: {0}")]
    InvalidGrid(String),
    #[error("energy ratio {value} is not a rational with denominator <= {max_denominator}")]
    IrrationalRatio { value: f64, max_denominator: i64 },
    #[error("rod spectrum has no partner level {momentum} for system level {level} on axis {axis}")]
    MissingPartner { axis: usize, level: usize, momentum: f64 },
    #[error("reading {value} is not on the {points}-point grid")]
    OffGrid { value: f64, points: usize },
    #[error("index {index} out of range (size {size})")]
    IndexOutOfRange { index: usize, size: usize },
    #[error("quadrature window misses {leakage:e} of the amplitude's mass")]
    QuadratureUnderflow { leakage: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
