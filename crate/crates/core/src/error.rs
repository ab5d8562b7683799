use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[non_exhaustive]
pub enum Error {
    #[error("expected {expected} samples, got {actual}")]
    WrongLength { expected: usize, actual: usize },
    #[error("negative reading {value} at hour {hour}")]
    NegativeValue { hour: usize, value: f64 },
    #[error("non-finite reading at hour {hour}")]
    NonFinite { hour: usize },
    #[error("curve sums to zero")]
    AllZero,
    #[error("{n_p} does not divide 24")]
    NotADivisor { n_p: usize },
    #[error("smoothing must lie in [0, 1], got {0}")]
    InvalidSmoothing(f64),

    #[error("sequence lengths differ ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("sequences need at least {min} samples, got {len}")]
    TooShort { len: usize, min: usize },
    #[error("brute-force enumeration supports at most {max} samples, got {len}")]
    TooLong { len: usize, max: usize },

    #[error("no curves to cluster")]
    EmptyInput,
    #[error("k = {k} exceeds the {distinct} distinct curves available")]
    KTooLarge { k: usize, distinct: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("entropy needs at least two curves per household")]
    SingleCurve,

    #[error("period slice sums to zero")]
    AllZeroSlice,
    #[error("need at least {needed} days of history, got {got}")]
    InsufficientHistory { needed: usize, got: usize },
    #[error("no past observations to scale from")]
    NoHistory,
    #[error("past predicted shapes have zero energy")]
    DegenerateScale,
    #[error("actual curve is all zero")]
    ZeroActual,

    #[error("matrix shapes differ: {left_rows}x{left_cols} vs {right_rows}x{right_cols}")]
    ShapeMismatch {
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },
    #[error("power levels must be positive and finite, scale alpha > 0")]
    InvalidPowerVector,
    #[error("error ratio {ratio} outside [1/R_H, R_H] with R_H = {rank}")]
    AssumptionViolated { ratio: f64, rank: usize },
    #[error("denominator matrix has zero Frobenius norm")]
    ZeroDenominator,
    #[error("dual bisection failed to bracket the constraint for row {row}")]
    NoConvergence { row: usize },

    #[error("device {name} runs past the end of the day")]
    InvalidDevice { name: String },
}
