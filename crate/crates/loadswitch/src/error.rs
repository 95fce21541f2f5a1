//! Error type shared across the crate.

use num_complex::Complex64;
use thiserror::Error;

/// Everything that can go wrong while building models, reducing observations,
/// or running estimators.
#[derive(Debug, Error)]
pub enum Error {
    /// An impedance component was NaN or infinite.
    #[error("impedance components must be finite, got {re} + {im}j ohms")]
    NonFiniteImpedance { re: f64, im: f64 },

    /// Scenario impedances describe passive elements; resistance must be >= 0.
    #[error("passive impedance needs resistance >= 0 ohms, got {resistance}")]
    NegativeResistance { resistance: f64 },

    /// The two load states are identical, so switching reveals nothing.
    #[error(
        "degenerate load plan: z1 == z2 pins the switch ratio at 1 and hides the antenna impedance"
    )]
    DegeneratePlan,

    /// The ratio map hits a pole (1 + za/z2 == 0) or a zero load.
    #[error("singular impedance ratio map: {what}")]
    SingularMap { what: &'static str },

    /// The inverse ratio map blows up at F == z2/z1.
    #[error("ratio {f} coincides with z2/z1; the matching antenna impedance is unbounded")]
    UnboundedImpedance { f: Complex64 },

    /// Training split must leave both load segments nonempty.
    #[error("training split must satisfy 1 <= k < t, got k={k}, t={t}")]
    BadSplit { k: usize, t: usize },

    /// Either training segment has zero energy.
    #[error("training segment energies must be positive, got s1={s1}, s2={s2}")]
    ZeroSegmentEnergy { s1: f64, s2: f64 },

    /// Zadoff-Chu construction needs an even positive length.
    #[error("zadoff-chu length must be even and positive, got t={t}")]
    OddLength { t: usize },

    /// Zadoff-Chu root must be odd and coprime with the length.
    #[error("zadoff-chu root must be odd and coprime with the length, got u={u}, t={t}")]
    BadRoot { u: u64, t: usize },

    /// Noise variance or a prior scale was negative or non-finite.
    #[error("invalid parameter: {what}")]
    InvalidParameter { what: String },

    /// A covariance matrix failed the Hermitian positive-semidefinite check.
    #[error("channel covariance must be Hermitian positive semidefinite: {what}")]
    NotPsd { what: &'static str },

    /// An operation that needs the covariance inverse met a singular matrix.
    #[error("channel covariance is singular; route block-constant fading to the pooled estimator")]
    SingularCovariance,

    /// Vector lengths disagree.
    #[error("length mismatch: {what}")]
    LengthMismatch { what: String },

    /// An input collection was empty where at least one element is required.
    #[error("empty input: {what}")]
    EmptyInput { what: &'static str },

    /// The first-segment statistic vanished, so the load ratio cannot be told
    /// apart from the channel. Carries the channel estimate that is still valid.
    #[error(
        "first-segment statistic is zero; the impedance ratio is unidentifiable from this data"
    )]
    Unidentifiable { h_hat: Vec<Complex64> },

    /// The root search exhausted its iteration budget on every start point.
    #[error("root search did not converge; best normalized residual {best_residual:e}")]
    SolverFailure { best_residual: f64 },

    /// Cross moments carry no usable information about the load ratio
    /// (degenerate quadratic with vanishing linear coefficient).
    #[error("cross moments carry no information about the load ratio")]
    NoInformation,

    /// Tr[C_H] = 0 leaves the impedance-parameter bound undefined.
    #[error("zero-trace channel covariance leaves the impedance bound undefined")]
    ZeroTrace,

    /// A Monte Carlo cell lost more trials than the configured budget allows.
    #[error("{failed} of {trials} trials failed in {context}")]
    ExcessiveFailures {
        failed: usize,
        trials: usize,
        context: String,
    },

    /// Reading or writing a statistics file failed at the I/O layer.
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),

    /// A statistics file violated the expected format.
    #[error("malformed statistics file at line {line}: {what}")]
    Parse { line: usize, what: String },
}

pub type Result<T> = std::result::Result<T, Error>;
