use alloc::string::String;

/// Errors produced by the analysis routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid signal: {0}")]
    InvalidSignal(String),
    #[error("sampling step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("mode at {frequency} Hz violates the Nyquist limit {nyquist} Hz")]
    NyquistViolation { frequency: f64, nyquist: f64 },
    #[error("designed signal has no frequency-amplitude mode")]
    MissingFaMode,
    #[error("window [{start}, {end}] holds no samples of the signal")]
    EmptyWindow { start: f64, end: f64 },
    #[error("unknown channel `{0}`")]
    UnknownChannel(String),
    #[error("too few samples: need {needed}, have {available}")]
    TooFewSamples { needed: usize, available: usize },
    #[error("prediction matrix has rank {rank} < order {order}; lower the model order")]
    RankDeficient { rank: usize, order: usize },
    #[error("time step is zero")]
    ZeroStep,
    #[error("least-squares system is ill-conditioned (condition estimate {condition:e})")]
    IllConditioned { condition: f64 },
    #[error("too many modes ({modes}) for {samples} samples")]
    TooManyModes { modes: usize, samples: usize },
    #[error("envelope never settles below the split threshold; supply an explicit split time")]
    SplitNotFound,
    #[error("segment [{start}, {end}] holds {available} samples, need at least {needed}")]
    SegmentTooShort {
        start: f64,
        end: f64,
        available: usize,
        needed: usize,
    },
    #[error("state is not an equilibrium (|f(x*)| = {residual:e})")]
    NotEquilibrium { residual: f64 },
    #[error("finite-difference step too small (Richardson disagreement {disagreement:e})")]
    StepTooSmall { disagreement: f64 },
    #[error("Jacobian is defective or nearly so (eigenvector condition {condition:e})")]
    DefectiveMatrix { condition: f64 },
    #[error("fixed-point iteration did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("analytic response has imaginary residue {residue:e} relative to its norm")]
    NonRealResponse { residue: f64 },
    #[error("mode-shape column is identically zero")]
    AllZeroColumn,
    #[error("channel sets differ")]
    ChannelMismatch,
    #[error("target at {target_hz} Hz and resonance at {resonance_hz} Hz are not near-resonant")]
    NotNearResonant { target_hz: f64, resonance_hz: f64 },
    #[error("reference signal is identically zero")]
    ZeroReference,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("eigenvalue computation failed: {0}")]
    Eigen(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
