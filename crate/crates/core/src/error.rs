use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("Hilbert space of dimension {dim} exceeds the configured limit {limit}")]
    Capacity { dim: usize, limit: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("integration stalled at t = {t}: step size {h:e} underflowed")]
    Stiffness { t: f64, h: f64 },

    #[error("no dynamical attractor found")]
    NoAttractor,

    #[error("jump probability {p_tot} stays above the cap after {subdivisions} subdivisions")]
    StepRejected { p_tot: f64, subdivisions: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("degenerate clustering: {0}")]
    DegenerateClusters(String),

    #[error("non-finite likelihood at EM iteration {iteration}")]
    NonFiniteLikelihood { iteration: usize },

    #[error("rate fit refused: {eligible} records beyond t0 ({events} events), need at least {required}")]
    FitRefused {
        eligible: usize,
        events: usize,
        required: usize,
    },

    #[error("no linear survival tail found among {candidates} candidate thresholds")]
    NoLinearTail { candidates: usize },

    #[error("scaling fit did not converge (best weighted residual {best_residual:e})")]
    NonConvergence { best_residual: f64 },

    #[error("hazard is masked or zero at every phase bin")]
    DegenerateHazard,

    #[error("malformed trajectory file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
