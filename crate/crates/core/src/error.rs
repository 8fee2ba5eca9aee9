use thiserror::Error;

/// Errors raised by the simulator library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty chain: an interferometer chain needs at least one stage")]
    EmptyChain,

    #[error("time before schedule start: t = {0} s")]
    TimeBeforeStart(f64),

    #[error("undersampled: sample rate {sample_rate} Hz must exceed 4 x {max_beat} Hz")]
    Undersampled { sample_rate: f64, max_beat: f64 },

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("not in USCKD regime: {0}")]
    NotUsckdRegime(String),

    #[error("unattainable noise target {target}: best achieved RMS fluctuation is {best}")]
    UnattainableNoiseTarget { target: f64, best: f64 },

    #[error("tap ratio {0} outside [0, 1)")]
    InvalidTapRatio(f64),

    #[error("invalid detector configuration: {0}")]
    InvalidDetector(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// True for violations of a numerical precondition (sampling, calibration
    /// targets, tap ratios) as opposed to malformed inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Undersampled { .. }
                | Error::UnattainableNoiseTarget { .. }
                | Error::NotUsckdRegime(_)
                | Error::TimeBeforeStart(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
