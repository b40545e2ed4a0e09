use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}:{line}: {msg}")]
    ConfigFile {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("negative SNR {0} has no capacity")]
    NegativeSnr(f64),

    #[error("relay power split {0} outside [0, 1]")]
    PowerSplit(f64),

    #[error("round {got} fed after round {last}; rounds must strictly increase")]
    OutOfOrderRound { last: u64, got: u64 },

    #[error(
        "arrival rate {rho} exceeds the hard cap {cap} (10x the estimated stable rate {stable}); \
         the source queues would grow without bound"
    )]
    ArrivalRateAboveCap { rho: f64, cap: f64, stable: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Configuration problems map to exit status 2, everything else to 1.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::ConfigFile { .. }
                | Error::PowerSplit(_)
                | Error::ArrivalRateAboveCap { .. }
        )
    }
}
