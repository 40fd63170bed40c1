use std::path::PathBuf;

use crate::dynamics::StrategyKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The threshold series never changes sign strictly inside (0, 1).
    #[error("{series}({ell}) has no sign change in (0, 1)")]
    NoRoot { series: &'static str, ell: usize },

    /// `g(l) = w_hat(l) / l` never turns upward, so no weight table exists.
    #[error("no admissible weight table for {kind} at p = {p}")]
    InfeasibleParameter { kind: StrategyKind, p: f64 },

    #[error("no p in [0, 1] yields a feasible weight table for {kind} (omega = {omega}, n = {n})")]
    NoFeasibleP { kind: StrategyKind, omega: f64, n: usize },

    #[error("integration diverged at tau = {tau} (increase the truncation order or reduce dt)")]
    Diverged { tau: f64 },

    #[error("characteristic cubic has complex roots at p = {p}; the series regime does not apply")]
    ComplexRoots { p: f64 },

    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed record: {0}")]
    Parse(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File { path: path.into(), source }
    }
}
