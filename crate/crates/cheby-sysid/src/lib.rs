//! Online piecewise approximation of unknown nonlinear system dynamics using
//! sliding-window Chebyshev regression, with adaptive node-count selection and
//! an adaptive state estimator.
//!
//! The pipeline splits the time axis into consecutive windows of width `tau`.
//! Within each window a smart sensor samples the plant state at Chebyshev time
//! nodes (plus a backward-difference partner per node and one window-start
//! sample), a batch least-squares fit produces per-window basis coefficients,
//! a triangular continuity solve re-expresses the previous window's polynomial
//! on the new window so the feedforward model has no one-window delay, and a
//! dead-zone update law adjusts the node count to hold the average node error
//! inside a target band. A window-wise state estimator integrates the
//! identified dynamics with Lyapunov-designed corrective feedback and resets to
//! the measured state at each window transition.
//!
//! # Modules
//!
//! - [`cheb`] — Chebyshev basis evaluation, derivatives, nodes, offline fits
//!   and the interpolation error bound.
//! - [`window`] — sliding-window schedule, time nodes, sensor contract.
//! - [`identifier`] — per-window regularized least squares and the cross-window
//!   continuity solve.
//! - [`node_select`] — averaged node error and the node-count update laws.
//! - [`estimator`] — gain design and window-wise state estimation.
//! - [`plant`] — ground-truth plants and fixed-step simulation traces.
//! - [`harness`] — full-pipeline experiment runner, config files, CSV export.
//!
//! # Quick start
//!
//! ```
//! use cheby_sysid::harness::{self, RunConfig};
//!
//! let config = RunConfig::stuart_landau_sec5();
//! let report = harness::run_experiment(&config).unwrap();
//! assert_eq!(report.windows.len(), 60);
//! println!("{}", harness::summarize(&report));
//! ```
//!
//! Each major capability also has a runnable example under `examples/`;
//! start with `cargo run --example stuart_landau --release`.

pub mod cheb;
pub mod estimator;
pub mod harness;
pub mod identifier;
pub mod node_select;
pub mod plant;
pub mod window;

pub use cheb::{BasisEval, FitResult, Interval};
pub use estimator::{EstimatorState, GainDesign};
pub use identifier::{CoefficientKind, CoefficientSet, RegularizerConfig};
pub use node_select::{ErrorReport, NodeSelector, Regime};
pub use plant::{PlantSpec, Trace};
pub use window::{SensorSample, StateOracle, WindowConfig, WindowRecord};

/// Errors produced by any stage of the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("point {x} lies outside the canonical domain [-1, 1]")]
    OutsideCanonicalDomain { x: f64 },

    #[error("time {t} lies outside the interval [{a}, {b}]")]
    OutsideInterval { t: f64, a: f64, b: f64 },

    #[error("invalid interval [{a}, {b}]: bounds must be finite with a < b")]
    InvalidInterval { a: f64, b: f64 },

    #[error("design matrix is rank deficient (condition estimate {cond:.3e})")]
    RankDeficient { cond: f64 },

    #[error("normal system is singular to working precision")]
    SingularSystem,

    #[error("{context}: expected dimension {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("windows are incompatible: {detail}")]
    MismatchedWindows { detail: String },

    #[error("node count {m} is too small for the exponential decay law (minimum 2)")]
    UnsupportedNodeCount { m: usize },

    #[error("matrix `{name}` is not symmetric positive definite")]
    NotPositiveDefinite { name: &'static str },

    #[error("query time {t} is outside the trace span [{start}, {end}]")]
    OutOfTrace { t: f64, start: f64, end: f64 },

    #[error("state became non-finite at t = {t}")]
    NonFinite { t: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("window {window}: {source}")]
    InWindow {
        window: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: std::path::PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    /// Attach the index of the window in which the error occurred.
    pub fn in_window(self, window: usize) -> Self {
        Error::InWindow {
            window,
            source: Box::new(self),
        }
    }

    /// True for errors that indicate a bad configuration rather than a
    /// numerical failure; the CLI maps these to a distinct exit code.
    pub fn is_config(&self) -> bool {
        match self {
            Error::InvalidConfig(_) => true,
            Error::InWindow { source, .. } => source.is_config(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
