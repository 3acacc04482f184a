//! Sliding-window schedule and the smart-sensor sampling contract.
//!
//! Windows are the half-open intervals `(t^{w-1}, t^w]` of constant width
//! `tau`, indexed from `w = 1`. Each window carries `M_w + 1` Chebyshev time
//! nodes at which the sensor reads the state together with a lagged partner
//! `t - delta_t` for the backward-difference derivative estimate, plus one
//! window-start sample used to reset the estimator.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cheb::Interval;
use crate::{Error, Result};

/// Window width, backward-difference step and node-count bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    /// Window width `tau` in seconds; must satisfy `0 < tau < 4`.
    pub tau: f64,
    /// Backward-difference step; must satisfy `0 < delta_t < tau`.
    pub delta_t: f64,
    /// Node count `M` for the first window.
    pub m_init: usize,
    /// Lower clamp for the adaptive node count; at least 2.
    pub m_min: usize,
    /// Upper clamp for the adaptive node count.
    pub m_max: usize,
}

impl WindowConfig {
    pub fn new(tau: f64, delta_t: f64, m_init: usize, m_min: usize, m_max: usize) -> Result<Self> {
        let config = WindowConfig {
            tau,
            delta_t,
            m_init,
            m_min,
            m_max,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.tau.is_finite() || self.tau <= 0.0 || self.tau >= 4.0 {
            return Err(Error::InvalidConfig(format!(
                "window width tau = {} must lie in (0, 4)",
                self.tau
            )));
        }
        if !self.delta_t.is_finite() || self.delta_t <= 0.0 || self.delta_t >= self.tau {
            return Err(Error::InvalidConfig(format!(
                "backward-difference step delta_t = {} must lie in (0, tau)",
                self.delta_t
            )));
        }
        if self.m_min < 2 {
            return Err(Error::InvalidConfig(format!(
                "m_min = {} must be at least 2",
                self.m_min
            )));
        }
        if !(self.m_min <= self.m_init && self.m_init <= self.m_max) {
            return Err(Error::InvalidConfig(format!(
                "node-count bounds must satisfy m_min <= m_init <= m_max, got {} <= {} <= {}",
                self.m_min, self.m_init, self.m_max
            )));
        }
        Ok(())
    }

    /// The `w`-th window `((w - 1) tau, w tau]`, `w >= 1`.
    pub fn window_interval(&self, w: usize) -> Result<Interval> {
        if w == 0 {
            return Err(Error::InvalidConfig(
                "window indices start at 1".to_string(),
            ));
        }
        Interval::new((w as f64 - 1.0) * self.tau, w as f64 * self.tau)
    }
}

/// The `M_w + 1` Chebyshev time nodes of a window, sorted ascending.
///
/// `t_k = midpoint + (width / 2) cos((k - 0.5) pi / (M_w + 1))`; the cosine
/// never reaches +-1, so every node is strictly interior. The defining
/// formula generates them in descending order; they are stored ascending
/// because the regression pairs each row with its node time, so ordering
/// cannot change the fit, and sorted output reads better in CSV dumps.
pub fn time_nodes(iv: &Interval, m_w: usize) -> Vec<f64> {
    let mid = iv.midpoint();
    let half = 0.5 * iv.width();
    let count = m_w + 1;
    let mut nodes: Vec<f64> = (1..=count)
        .map(|k| {
            let angle = ((k as f64) - 0.5) * std::f64::consts::PI / (count as f64);
            mid + half * angle.cos()
        })
        .collect();
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    nodes
}

/// Continuous-state source the sensor reads from, usually a simulation
/// [`Trace`](crate::plant::Trace); tests substitute analytic oracles.
pub trait StateOracle {
    fn dim(&self) -> usize;
    /// Closed span of valid query times.
    fn time_span(&self) -> (f64, f64);
    fn state_at(&self, t: f64) -> Result<DVector<f64>>;
}

/// One sensor read: the state at `t`, the state at `t - delta_t`, and the
/// backward-difference derivative estimate.
#[derive(Clone, Debug)]
pub struct SensorSample {
    pub state: DVector<f64>,
    pub lagged_state: DVector<f64>,
    pub derivative: DVector<f64>,
}

/// Sample the oracle at `t` and `t - delta_t` and form the backward
/// difference `(x(t) - x(t - delta_t)) / delta_t`.
pub fn sensor_sample<O: StateOracle + ?Sized>(
    oracle: &O,
    t: f64,
    delta_t: f64,
) -> Result<SensorSample> {
    let state = oracle.state_at(t)?;
    let lagged_state = oracle.state_at(t - delta_t)?;
    let derivative = (&state - &lagged_state) / delta_t;
    Ok(SensorSample {
        state,
        lagged_state,
        derivative,
    })
}

/// All measurements taken in one window, immutable after construction.
///
/// Row `k` of each matrix corresponds to `node_times[k]`; the derivative rows
/// satisfy `(sampled_states - sampled_states_lagged) / delta_t` exactly.
#[derive(Clone, Debug)]
pub struct WindowRecord {
    pub index: usize,
    pub interval: Interval,
    /// Node count `M_w` (polynomial order); `M_w + 1` sampling instants.
    pub order: usize,
    pub node_times: Vec<f64>,
    pub sampled_states: DMatrix<f64>,
    pub sampled_states_lagged: DMatrix<f64>,
    pub derivative_estimates: DMatrix<f64>,
    pub window_start_state: DVector<f64>,
}

impl WindowRecord {
    /// Fresh state reads at node times (excludes lagged partners and the
    /// window-start sample).
    pub fn node_sample_count(&self) -> usize {
        self.order + 1
    }
}

/// Sample one window: `M_w + 1` node reads with lagged partners plus the
/// window-start state.
pub fn build_window_record<O: StateOracle + ?Sized>(
    w: usize,
    config: &WindowConfig,
    m_w: usize,
    oracle: &O,
) -> Result<WindowRecord> {
    let interval = config.window_interval(w)?;
    let node_times = time_nodes(&interval, m_w);
    let dim = oracle.dim();
    let rows = m_w + 1;

    let mut sampled_states = DMatrix::zeros(rows, dim);
    let mut sampled_states_lagged = DMatrix::zeros(rows, dim);
    let mut derivative_estimates = DMatrix::zeros(rows, dim);
    for (k, &t) in node_times.iter().enumerate() {
        let sample = sensor_sample(oracle, t, config.delta_t)?;
        sampled_states.set_row(k, &sample.state.transpose());
        sampled_states_lagged.set_row(k, &sample.lagged_state.transpose());
        derivative_estimates.set_row(k, &sample.derivative.transpose());
    }
    let window_start_state = oracle.state_at(interval.start())?;

    Ok(WindowRecord {
        index: w,
        interval,
        order: m_w,
        node_times,
        sampled_states,
        sampled_states_lagged,
        derivative_estimates,
        window_start_state,
    })
}

/// Analytic state oracle for tests: an arbitrary function of time.
#[cfg(test)]
pub(crate) struct FnOracle {
    pub dim: usize,
    pub span: (f64, f64),
    pub f: Box<dyn Fn(f64) -> DVector<f64>>,
}

#[cfg(test)]
impl StateOracle for FnOracle {
    fn dim(&self) -> usize {
        self.dim
    }
    fn time_span(&self) -> (f64, f64) {
        self.span
    }
    fn state_at(&self, t: f64) -> Result<DVector<f64>> {
        if t < self.span.0 - 1e-12 || t > self.span.1 + 1e-12 {
            return Err(Error::OutOfTrace {
                t,
                start: self.span.0,
                end: self.span.1,
            });
        }
        Ok((self.f)(t))
    }
}
