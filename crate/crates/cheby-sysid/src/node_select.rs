//! Averaged node error and the adaptive node-count update laws.
//!
//! The node count `M` is the polynomial order of a window; `M + 1` is the
//! number of sampling instants. Two update laws are provided: the practical
//! law driven by the averaged node error with tunable gains and a dead zone,
//! and the theoretical minimum-node law with its rate constants derived from
//! the exponential error-decay envelope. The practical law deliberately swaps
//! the rounding operators of the theoretical one (floor on increase, ceiling
//! on decrease) so rounding noise cannot add an unnecessary node.

use serde::{Deserialize, Serialize};

use crate::identifier::CoefficientSet;
use crate::window::WindowRecord;
use crate::{Error, Result};

/// Position of a window's average error relative to the target band
/// `[kappa eps_th, eps_th]` (closed on both ends).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Above,
    InBand,
    Below,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Regime::Above => "above",
            Regime::InBand => "in_band",
            Regime::Below => "below",
        };
        f.write_str(s)
    }
}

/// Thresholds, gains and clamps for the practical node-count update law.
#[derive(Clone, Copy, Debug)]
pub struct NodeSelector {
    /// Target approximation error `eps_th`.
    pub eps_th: f64,
    /// Dead-zone factor `kappa` in (0, 1); the band is `[kappa eps_th, eps_th]`.
    pub kappa: f64,
    /// Increase gain, in (0, 10).
    pub gamma1: f64,
    /// Decrease gain, in (0, 10).
    pub gamma2: f64,
    /// Node count of the window about to be classified.
    pub m_current: usize,
    pub m_min: usize,
    pub m_max: usize,
}

impl NodeSelector {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        eps_th: f64,
        kappa: f64,
        gamma1: f64,
        gamma2: f64,
        m_current: usize,
        m_min: usize,
        m_max: usize,
    ) -> Result<Self> {
        if eps_th <= 0.0 || !eps_th.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "eps_th = {eps_th} must be positive"
            )));
        }
        if !(kappa > 0.0 && kappa < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "kappa = {kappa} must lie in (0, 1)"
            )));
        }
        for (name, g) in [("gamma1", gamma1), ("gamma2", gamma2)] {
            if !(g > 0.0 && g < 10.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} = {g} must lie in (0, 10)"
                )));
            }
        }
        if m_min < 2 {
            return Err(Error::InvalidConfig(format!(
                "m_min = {m_min} must be at least 2"
            )));
        }
        if !(m_min <= m_current && m_current <= m_max) {
            return Err(Error::InvalidConfig(format!(
                "node counts must satisfy m_min <= m_current <= m_max, got {m_min} <= {m_current} <= {m_max}"
            )));
        }
        Ok(NodeSelector {
            eps_th,
            kappa,
            gamma1,
            gamma2,
            m_current,
            m_min,
            m_max,
        })
    }

    /// Classify an average error against the dead-zone band; both band edges
    /// belong to the band.
    pub fn classify(&self, avg_error: f64) -> Regime {
        if avg_error > self.eps_th {
            Regime::Above
        } else if avg_error >= self.kappa * self.eps_th {
            Regime::InBand
        } else {
            Regime::Below
        }
    }
}

/// Error statistics of one window under the coefficients the estimator
/// actually integrated with.
#[derive(Clone, Copy, Debug)]
pub struct ErrorReport {
    pub window_index: usize,
    /// Mean over the nodes of the Euclidean residual norm.
    pub avg_error: f64,
    pub max_node_error: f64,
    pub regime: Regime,
}

/// Average residual between the measured node derivatives and the active
/// feedforward polynomial, over the window's nodes.
///
/// `theta` must be the coefficient set the estimator used on this window; its
/// order may differ from the record's when the node count just changed.
pub fn average_error(
    record: &WindowRecord,
    theta: &CoefficientSet,
    selector: &NodeSelector,
) -> Result<ErrorReport> {
    if theta.state_dim() != record.derivative_estimates.ncols() {
        return Err(Error::DimensionMismatch {
            context: "coefficient columns",
            expected: record.derivative_estimates.ncols(),
            found: theta.state_dim(),
        });
    }
    let mut total = 0.0;
    let mut worst = 0.0f64;
    for (k, &t) in record.node_times.iter().enumerate() {
        let predicted = crate::identifier::predict_dynamics(theta, &record.interval, t)?;
        let mut sq = 0.0;
        for j in 0..theta.state_dim() {
            let r = record.derivative_estimates[(k, j)] - predicted[j];
            sq += r * r;
        }
        let norm = sq.sqrt();
        total += norm;
        worst = worst.max(norm);
    }
    let avg_error = total / (record.node_times.len() as f64);
    Ok(ErrorReport {
        window_index: record.index,
        avg_error,
        max_node_error: worst,
        regime: selector.classify(avg_error),
    })
}

/// Practical node-count update: floor of the gained log ratio above the band,
/// hold inside, ceiling below (the log is negative there, so the count
/// drops). The result is clamped to `[m_min, m_max]`; an exactly zero error
/// short-circuits to `m_min` since the log ratio diverges.
pub fn update_node_count(selector: &NodeSelector, report: &ErrorReport) -> usize {
    let m = selector.m_current as i64;
    let next = match report.regime {
        Regime::Above => {
            m + (selector.gamma1 * (report.avg_error / selector.eps_th).ln()).floor() as i64
        }
        Regime::InBand => m,
        Regime::Below => {
            if report.avg_error == 0.0 {
                selector.m_min as i64
            } else {
                let ratio = report.avg_error / (selector.kappa * selector.eps_th);
                m + (selector.gamma2 * ratio.ln()).ceil() as i64
            }
        }
    };
    next.clamp(selector.m_min as i64, selector.m_max as i64) as usize
}

/// Theoretical minimum node count keeping the maximum window error inside the
/// band, with rate constants `rho = 1 / ln((M + 1) / e)`.
///
/// Requires `m_w >= 2` so the decay base `(M + 1) / e` exceeds one;
/// `m_under` is the most recent node count whose error still reached the
/// lower band edge and plays the same role for the decrease branch. The
/// result is exact and unclamped, so it can be negative for extreme inputs.
pub fn theoretical_node_count(
    m_w: usize,
    e_max: f64,
    eps_th: f64,
    kappa: f64,
    m_under: usize,
) -> Result<i64> {
    if m_w < 2 {
        return Err(Error::UnsupportedNodeCount { m: m_w });
    }
    if e_max <= 0.0 || eps_th <= 0.0 || kappa <= 0.0 || kappa >= 1.0
        || e_max.is_nan() || eps_th.is_nan()
    {
        return Err(Error::InvalidConfig(format!(
            "node law inputs must satisfy e_max > 0, eps_th > 0, kappa in (0, 1); \
             got e_max = {e_max}, eps_th = {eps_th}, kappa = {kappa}"
        )));
    }
    let m = m_w as i64;
    if e_max > eps_th {
        let rho1 = 1.0 / ((m_w as f64 + 1.0) / std::f64::consts::E).ln();
        Ok(m + (rho1 * (e_max / eps_th).ln()).ceil() as i64)
    } else if e_max >= kappa * eps_th {
        Ok(m)
    } else {
        if m_under < 2 {
            return Err(Error::UnsupportedNodeCount { m: m_under });
        }
        let rho2 = 1.0 / ((m_under as f64 + 1.0) / std::f64::consts::E).ln();
        Ok(m + (rho2 * (e_max / (kappa * eps_th)).ln()).floor() as i64)
    }
}

/// Exponential decay envelope for the maximum window error,
/// `C ((M + 1) / e)^(-M)`, valid for `M >= 2`.
pub fn decay_bound(c_w: f64, m_w: usize) -> Result<f64> {
    if m_w < 2 {
        return Err(Error::UnsupportedNodeCount { m: m_w });
    }
    if c_w < 0.0 || !c_w.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "decay constant {c_w} must be finite and nonnegative"
        )));
    }
    let base = (m_w as f64 + 1.0) / std::f64::consts::E;
    Ok(c_w * base.powi(-(m_w as i32)))
}
