//! Full-pipeline experiment runner: plant simulation, per-window sensing,
//! identification, continuity solve, node adaptation and state estimation,
//! plus JSON configuration, CSV export and parameter sweeps.
//!
//! Runs are deterministic: the same configuration produces byte-identical
//! CSV files, and `manifest.json` echoes the configuration so a run can be
//! reproduced from its own output directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cheb::Interval;
use crate::estimator::{self, EstimatorState};
use crate::identifier::{self, CoefficientKind, CoefficientSet, RegularizerConfig};
use crate::node_select::{self, NodeSelector, Regime};
use crate::plant::{self, PlantSpec, Trace};
use crate::window::{self, WindowConfig};
use crate::{Error, Result};

/// Dynamics-error threshold used to report the feedforward convergence time.
pub const F_CONVERGENCE_TOL: f64 = 1e-2;
/// State-error threshold used to report the estimate convergence time.
pub const X_CONVERGENCE_TOL: f64 = 5e-2;

/// Plant selection by name plus named parameters. `matrix` is only consulted
/// by the linear plant.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantConfig {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
}

impl PlantConfig {
    pub fn build(&self) -> Result<PlantSpec> {
        let param = |key: &str| -> Result<f64> {
            self.params.get(key).copied().ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "plant `{}` requires parameter `{key}`",
                    self.name
                ))
            })
        };
        match self.name.as_str() {
            "stuart_landau" => Ok(PlantSpec::stuart_landau(param("a")?, param("omega")?)),
            "van_der_pol" => Ok(PlantSpec::van_der_pol(param("mu")?)),
            "linear" => {
                let rows = self.matrix.as_ref().ok_or_else(|| {
                    Error::InvalidConfig("linear plant requires `matrix`".to_string())
                })?;
                Ok(PlantSpec::linear(parse_matrix(rows, "plant.matrix")?))
            }
            "integrator_chain" => {
                let dim = param("dim")?;
                if dim < 1.0 || dim.fract() != 0.0 {
                    return Err(Error::InvalidConfig(
                        "integrator_chain `dim` must be a positive integer".to_string(),
                    ));
                }
                Ok(PlantSpec::integrator_chain(dim as usize))
            }
            other => Err(Error::InvalidConfig(format!("unknown plant `{other}`"))),
        }
    }
}

/// Thresholds and gains of the node-count update law; the count bounds live
/// in [`WindowConfig`].
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectorConfig {
    pub eps_th: f64,
    pub kappa: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

/// The symmetric positive definite pair defining the estimator gain.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainConfig {
    pub z: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
}

/// Ridge strength for the per-window fit. With `warm_start` the previous
/// window's coefficients seed the prior instead of zero (padded or truncated
/// if the node count changed).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularizerSettings {
    pub ridge: f64,
    #[serde(default)]
    pub warm_start: bool,
}

/// Complete description of one experiment.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub plant: PlantConfig,
    pub window: WindowConfig,
    pub selector: SelectorConfig,
    pub gain: GainConfig,
    pub regularizer: RegularizerSettings,
    /// Total experiment length in seconds; must be a whole number of windows.
    pub horizon: f64,
    /// Simulation and estimator integration step in seconds.
    pub sim_step: f64,
    pub x0: Vec<f64>,
    pub xhat0: Vec<f64>,
    /// Feedforward coefficients for the first window, `(M + 1) x N_P`.
    pub eta1: Vec<Vec<f64>>,
    /// Consumed only by randomized test plants; the reference pipeline is
    /// deterministic and ignores it.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    /// The benchmark oscillator experiment: Stuart-Landau plant with
    /// `a = 0.5`, `omega = 1.5`, windows of 0.2 s over a 12 s horizon at a
    /// 1 ms step, error band `[1e-4, 1e-3]`, gains `(0.2, 0.9)`, initial
    /// node count 2.
    pub fn stuart_landau_sec5() -> RunConfig {
        RunConfig {
            plant: PlantConfig {
                name: "stuart_landau".to_string(),
                params: BTreeMap::from([
                    ("a".to_string(), 0.5),
                    ("omega".to_string(), 1.5),
                ]),
                matrix: None,
            },
            window: WindowConfig {
                tau: 0.2,
                delta_t: 0.001,
                m_init: 2,
                m_min: 2,
                m_max: 16,
            },
            selector: SelectorConfig {
                eps_th: 1e-3,
                kappa: 0.1,
                gamma1: 0.2,
                gamma2: 0.9,
            },
            gain: GainConfig {
                z: vec![vec![10.0, 0.0], vec![0.0, 10.0]],
                q: vec![vec![5.0, 0.0], vec![0.0, 4.5]],
            },
            regularizer: RegularizerSettings {
                ridge: 1e-8,
                warm_start: false,
            },
            horizon: 12.0,
            sim_step: 0.001,
            x0: vec![0.5, 0.5],
            xhat0: vec![2.0, 2.0],
            eta1: vec![vec![0.05, -0.05], vec![0.05, -0.05], vec![0.05, -0.05]],
            seed: 0,
            out_dir: None,
        }
    }

    /// Number of windows covering the horizon.
    pub fn window_count(&self) -> usize {
        ((self.horizon / self.window.tau) - 1e-9).ceil().max(1.0) as usize
    }

    /// Validate every embedded invariant; returns human-readable warnings for
    /// conditions that are suspicious but not fatal.
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        let plant = self.plant.build()?;
        self.window.validate()?;
        NodeSelector::new(
            self.selector.eps_th,
            self.selector.kappa,
            self.selector.gamma1,
            self.selector.gamma2,
            self.window.m_init,
            self.window.m_min,
            self.window.m_max,
        )?;

        let dim = plant.dim();
        if self.x0.len() != dim || self.xhat0.len() != dim {
            return Err(Error::InvalidConfig(format!(
                "x0 and xhat0 must have the plant dimension {dim}"
            )));
        }
        let z = parse_matrix(&self.gain.z, "gain.z")?;
        let q = parse_matrix(&self.gain.q, "gain.q")?;
        if z.nrows() != dim || q.nrows() != dim {
            return Err(Error::InvalidConfig(format!(
                "gain matrices must be {dim} x {dim}"
            )));
        }
        let design = estimator::solve_gain(&z, &q)?;
        if !design.meets_gain_hypothesis() {
            warnings.push(format!(
                "smallest eigenvalue of Q is {:.3} (<= 3); the boundedness \
                 guarantee behind the gain design does not apply",
                design.q_min_eigenvalue
            ));
        }

        let eta1 = parse_matrix_rect(&self.eta1, "eta1")?;
        if eta1.ncols() != dim {
            return Err(Error::InvalidConfig(format!(
                "eta1 must have one column per state dimension ({dim})"
            )));
        }

        if self.horizon <= 0.0 || !self.horizon.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "horizon {} must be positive",
                self.horizon
            )));
        }
        let windows = self.window_count();
        let covered = windows as f64 * self.window.tau;
        if (covered - self.horizon).abs() > 1e-9 * self.horizon.max(1.0) {
            return Err(Error::InvalidConfig(format!(
                "horizon {} is not a whole number of windows of width {}; \
                 the final window would be short",
                self.horizon, self.window.tau
            )));
        }
        if self.sim_step <= 0.0 || self.sim_step >= self.window.tau || self.sim_step.is_nan() {
            return Err(Error::InvalidConfig(format!(
                "sim_step {} must lie in (0, tau)",
                self.sim_step
            )));
        }
        if self.regularizer.ridge < 0.0 || !self.regularizer.ridge.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "ridge {} must be finite and nonnegative",
                self.regularizer.ridge
            )));
        }
        Ok(warnings)
    }
}

fn parse_matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let m = parse_matrix_rect(rows, what)?;
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidConfig(format!("{what} must be square")));
    }
    Ok(m)
}

fn parse_matrix_rect(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    if rows.is_empty() {
        return Err(Error::InvalidConfig(format!("{what} must not be empty")));
    }
    let cols = rows[0].len();
    if cols == 0 || rows.iter().any(|r| r.len() != cols) {
        return Err(Error::InvalidConfig(format!(
            "{what} must be rectangular with nonempty rows"
        )));
    }
    let mut m = DMatrix::zeros(rows.len(), cols);
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "{what} contains a non-finite entry"
                )));
            }
            m[(i, j)] = *v;
        }
    }
    Ok(m)
}

/// Per-window outcome of a run.
#[derive(Clone, Debug)]
pub struct WindowSummary {
    pub index: usize,
    pub t_start: f64,
    pub t_end: f64,
    /// Node count `M_w` of this window.
    pub order: usize,
    pub avg_error: f64,
    pub max_node_error: f64,
    pub regime: Regime,
    pub node_samples: usize,
    pub lagged_samples: usize,
    pub start_samples: usize,
    pub eta: DMatrix<f64>,
    pub theta: DMatrix<f64>,
}

/// One row of the simulation-grid trajectory. Rows at window boundaries show
/// the post-reset estimate, so the estimation error reads exactly zero at
/// every transition; the final row keeps the last window's end state since no
/// reset follows it.
#[derive(Clone, Debug)]
pub struct TrajectoryRow {
    pub t: f64,
    pub x: DVector<f64>,
    pub x_hat: DVector<f64>,
    pub f_true: DVector<f64>,
    /// Causal feedforward model: the continuity-updated coefficients the
    /// estimator integrated with.
    pub f_hat_theta: DVector<f64>,
    /// Retrospective model: each window's own fit, only available after the
    /// window ends.
    pub f_hat_eta: DVector<f64>,
}

impl TrajectoryRow {
    pub fn x_tilde(&self) -> DVector<f64> {
        &self.x - &self.x_hat
    }
}

/// Everything a run produced.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub windows: Vec<WindowSummary>,
    pub trajectory: Vec<TrajectoryRow>,
    pub state_dim: usize,
    pub total_node_samples: usize,
    pub total_lagged_samples: usize,
    pub total_start_samples: usize,
    /// Sample count an equally accurate periodic scheme would need:
    /// one sample per simulation step over the horizon.
    pub periodic_equivalent_samples: usize,
    pub f_convergence_time: Option<f64>,
    pub x_convergence_time: Option<f64>,
    pub final_order: usize,
    pub gain_warning: Option<String>,
    pub wall_clock: Duration,
}

impl RunReport {
    /// Fresh sensor reads: node samples plus window-start samples (lagged
    /// partners reported separately).
    pub fn total_samples(&self) -> usize {
        self.total_node_samples + self.total_start_samples
    }
}

/// Run the whole pipeline for one configuration.
///
/// Causality: window `w`'s feedforward comes from window `w - 1`'s fit (the
/// first window uses the configured `eta1` directly), the node count for
/// window `w + 1` comes from window `w`'s error report, and the estimate is
/// reset to the measured state at every transition.
pub fn run_experiment(config: &RunConfig) -> Result<RunReport> {
    let started = Instant::now();
    let warnings = config.validate()?;
    let plant = config.plant.build()?;
    let dim = plant.dim();
    let windows = config.window_count();

    let x0 = DVector::from_vec(config.x0.clone());
    let trace = plant::simulate(&plant, &x0, config.horizon, config.sim_step)?;

    let z = parse_matrix(&config.gain.z, "gain.z")?;
    let q = parse_matrix(&config.gain.q, "gain.q")?;
    let gain = estimator::solve_gain(&z, &q)?;

    let eta1 = parse_matrix_rect(&config.eta1, "eta1")?;
    let theta1 = CoefficientSet::new(1, CoefficientKind::Theta, eta1);

    let mut selector = NodeSelector::new(
        config.selector.eps_th,
        config.selector.kappa,
        config.selector.gamma1,
        config.selector.gamma2,
        config.window.m_init,
        config.window.m_min,
        config.window.m_max,
    )?;

    let first_interval = config.window.window_interval(1)?;
    let anchor0 = trace.query(first_interval.start())?;
    let mut state = EstimatorState::new(
        DVector::from_vec(config.xhat0.clone()),
        anchor0,
        theta1,
        first_interval,
        gain.clone(),
    )?;

    let mut previous_eta: Option<CoefficientSet> = None;
    let mut summaries = Vec::with_capacity(windows);
    let mut trajectory: Vec<TrajectoryRow> = Vec::new();
    let mut total_node_samples = 0;
    let mut total_lagged_samples = 0;
    let mut total_start_samples = 0;

    for w in 1..=windows {
        let tag = |e: Error| e.in_window(w);
        let interval = config.window.window_interval(w).map_err(tag)?;
        let order = selector.m_current;

        // (1)-(2) nodes and sensor reads.
        let record =
            window::build_window_record(w, &config.window, order, &trace).map_err(tag)?;
        total_node_samples += record.node_sample_count();
        total_lagged_samples += record.node_sample_count();
        total_start_samples += 1;

        // (3) batch fit at the window end.
        let reg = build_regularizer(config, order, dim, previous_eta.as_ref());
        let eta = identifier::fit_window(&record, &reg).map_err(tag)?;

        // (5) integrate the estimator across the window with the feedforward
        // chosen before the window's own data existed.
        let samples = estimator::integrate_window(&mut state, config.sim_step).map_err(tag)?;

        // (6) error report for the coefficients actually used, then the node
        // count for the next window.
        let report =
            node_select::average_error(&record, &state.active_theta, &selector).map_err(tag)?;
        let next_order = node_select::update_node_count(&selector, &report);

        summaries.push(WindowSummary {
            index: w,
            t_start: interval.start(),
            t_end: interval.end(),
            order,
            avg_error: report.avg_error,
            max_node_error: report.max_node_error,
            regime: report.regime,
            node_samples: record.node_sample_count(),
            lagged_samples: record.node_sample_count(),
            start_samples: 1,
            eta: eta.matrix.clone(),
            theta: state.active_theta.matrix.clone(),
        });

        append_trajectory_rows(
            &mut trajectory,
            &samples,
            &trace,
            &plant,
            &state.active_theta,
            &eta,
            &interval,
            w == windows,
        )
        .map_err(tag)?;

        // (4) continuity solve feeding the next window, then the reset.
        if w < windows {
            let next_interval = config.window.window_interval(w + 1).map_err(tag)?;
            let theta_next =
                identifier::solve_theta(&eta, &interval, &next_interval).map_err(tag)?;
            let measured = trace.query(interval.end()).map_err(tag)?;
            state = estimator::advance_window(state, theta_next, next_interval, &measured)
                .map_err(tag)?;
        }
        selector.m_current = next_order;
        previous_eta = Some(eta);
    }

    let f_convergence_time = convergence_time(&trajectory, |row| {
        (&row.f_true - &row.f_hat_theta).norm() <= F_CONVERGENCE_TOL
    });
    let x_convergence_time =
        convergence_time(&trajectory, |row| row.x_tilde().norm() <= X_CONVERGENCE_TOL);

    Ok(RunReport {
        windows: summaries,
        trajectory,
        state_dim: dim,
        total_node_samples,
        total_lagged_samples,
        total_start_samples,
        periodic_equivalent_samples: ((config.horizon / config.sim_step) + 0.5) as usize,
        f_convergence_time,
        x_convergence_time,
        final_order: selector.m_current,
        gain_warning: warnings.into_iter().next(),
        wall_clock: started.elapsed(),
    })
}

fn build_regularizer(
    config: &RunConfig,
    order: usize,
    dim: usize,
    previous_eta: Option<&CoefficientSet>,
) -> RegularizerConfig {
    let mut reg = RegularizerConfig::ridge(config.regularizer.ridge, order, dim);
    if config.regularizer.warm_start {
        if let Some(prev) = previous_eta {
            let mut eta0 = DMatrix::zeros(order + 1, dim);
            for i in 0..=order.min(prev.order()) {
                for j in 0..dim {
                    eta0[(i, j)] = prev.matrix[(i, j)];
                }
            }
            reg.eta0 = eta0;
        }
    }
    reg
}

#[allow(clippy::too_many_arguments)]
fn append_trajectory_rows(
    trajectory: &mut Vec<TrajectoryRow>,
    samples: &[(f64, DVector<f64>)],
    trace: &Trace,
    plant: &PlantSpec,
    theta: &CoefficientSet,
    eta: &CoefficientSet,
    interval: &Interval,
    keep_endpoint: bool,
) -> Result<()> {
    // The row at the left boundary is this window's post-reset start; the
    // right boundary belongs to the next window's reset except for the final
    // window, which keeps its integrated end state.
    let last = if keep_endpoint {
        samples.len()
    } else {
        samples.len() - 1
    };
    for (t, x_hat) in &samples[..last] {
        let x = trace.query(*t)?;
        let f_true = plant.rhs(&x)?;
        let f_hat_theta = identifier::predict_dynamics(theta, interval, *t)?;
        let f_hat_eta = identifier::predict_dynamics(eta, interval, *t)?;
        trajectory.push(TrajectoryRow {
            t: *t,
            x,
            x_hat: x_hat.clone(),
            f_true,
            f_hat_theta,
            f_hat_eta,
        });
    }
    Ok(())
}

fn convergence_time(
    trajectory: &[TrajectoryRow],
    converged: impl Fn(&TrajectoryRow) -> bool,
) -> Option<f64> {
    let mut last_violation = None;
    for (i, row) in trajectory.iter().enumerate() {
        if !converged(row) {
            last_violation = Some(i);
        }
    }
    match last_violation {
        None => trajectory.first().map(|r| r.t),
        Some(i) if i + 1 < trajectory.len() => Some(trajectory[i + 1].t),
        Some(_) => None,
    }
}

/// Column-stable float formatting for the CSV outputs: 17 significant digits
/// in scientific notation, enough to reproduce every f64 bit pattern.
fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write `trajectory.csv`, `windows.csv` and `manifest.json`; returns the
/// paths written.
pub fn export_csv(report: &RunReport, config: &RunConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::Io {
        path: out_dir.to_path_buf(),
        source: e,
    })?;
    let mut written = Vec::new();

    let trajectory_path = out_dir.join("trajectory.csv");
    write_trajectory_csv(report, &trajectory_path)?;
    written.push(trajectory_path);

    let windows_path = out_dir.join("windows.csv");
    write_windows_csv(report, &windows_path)?;
    written.push(windows_path);

    let manifest_path = out_dir.join("manifest.json");
    write_manifest(report, config, &manifest_path)?;
    written.push(manifest_path);

    Ok(written)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write_trajectory_csv(report: &RunReport, path: &Path) -> Result<()> {
    let mut writer = csv_writer(path)?;
    let n = report.state_dim;
    let mut header: Vec<String> = vec!["t".to_string()];
    header.extend((1..=n).map(|j| format!("x{j}")));
    header.extend((1..=n).map(|j| format!("xhat{j}")));
    for j in 1..=n {
        header.push(format!("F{j}"));
        header.push(format!("Fhat{j}"));
    }
    header.extend((1..=n).map(|j| format!("xtilde{j}")));
    header.extend((1..=n).map(|j| format!("Fhat_eta{j}")));
    write_record(&mut writer, path, &header)?;

    for row in &report.trajectory {
        let x_tilde = row.x_tilde();
        let mut fields: Vec<String> = vec![format_float(row.t)];
        fields.extend(row.x.iter().map(|v| format_float(*v)));
        fields.extend(row.x_hat.iter().map(|v| format_float(*v)));
        for j in 0..n {
            fields.push(format_float(row.f_true[j]));
            fields.push(format_float(row.f_hat_theta[j]));
        }
        fields.extend(x_tilde.iter().map(|v| format_float(*v)));
        fields.extend(row.f_hat_eta.iter().map(|v| format_float(*v)));
        write_record(&mut writer, path, &fields)?;
    }
    writer.flush().map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write_windows_csv(report: &RunReport, path: &Path) -> Result<()> {
    let mut writer = csv_writer(path)?;
    write_record(
        &mut writer,
        path,
        &[
            "w", "t_start", "t_end", "m_w", "avg_error", "regime", "samples",
        ],
    )?;
    for w in &report.windows {
        write_record(
            &mut writer,
            path,
            &[
                w.index.to_string(),
                format_float(w.t_start),
                format_float(w.t_end),
                w.order.to_string(),
                format_float(w.avg_error),
                w.regime.to_string(),
                w.node_samples.to_string(),
            ],
        )?;
    }
    writer.flush().map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write_record<W: std::io::Write, S: AsRef<[u8]>>(
    writer: &mut csv::Writer<W>,
    path: &Path,
    fields: &[S],
) -> Result<()> {
    writer.write_record(fields).map_err(|e| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    })
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    config: RunConfig,
    totals: ManifestTotals,
    convergence: ManifestConvergence,
    final_node_count: usize,
    node_count_trajectory: Vec<usize>,
    version: String,
    wall_clock_seconds: f64,
}

#[derive(Serialize, Deserialize)]
struct ManifestTotals {
    windows: usize,
    node_samples: usize,
    window_start_samples: usize,
    lagged_samples: usize,
    periodic_equivalent_samples: usize,
}

#[derive(Serialize, Deserialize)]
struct ManifestConvergence {
    dynamics_tol: f64,
    dynamics_time: Option<f64>,
    state_tol: f64,
    state_time: Option<f64>,
}

fn write_manifest(report: &RunReport, config: &RunConfig, path: &Path) -> Result<()> {
    let manifest = Manifest {
        config: config.clone(),
        totals: ManifestTotals {
            windows: report.windows.len(),
            node_samples: report.total_node_samples,
            window_start_samples: report.total_start_samples,
            lagged_samples: report.total_lagged_samples,
            periodic_equivalent_samples: report.periodic_equivalent_samples,
        },
        convergence: ManifestConvergence {
            dynamics_tol: F_CONVERGENCE_TOL,
            dynamics_time: report.f_convergence_time,
            state_tol: X_CONVERGENCE_TOL,
            state_time: report.x_convergence_time,
        },
        final_node_count: report.final_order,
        node_count_trajectory: report.windows.iter().map(|w| w.order).collect(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_clock_seconds: report.wall_clock.as_secs_f64(),
    };
    let body = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::InvalidConfig(format!("manifest serialization failed: {e}")))?;
    std::fs::write(path, body + "\n").map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Write per-figure data files (dynamics, node counts, states, estimation
/// error) mirroring the columns a plotting script would want.
pub fn export_plot_data(report: &RunReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::Io {
        path: out_dir.to_path_buf(),
        source: e,
    })?;
    let n = report.state_dim;
    let mut written = Vec::new();

    let dynamics = out_dir.join("fig2_dynamics.csv");
    {
        let mut writer = csv_writer(&dynamics)?;
        let mut header = vec!["t".to_string()];
        for j in 1..=n {
            header.push(format!("F{j}"));
            header.push(format!("Fhat{j}"));
        }
        write_record(&mut writer, &dynamics, &header)?;
        for row in &report.trajectory {
            let mut fields = vec![format_float(row.t)];
            for j in 0..n {
                fields.push(format_float(row.f_true[j]));
                fields.push(format_float(row.f_hat_theta[j]));
            }
            write_record(&mut writer, &dynamics, &fields)?;
        }
        writer.flush().map_err(|e| Error::Io {
            path: dynamics.clone(),
            source: e,
        })?;
    }
    written.push(dynamics);

    let nodes = out_dir.join("fig3_node_count.csv");
    {
        let mut writer = csv_writer(&nodes)?;
        write_record(&mut writer, &nodes, &["w", "t_start", "m_w"])?;
        for w in &report.windows {
            write_record(
                &mut writer,
                &nodes,
                &[
                    w.index.to_string(),
                    format_float(w.t_start),
                    w.order.to_string(),
                ],
            )?;
        }
        writer.flush().map_err(|e| Error::Io {
            path: nodes.clone(),
            source: e,
        })?;
    }
    written.push(nodes);

    let states = out_dir.join("fig4_states.csv");
    {
        let mut writer = csv_writer(&states)?;
        let mut header = vec!["t".to_string()];
        for j in 1..=n {
            header.push(format!("x{j}"));
            header.push(format!("xhat{j}"));
        }
        write_record(&mut writer, &states, &header)?;
        for row in &report.trajectory {
            let mut fields = vec![format_float(row.t)];
            for j in 0..n {
                fields.push(format_float(row.x[j]));
                fields.push(format_float(row.x_hat[j]));
            }
            write_record(&mut writer, &states, &fields)?;
        }
        writer.flush().map_err(|e| Error::Io {
            path: states.clone(),
            source: e,
        })?;
    }
    written.push(states);

    let errors = out_dir.join("fig5_estimation_error.csv");
    {
        let mut writer = csv_writer(&errors)?;
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|j| format!("xtilde{j}")));
        write_record(&mut writer, &errors, &header)?;
        for row in &report.trajectory {
            let mut fields = vec![format_float(row.t)];
            fields.extend(row.x_tilde().iter().map(|v| format_float(*v)));
            write_record(&mut writer, &errors, &fields)?;
        }
        writer.flush().map_err(|e| Error::Io {
            path: errors.clone(),
            source: e,
        })?;
    }
    written.push(errors);

    Ok(written)
}

/// Human-readable run summary.
pub fn summarize(report: &RunReport) -> String {
    let mut out = String::new();
    let reduction = report.periodic_equivalent_samples as f64 / report.total_node_samples as f64;
    out.push_str(&format!("windows:                      {}\n", report.windows.len()));
    out.push_str(&format!(
        "aperiodic node samples:       {}\n",
        report.total_node_samples
    ));
    out.push_str(&format!(
        "window-start samples:         {}\n",
        report.total_start_samples
    ));
    out.push_str(&format!(
        "lagged partner samples:       {}\n",
        report.total_lagged_samples
    ));
    out.push_str(&format!(
        "periodic-equivalent samples:  {}\n",
        report.periodic_equivalent_samples
    ));
    out.push_str(&format!(
        "node-sample reduction:        {reduction:.1}x\n"
    ));
    match report.f_convergence_time {
        Some(t) => out.push_str(&format!(
            "dynamics error <= {F_CONVERGENCE_TOL:.0e} from:  t = {t:.3} s\n"
        )),
        None => out.push_str("dynamics error never settled below the reporting threshold\n"),
    }
    match report.x_convergence_time {
        Some(t) => out.push_str(&format!(
            "state error <= {X_CONVERGENCE_TOL:.0e} from:     t = {t:.3} s\n"
        )),
        None => out.push_str("state error never settled below the reporting threshold\n"),
    }
    out.push_str(&format!("final node count:             {}\n", report.final_order));
    if let Some(warning) = &report.gain_warning {
        out.push_str(&format!("warning: {warning}\n"));
    }
    out
}

/// Load a configuration from a JSON file. A `manifest.json` produced by
/// [`export_csv`] is accepted too: its embedded config is extracted, which
/// makes reruns from a previous output directory trivial.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let body = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let config: RunConfig = match serde_json::from_str(&body) {
        Ok(config) => config,
        Err(primary) => {
            #[derive(Deserialize)]
            struct Envelope {
                config: RunConfig,
            }
            match serde_json::from_str::<Envelope>(&body) {
                Ok(envelope) => envelope.config,
                Err(_) => {
                    return Err(Error::InvalidConfig(format!(
                        "{}: {primary}",
                        path.display()
                    )))
                }
            }
        }
    };
    config.validate()?;
    Ok(config)
}

/// Outcome of one sweep point.
#[derive(Debug)]
pub struct SweepOutcome {
    pub value: f64,
    pub report: RunReport,
}

/// Override one scalar parameter of the base configuration.
pub fn apply_param(config: &RunConfig, param: &str, value: f64) -> Result<RunConfig> {
    let mut next = config.clone();
    let as_count = |v: f64| -> Result<usize> {
        if v < 0.0 || v.fract() != 0.0 {
            return Err(Error::InvalidConfig(format!(
                "`{param}` must be a nonnegative integer, got {v}"
            )));
        }
        Ok(v as usize)
    };
    match param {
        "eps_th" => next.selector.eps_th = value,
        "kappa" => next.selector.kappa = value,
        "gamma1" => next.selector.gamma1 = value,
        "gamma2" => next.selector.gamma2 = value,
        "tau" => next.window.tau = value,
        "delta_t" => next.window.delta_t = value,
        "m_init" => next.window.m_init = as_count(value)?,
        "m_min" => next.window.m_min = as_count(value)?,
        "m_max" => next.window.m_max = as_count(value)?,
        "horizon" => next.horizon = value,
        "sim_step" => next.sim_step = value,
        "ridge" => next.regularizer.ridge = value,
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown sweep parameter `{other}`"
            )))
        }
    }
    next.validate()?;
    Ok(next)
}

/// Run one experiment per value of the swept parameter, in parallel; each run
/// owns its state, results are collected in the input order.
pub fn sweep(base: &RunConfig, param: &str, values: &[f64]) -> Result<Vec<SweepOutcome>> {
    if values.is_empty() {
        return Err(Error::InvalidConfig(
            "sweep requires at least one value".to_string(),
        ));
    }
    let configs: Vec<(f64, RunConfig)> = values
        .iter()
        .map(|&v| apply_param(base, param, v).map(|c| (v, c)))
        .collect::<Result<_>>()?;
    configs
        .into_par_iter()
        .map(|(value, config)| {
            run_experiment(&config).map(|report| SweepOutcome { value, report })
        })
        .collect()
}
