//! Ground-truth plants and fixed-step simulation traces.
//!
//! A [`Trace`] integrates a plant on a fine uniform grid and answers off-grid
//! queries by 4-point cubic interpolation, which keeps backward-difference
//! derivative estimates at fourth order even when node times fall between
//! grid points.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::window::StateOracle;
use crate::{Error, Result};

type Rhs = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;

/// An autonomous plant `dx/dt = F(x)` with named parameters.
#[derive(Clone)]
pub struct PlantSpec {
    name: String,
    dim: usize,
    params: BTreeMap<String, f64>,
    rhs: Rhs,
}

impl fmt::Debug for PlantSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PlantSpec")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("params", &self.params)
            .finish_non_exhaustive()
    }
}

impl PlantSpec {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        params: BTreeMap<String, f64>,
        rhs: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        PlantSpec {
            name: name.into(),
            dim,
            params,
            rhs: Arc::new(rhs),
        }
    }

    /// The Stuart-Landau oscillator
    /// `dx1 = (a - (x1^2 + x2^2)) x1 - omega x2`,
    /// `dx2 = (a - (x1^2 + x2^2)) x2 + omega x1`,
    /// with a stable limit cycle of radius `sqrt(a)` for `a > 0`.
    pub fn stuart_landau(a: f64, omega: f64) -> Self {
        let params = BTreeMap::from([("a".to_string(), a), ("omega".to_string(), omega)]);
        PlantSpec::new("stuart_landau", 2, params, move |x| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            DVector::from_vec(vec![
                (a - r2) * x[0] - omega * x[1],
                (a - r2) * x[1] + omega * x[0],
            ])
        })
    }

    /// The Van der Pol oscillator `dx1 = x2`, `dx2 = mu (1 - x1^2) x2 - x1`.
    pub fn van_der_pol(mu: f64) -> Self {
        let params = BTreeMap::from([("mu".to_string(), mu)]);
        PlantSpec::new("van_der_pol", 2, params, move |x| {
            DVector::from_vec(vec![x[1], mu * (1.0 - x[0] * x[0]) * x[1] - x[0]])
        })
    }

    /// A linear plant `dx/dt = A x`. With a nilpotent `A` (for example an
    /// integrator chain) the trajectories are polynomials in time, which
    /// exact-recovery tests rely on.
    pub fn linear(a: DMatrix<f64>) -> Self {
        assert_eq!(a.nrows(), a.ncols(), "system matrix must be square");
        let dim = a.nrows();
        PlantSpec::new("linear", dim, BTreeMap::new(), move |x| &a * x)
    }

    /// Integrator chain of the given dimension: ones on the superdiagonal, so
    /// states are polynomials in time of degree below `dim`.
    pub fn integrator_chain(dim: usize) -> Self {
        let mut a = DMatrix::zeros(dim, dim);
        for i in 0..dim.saturating_sub(1) {
            a[(i, i + 1)] = 1.0;
        }
        let mut spec = PlantSpec::linear(a);
        spec.name = "integrator_chain".to_string();
        spec
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    /// Evaluate the plant dynamics at a state.
    pub fn rhs(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "plant state",
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok((self.rhs)(x))
    }
}

/// States of a simulated plant on a uniform grid, immutable once built.
#[derive(Clone, Debug)]
pub struct Trace {
    t0: f64,
    step: f64,
    states: Vec<DVector<f64>>,
}

impl Trace {
    pub fn start_time(&self) -> f64 {
        self.t0
    }

    pub fn end_time(&self) -> f64 {
        self.t0 + self.step * (self.states.len() - 1) as f64
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn grid_time(&self, i: usize) -> f64 {
        self.t0 + self.step * i as f64
    }

    pub fn grid_state(&self, i: usize) -> &DVector<f64> {
        &self.states[i]
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    /// State at an arbitrary time inside the span.
    ///
    /// Times within `1e-9 * step` of a grid point return the stored state
    /// exactly; anything else goes through 4-point cubic interpolation on the
    /// bracketing cell (clamped at the span ends), which reproduces cubic
    /// trajectories to rounding.
    pub fn query(&self, t: f64) -> Result<DVector<f64>> {
        let slack = 1e-6 * self.step;
        let (start, end) = (self.start_time(), self.end_time());
        if !t.is_finite() || t < start - slack || t > end + slack {
            return Err(Error::OutOfTrace { t, start, end });
        }
        let t = t.clamp(start, end);

        let position = (t - start) / self.step;
        let nearest = position.round();
        if (position - nearest).abs() <= 1e-9 {
            return Ok(self.states[nearest as usize].clone());
        }

        let cell = (position.floor() as usize).min(self.states.len() - 2);
        let first = cell
            .saturating_sub(1)
            .min(self.states.len().saturating_sub(4));
        let count = 4.min(self.states.len());
        let mut out = DVector::zeros(self.dim());
        for k in first..first + count {
            let mut weight = 1.0;
            let tk = self.grid_time(k);
            for j in first..first + count {
                if j != k {
                    weight *= (t - self.grid_time(j)) / (tk - self.grid_time(j));
                }
            }
            out += weight * &self.states[k];
        }
        Ok(out)
    }
}

impl StateOracle for Trace {
    fn dim(&self) -> usize {
        self.dim()
    }
    fn time_span(&self) -> (f64, f64) {
        (self.start_time(), self.end_time())
    }
    fn state_at(&self, t: f64) -> Result<DVector<f64>> {
        self.query(t)
    }
}

/// Measurement-noise hook: wraps a state oracle and adds a caller-supplied
/// perturbation to every read. The reference experiments are noise-free, so
/// nothing in the pipeline constructs this; it exists for robustness studies.
pub struct NoisyOracle<O, F>
where
    O: StateOracle,
    F: Fn(f64) -> DVector<f64>,
{
    inner: O,
    noise: F,
}

impl<O, F> NoisyOracle<O, F>
where
    O: StateOracle,
    F: Fn(f64) -> DVector<f64>,
{
    pub fn new(inner: O, noise: F) -> Self {
        NoisyOracle { inner, noise }
    }
}

impl<O, F> StateOracle for NoisyOracle<O, F>
where
    O: StateOracle,
    F: Fn(f64) -> DVector<f64>,
{
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn time_span(&self) -> (f64, f64) {
        self.inner.time_span()
    }
    fn state_at(&self, t: f64) -> Result<DVector<f64>> {
        Ok(self.inner.state_at(t)? + (self.noise)(t))
    }
}

/// Integrate the plant with the classical fourth-order Runge-Kutta scheme at
/// a fixed step, covering `[0, horizon]`. Aborts with an error as soon as the
/// state stops being finite.
pub fn simulate(spec: &PlantSpec, x0: &DVector<f64>, horizon: f64, step: f64) -> Result<Trace> {
    if horizon <= 0.0 || step <= 0.0 || !horizon.is_finite() || !step.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "horizon {horizon} and step {step} must be positive and finite"
        )));
    }
    if x0.len() != spec.dim() {
        return Err(Error::DimensionMismatch {
            context: "initial state",
            expected: spec.dim(),
            found: x0.len(),
        });
    }
    let steps = ((horizon / step) - 1e-9).ceil().max(1.0) as usize;
    let mut states = Vec::with_capacity(steps + 1);
    states.push(x0.clone());
    let mut x = x0.clone();
    for i in 0..steps {
        let k1 = (spec.rhs)(&x);
        let k2 = (spec.rhs)(&(&x + &k1 * (step / 2.0)));
        let k3 = (spec.rhs)(&(&x + &k2 * (step / 2.0)));
        let k4 = (spec.rhs)(&(&x + &k3 * step));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (step / 6.0);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                t: (i as f64 + 1.0) * step,
            });
        }
        states.push(x.clone());
    }
    Ok(Trace {
        t0: 0.0,
        step,
        states,
    })
}
