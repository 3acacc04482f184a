//! Window-wise adaptive state estimator and its gain design.
//!
//! Over each window the estimate integrates the identified feedforward
//! polynomial plus a corrective term built from the window-start measurement,
//! and is reset to the measured state at every window transition, so the
//! estimation error restarts from exactly zero each window.

use nalgebra::{DMatrix, DVector};

use crate::cheb::{self, Interval};
use crate::identifier::CoefficientSet;
use crate::{Error, Result};

/// Gain matrix together with the pair that defined it. `K` satisfies
/// `Z K + K' Z = -Q` with symmetric positive definite `Z`, `Q`.
#[derive(Clone, Debug)]
pub struct GainDesign {
    pub z: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub k: DMatrix<f64>,
    /// Smallest eigenvalue of `Q`; the stability argument behind the design
    /// wants it above 3, and callers are expected to warn when it is not.
    pub q_min_eigenvalue: f64,
}

impl GainDesign {
    /// Frobenius norm of `Z K + K' Z + Q`.
    pub fn residual_norm(&self) -> f64 {
        (&self.z * &self.k + self.k.transpose() * &self.z + &self.q).norm()
    }

    /// Whether the eigenvalue hypothesis of the boundedness argument holds.
    pub fn meets_gain_hypothesis(&self) -> bool {
        self.q_min_eigenvalue > 3.0
    }
}

fn check_spd(m: &DMatrix<f64>, name: &'static str) -> Result<f64> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            context: "gain matrices must be square",
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    let scale = m.amax().max(1.0);
    if (m - m.transpose()).amax() > 1e-12 * scale {
        return Err(Error::NotPositiveDefinite { name });
    }
    let eigenvalues = m.clone().symmetric_eigen().eigenvalues;
    let min = eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        return Err(Error::NotPositiveDefinite { name });
    }
    Ok(min)
}

/// Solve `Z K + K' Z = -Q` for the gain.
///
/// The equation only pins the symmetric part of `Z K`, so `K = -Z^-1 Q / 2`
/// (which makes `Z K` symmetric) solves it exactly; for `Z = z I` this is
/// the direct `-Q / (2 z)`. A violated eigenvalue hypothesis on `Q` is
/// reported through the design, not an error.
pub fn solve_gain(z: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<GainDesign> {
    check_spd(z, "z")?;
    let q_min_eigenvalue = check_spd(q, "q")?;
    if z.nrows() != q.nrows() {
        return Err(Error::DimensionMismatch {
            context: "gain pair",
            expected: z.nrows(),
            found: q.nrows(),
        });
    }

    let n = z.nrows();
    let diagonal = z[(0, 0)];
    let is_scaled_identity = (0..n).all(|i| (z[(i, i)] - diagonal).abs() <= 1e-14 * diagonal)
        && (0..n).all(|i| (0..n).all(|j| i == j || z[(i, j)].abs() <= 1e-14 * diagonal));

    let k = if is_scaled_identity {
        q * (-0.5 / diagonal)
    } else {
        let chol = z.clone().cholesky().ok_or(Error::NotPositiveDefinite { name: "z" })?;
        chol.solve(q) * -0.5
    };

    Ok(GainDesign {
        z: z.clone(),
        q: q.clone(),
        k,
        q_min_eigenvalue,
    })
}

/// Estimator state over one window: the current estimate, the coefficients
/// it integrates with, and the measured window-start state the corrective
/// term is anchored to.
#[derive(Clone, Debug)]
pub struct EstimatorState {
    pub x_hat: DVector<f64>,
    pub t: f64,
    pub active_theta: CoefficientSet,
    pub active_interval: Interval,
    pub gain: GainDesign,
    pub anchor_state: DVector<f64>,
}

impl EstimatorState {
    /// Set up the first window. The initial estimate is a free choice here;
    /// every later window starts from the measured state via
    /// [`advance_window`].
    pub fn new(
        x_hat: DVector<f64>,
        anchor_state: DVector<f64>,
        theta: CoefficientSet,
        interval: Interval,
        gain: GainDesign,
    ) -> Result<Self> {
        let dim = x_hat.len();
        if anchor_state.len() != dim {
            return Err(Error::DimensionMismatch {
                context: "anchor state",
                expected: dim,
                found: anchor_state.len(),
            });
        }
        if theta.state_dim() != dim {
            return Err(Error::DimensionMismatch {
                context: "coefficient columns",
                expected: dim,
                found: theta.state_dim(),
            });
        }
        if gain.k.nrows() != dim {
            return Err(Error::DimensionMismatch {
                context: "gain size",
                expected: dim,
                found: gain.k.nrows(),
            });
        }
        let t = interval.start();
        Ok(EstimatorState {
            x_hat,
            t,
            active_theta: theta,
            active_interval: interval,
            gain,
            anchor_state,
        })
    }
}

/// Estimator dynamics: `theta' T(t) - K (x(t^{w-1}) - x_hat)`.
pub fn estimator_rhs(state: &EstimatorState, t: f64) -> Result<DVector<f64>> {
    estimator_rhs_at(state, t, &state.x_hat)
}

/// `2 sqrt(M + 1) ||theta||`: bound on how far the feedforward polynomial
/// can swing across its window, from the coefficient norm and the unit
/// envelope of the basis. This is the one computable term of the model-error
/// decomposition (the truncation and window-Lipschitz terms need derivative
/// and Lipschitz bounds of the unknown dynamics); reported as a diagnostic.
pub fn feedforward_swing_bound(theta: &CoefficientSet) -> f64 {
    2.0 * ((theta.order() + 1) as f64).sqrt() * theta.matrix.norm()
}

/// Move to the next window: reset the estimate to the measured window-start
/// state (so the estimation error is exactly zero there) and install the new
/// coefficients.
pub fn advance_window(
    state: EstimatorState,
    theta_new: CoefficientSet,
    iv_new: Interval,
    measured_start: &DVector<f64>,
) -> Result<EstimatorState> {
    if measured_start.len() != state.x_hat.len() {
        return Err(Error::DimensionMismatch {
            context: "measured window-start state",
            expected: state.x_hat.len(),
            found: measured_start.len(),
        });
    }
    if theta_new.state_dim() != state.x_hat.len() {
        return Err(Error::DimensionMismatch {
            context: "coefficient columns",
            expected: state.x_hat.len(),
            found: theta_new.state_dim(),
        });
    }
    if (state.active_interval.end() - iv_new.start()).abs()
        > 1e-9 * state.active_interval.width()
    {
        return Err(Error::MismatchedWindows {
            detail: format!(
                "next window starts at {} but the active one ends at {}",
                iv_new.start(),
                state.active_interval.end()
            ),
        });
    }
    Ok(EstimatorState {
        x_hat: measured_start.clone(),
        t: iv_new.start(),
        active_theta: theta_new,
        active_interval: iv_new,
        gain: state.gain,
        anchor_state: measured_start.clone(),
    })
}

/// Integrate the estimator over its active window with the classical
/// fourth-order Runge-Kutta scheme at (approximately) the requested step.
///
/// The step count is `round(width / step)`, so the emitted samples always
/// land on the window end exactly; samples cover both endpoints. On return
/// the state sits at the window end.
pub fn integrate_window(
    state: &mut EstimatorState,
    step: f64,
) -> Result<Vec<(f64, DVector<f64>)>> {
    if step <= 0.0 || !step.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "integration step {step} must be positive and finite"
        )));
    }
    let width = state.active_interval.width();
    let steps = ((width / step).round() as usize).max(1);
    let h = width / steps as f64;
    let start = state.active_interval.start();

    let mut samples = Vec::with_capacity(steps + 1);
    samples.push((state.t, state.x_hat.clone()));
    let mut x = state.x_hat.clone();
    for i in 0..steps {
        let t = start + i as f64 * h;
        let k1 = estimator_rhs_at(state, t, &x)?;
        let k2 = estimator_rhs_at(state, t + 0.5 * h, &(&x + &k1 * (0.5 * h)))?;
        let k3 = estimator_rhs_at(state, t + 0.5 * h, &(&x + &k2 * (0.5 * h)))?;
        let k4 = estimator_rhs_at(state, t + h, &(&x + &k3 * h))?;
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { t: t + h });
        }
        let t_next = if i + 1 == steps {
            state.active_interval.end()
        } else {
            start + (i + 1) as f64 * h
        };
        samples.push((t_next, x.clone()));
    }
    state.x_hat = x;
    state.t = state.active_interval.end();
    Ok(samples)
}

fn estimator_rhs_at(state: &EstimatorState, t: f64, x: &DVector<f64>) -> Result<DVector<f64>> {
    let basis = cheb::eval_shifted_basis(
        t,
        &state.active_interval,
        state.active_theta.order(),
        0,
    )?;
    let mut out = DVector::zeros(x.len());
    for j in 0..state.active_theta.state_dim() {
        let mut acc = 0.0;
        for (i, b) in basis.iter().enumerate() {
            acc += state.active_theta.matrix[(i, j)] * b;
        }
        out[j] = acc;
    }
    out -= &state.gain.k * (&state.anchor_state - x);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identifier::CoefficientKind;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn identity_gain(dim: usize) -> GainDesign {
        solve_gain(
            &DMatrix::identity(dim, dim),
            &(DMatrix::identity(dim, dim) * 4.0),
        )
        .unwrap()
    }

    fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &a * a.transpose() + DMatrix::identity(n, n)
    }

    #[test]
    fn gain_for_scaled_identity_is_direct() {
        let z = DMatrix::identity(2, 2) * 10.0;
        let q = DMatrix::from_partial_diagonal(2, 2, &[5.0, 4.5]);
        let design = solve_gain(&z, &q).unwrap();
        assert_abs_diff_eq!(design.k[(0, 0)], -0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(design.k[(1, 1)], -0.225, epsilon = 1e-15);
        assert_abs_diff_eq!(design.k[(0, 1)], 0.0);
        assert!(design.residual_norm() <= 1e-12);
        assert!(design.meets_gain_hypothesis());
        assert_abs_diff_eq!(design.q_min_eigenvalue, 4.5, epsilon = 1e-12);
    }

    #[test]
    fn gain_for_unit_pair() {
        let design = solve_gain(&DMatrix::identity(2, 2), &(DMatrix::identity(2, 2) * 2.0))
            .unwrap();
        assert_abs_diff_eq!(design.k[(0, 0)], -1.0);
        assert_abs_diff_eq!(design.k[(1, 1)], -1.0);
        assert!(!design.meets_gain_hypothesis()); // lambda_min(Q) = 2
    }

    #[test]
    fn gain_residual_vanishes_for_random_spd_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..100 {
            let z = random_spd(&mut rng, 4);
            let q = random_spd(&mut rng, 4);
            let design = solve_gain(&z, &q).unwrap();
            assert!(
                design.residual_norm() <= 1e-12,
                "residual {}",
                design.residual_norm()
            );
            // The symmetric part of K must be negative definite.
            let sym = (&design.k + design.k.transpose()) * 0.5;
            let max_eig = sym
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(max_eig < 0.0);
        }
    }

    #[test]
    fn gain_rejects_bad_inputs() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(solve_gain(&asym, &DMatrix::identity(2, 2)).is_err());
        let indefinite = DMatrix::from_partial_diagonal(2, 2, &[1.0, -1.0]);
        assert!(solve_gain(&DMatrix::identity(2, 2), &indefinite).is_err());
    }

    fn coefficient_set(values: &[f64], dim: usize) -> CoefficientSet {
        CoefficientSet::new(
            1,
            CoefficientKind::Theta,
            DMatrix::from_row_slice(values.len() / dim, dim, values),
        )
    }

    #[test]
    fn rhs_vanishes_at_the_anchor_with_zero_coefficients() {
        let iv = Interval::new(0.0, 0.2).unwrap();
        let state = EstimatorState::new(
            DVector::from_vec(vec![0.7, -0.3]),
            DVector::from_vec(vec![0.7, -0.3]),
            coefficient_set(&[0.0, 0.0, 0.0, 0.0, 0.0, 0.0], 2),
            iv,
            identity_gain(2),
        )
        .unwrap();
        let rhs = estimator_rhs(&state, 0.1).unwrap();
        assert_eq!(rhs, DVector::from_vec(vec![0.0, 0.0]));
    }

    #[test]
    fn rhs_is_pure_feedforward_when_estimate_matches_anchor() {
        // With x_hat equal to the anchor the corrective term vanishes
        // regardless of the gain.
        let iv = Interval::new(0.0, 0.2).unwrap();
        let theta = coefficient_set(&[0.3, -0.1, 0.2, 0.05, -0.15, 0.4], 2);
        let state = EstimatorState::new(
            DVector::from_vec(vec![1.0, 2.0]),
            DVector::from_vec(vec![1.0, 2.0]),
            theta.clone(),
            iv,
            identity_gain(2),
        )
        .unwrap();
        let rhs = estimator_rhs(&state, 0.15).unwrap();
        let feedforward = crate::identifier::predict_dynamics(&theta, &iv, 0.15).unwrap();
        assert_abs_diff_eq!((rhs - feedforward).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn rhs_matches_an_independent_evaluation() {
        let iv = Interval::new(0.2, 0.4).unwrap();
        let theta = coefficient_set(&[0.3, -0.1, 0.2, 0.05, -0.15, 0.4], 2);
        let gain = solve_gain(
            &(DMatrix::identity(2, 2) * 10.0),
            &DMatrix::from_partial_diagonal(2, 2, &[5.0, 4.5]),
        )
        .unwrap();
        let x_hat = DVector::from_vec(vec![0.9, -0.2]);
        let anchor = DVector::from_vec(vec![0.5, 0.1]);
        let state = EstimatorState::new(x_hat.clone(), anchor.clone(), theta, iv, gain).unwrap();

        let t = 0.3;
        let x = iv.to_canonical(t);
        let basis = [1.0, x, 2.0 * x * x - 1.0];
        let mut expected = DVector::zeros(2);
        let coeffs = [[0.3, -0.1], [0.2, 0.05], [-0.15, 0.4]];
        for j in 0..2 {
            for i in 0..3 {
                expected[j] += coeffs[i][j] * basis[i];
            }
        }
        let k = DMatrix::from_partial_diagonal(2, 2, &[-0.25, -0.225]);
        expected -= &k * (&anchor - &x_hat);

        let rhs = estimator_rhs(&state, t).unwrap();
        assert!((rhs - expected).norm() <= 1e-14);
    }

    #[test]
    fn rhs_rejects_times_outside_the_window() {
        let iv = Interval::new(0.0, 0.2).unwrap();
        let state = EstimatorState::new(
            DVector::zeros(1),
            DVector::zeros(1),
            coefficient_set(&[1.0], 1),
            iv,
            solve_gain(&DMatrix::identity(1, 1), &(DMatrix::identity(1, 1) * 4.0)).unwrap(),
        )
        .unwrap();
        assert!(estimator_rhs(&state, 0.5).is_err());
    }

    #[test]
    fn advance_resets_to_the_measurement() {
        let iv = Interval::new(0.0, 0.2).unwrap();
        let next = Interval::new(0.2, 0.4).unwrap();
        let state = EstimatorState::new(
            DVector::from_vec(vec![5.0]),
            DVector::from_vec(vec![0.0]),
            coefficient_set(&[1.0], 1),
            iv,
            solve_gain(&DMatrix::identity(1, 1), &(DMatrix::identity(1, 1) * 4.0)).unwrap(),
        )
        .unwrap();
        let measured = DVector::from_vec(vec![0.42]);
        let advanced =
            advance_window(state, coefficient_set(&[2.0], 1), next, &measured).unwrap();
        assert_eq!(advanced.x_hat, measured);
        assert_eq!(advanced.anchor_state, measured);
        assert_eq!(advanced.t, 0.2);

        // Advancing again with the same measurement is idempotent on x_hat.
        let again = advance_window(
            advanced,
            coefficient_set(&[2.0], 1),
            Interval::new(0.4, 0.6).unwrap(),
            &measured,
        )
        .unwrap();
        assert_eq!(again.x_hat, measured);
    }

    #[test]
    fn advance_rejects_non_adjacent_windows() {
        let iv = Interval::new(0.0, 0.2).unwrap();
        let state = EstimatorState::new(
            DVector::zeros(1),
            DVector::zeros(1),
            coefficient_set(&[1.0], 1),
            iv,
            solve_gain(&DMatrix::identity(1, 1), &(DMatrix::identity(1, 1) * 4.0)).unwrap(),
        )
        .unwrap();
        let gap = Interval::new(0.5, 0.7).unwrap();
        assert!(matches!(
            advance_window(state, coefficient_set(&[1.0], 1), gap, &DVector::zeros(1)),
            Err(Error::MismatchedWindows { .. })
        ));
    }

    #[test]
    fn zero_dynamics_and_gain_give_a_constant_trajectory() {
        let iv = Interval::new(0.0, 0.2).unwrap();
        // K cannot be zero by construction, but with x_hat at the anchor the
        // correction vanishes identically along the trajectory.
        let mut state = EstimatorState::new(
            DVector::from_vec(vec![1.5]),
            DVector::from_vec(vec![1.5]),
            coefficient_set(&[0.0, 0.0, 0.0], 1),
            iv,
            solve_gain(&DMatrix::identity(1, 1), &(DMatrix::identity(1, 1) * 4.0)).unwrap(),
        )
        .unwrap();
        let samples = integrate_window(&mut state, 0.001).unwrap();
        assert_eq!(samples.len(), 201);
        for (_, x) in &samples {
            assert_abs_diff_eq!(x[0], 1.5, epsilon = 1e-14);
        }
        assert_eq!(state.t, 0.2);
    }

    #[test]
    fn constant_feedforward_integrates_linearly() {
        let iv = Interval::new(0.0, 0.2).unwrap();
        let mut state = EstimatorState::new(
            DVector::from_vec(vec![2.0]),
            DVector::from_vec(vec![2.0]),
            coefficient_set(&[0.7], 1),
            iv,
            solve_gain(&DMatrix::identity(1, 1), &(DMatrix::identity(1, 1) * 4.0)).unwrap(),
        )
        .unwrap();
        // With x_hat(0) = anchor the correction stays small but nonzero as the
        // state moves; shrink its influence with a short horizon instead:
        // check the first step only against x0 + c t.
        let samples = integrate_window(&mut state, 0.001).unwrap();
        let (t1, x1) = &samples[1];
        // One RK4 step of x' = 0.7 - K(anchor - x) with x(0) = anchor:
        // the correction contributes at second order in t.
        let expected = 2.0 + 0.7 * t1;
        assert!((x1[0] - expected).abs() <= 1e-5);
    }

    #[test]
    fn integration_is_fourth_order() {
        // Reference problem with a smooth closed form: x' = theta(t) - K(a - x)
        // with scalar K = -2, anchor 0, theta constant 1 gives
        // x' = 1 - 2 x, x(0) = 0 -> x(t) = (1 - exp(-2 t)) / 2.
        let iv = Interval::new(0.0, 1.0).unwrap();
        let gain = solve_gain(&DMatrix::identity(1, 1), &(DMatrix::identity(1, 1) * 4.0)).unwrap();
        let run = |step: f64| {
            let mut state = EstimatorState::new(
                DVector::from_vec(vec![0.0]),
                DVector::from_vec(vec![0.0]),
                coefficient_set(&[1.0], 1),
                iv,
                gain.clone(),
            )
            .unwrap();
            integrate_window(&mut state, step).unwrap();
            state.x_hat[0]
        };
        let exact = (1.0 - (-2.0f64).exp()) / 2.0;
        let coarse = (run(0.1) - exact).abs();
        let fine = (run(0.05) - exact).abs();
        let ratio = coarse / fine;
        assert!(
            (12.0..=20.0).contains(&ratio),
            "step halving gave ratio {ratio}"
        );
    }

    #[test]
    fn error_decays_when_the_model_is_exact() {
        // True dynamics equal the feedforward polynomial; start the estimate
        // off the true state and check the error stays bounded by its initial
        // value scaled by the window growth factor.
        let iv = Interval::new(0.0, 0.2).unwrap();
        let theta = coefficient_set(&[0.4, 0.3, -0.2], 1);
        let gain = solve_gain(
            &(DMatrix::identity(1, 1) * 10.0),
            &(DMatrix::identity(1, 1) * 5.0),
        )
        .unwrap();

        // True trajectory: x' = theta(t), anchored at the true start 0.3.
        let truth_at = |t: f64| {
            let mut x = 0.3;
            let n = 2000;
            let h = (t - 0.0) / n as f64;
            for i in 0..n {
                let tm = 0.0 + h * (i as f64 + 0.5);
                let b = crate::identifier::predict_dynamics(&theta, &iv, tm).unwrap()[0];
                x += h * b;
            }
            x
        };

        let mut state = EstimatorState::new(
            DVector::from_vec(vec![0.8]),
            DVector::from_vec(vec![0.3]),
            theta.clone(),
            iv,
            gain,
        )
        .unwrap();
        let samples = integrate_window(&mut state, 0.001).unwrap();
        let initial_error = (0.8f64 - 0.3).abs();
        // K = -0.25, so the comparison system allows growth by at most
        // exp(|K| tau) plus the anchor-drift contribution.
        let growth = (0.25f64 * 0.2).exp();
        let drift: f64 = 0.25 * 0.2 * 0.12; // |K| tau max|x - anchor| scale
        for (t, x) in &samples {
            let err = (x[0] - truth_at(*t)).abs();
            assert!(
                err <= initial_error * growth + drift + 1e-6,
                "error {err} at t = {t}"
            );
        }
    }
}
