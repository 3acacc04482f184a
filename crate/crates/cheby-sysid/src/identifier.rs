//! Per-window batch least squares for the basis coefficients and the
//! cross-window continuity solve.
//!
//! The fit produces `eta^w` from the window's node derivatives; the
//! continuity solve re-expresses the previous window's polynomial in the new
//! window's shifted basis by matching the value and all derivatives up to the
//! polynomial order at the transition time, which removes the one-window
//! delay the raw coefficients would otherwise carry.

use nalgebra::{DMatrix, DVector};

use crate::cheb::{self, BasisEval, Interval};
use crate::window::WindowRecord;
use crate::{Error, Result};

/// Which estimate a coefficient matrix holds: the raw per-window fit or the
/// continuity-updated set the estimator integrates with.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoefficientKind {
    Eta,
    Theta,
}

/// Coefficients of one window, one column per state dimension.
#[derive(Clone, Debug)]
pub struct CoefficientSet {
    pub window_index: usize,
    pub kind: CoefficientKind,
    /// `(M + 1) x N_P`; row `i` weights the `i`-th basis polynomial.
    pub matrix: DMatrix<f64>,
}

impl CoefficientSet {
    pub fn new(window_index: usize, kind: CoefficientKind, matrix: DMatrix<f64>) -> Self {
        assert!(matrix.nrows() >= 1, "coefficient matrix cannot be empty");
        CoefficientSet {
            window_index,
            kind,
            matrix,
        }
    }

    /// Polynomial order `M`; the matrix has `M + 1` rows.
    pub fn order(&self) -> usize {
        self.matrix.nrows() - 1
    }

    pub fn state_dim(&self) -> usize {
        self.matrix.ncols()
    }
}

/// Ridge term and prior for the regularized fit. With `r0 = 0` the fit falls
/// back to the square interpolation system and the prior is ignored.
#[derive(Clone, Debug)]
pub struct RegularizerConfig {
    pub r0: DMatrix<f64>,
    pub eta0: DMatrix<f64>,
}

impl RegularizerConfig {
    pub fn new(r0: DMatrix<f64>, eta0: DMatrix<f64>) -> Result<Self> {
        if r0.nrows() != r0.ncols() {
            return Err(Error::DimensionMismatch {
                context: "regularizer r0 must be square",
                expected: r0.nrows(),
                found: r0.ncols(),
            });
        }
        if eta0.nrows() != r0.nrows() {
            return Err(Error::DimensionMismatch {
                context: "regularizer prior rows",
                expected: r0.nrows(),
                found: eta0.nrows(),
            });
        }
        let scale = r0.amax().max(1.0);
        if (&r0 - r0.transpose()).amax() > 1e-12 * scale {
            return Err(Error::NotPositiveDefinite { name: "r0" });
        }
        let min_eig = r0
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -1e-12 * scale {
            return Err(Error::NotPositiveDefinite { name: "r0" });
        }
        Ok(RegularizerConfig { r0, eta0 })
    }

    /// `lambda I` with a zero prior.
    pub fn ridge(lambda: f64, order: usize, state_dim: usize) -> Self {
        RegularizerConfig {
            r0: DMatrix::identity(order + 1, order + 1) * lambda,
            eta0: DMatrix::zeros(order + 1, state_dim),
        }
    }

    /// No regularization: the square node system must be invertible.
    pub fn none(order: usize, state_dim: usize) -> Self {
        RegularizerConfig {
            r0: DMatrix::zeros(order + 1, order + 1),
            eta0: DMatrix::zeros(order + 1, state_dim),
        }
    }
}

/// Regularized least-squares estimate of the window coefficients:
/// `eta^w = (T T' + R0)^-1 (R0 eta0 + T Xdot)` with `T` the matrix of basis
/// vectors at the node times (one column per node).
///
/// With a positive definite system the solve goes through a Cholesky
/// factorization; an exactly zero `R0` switches to a QR solve of the square
/// interpolation system so the prior never enters.
pub fn fit_window(record: &WindowRecord, reg: &RegularizerConfig) -> Result<CoefficientSet> {
    let order = record.order;
    let state_dim = record.derivative_estimates.ncols();
    if reg.r0.nrows() != order + 1 {
        return Err(Error::DimensionMismatch {
            context: "regularizer size",
            expected: order + 1,
            found: reg.r0.nrows(),
        });
    }
    if reg.eta0.ncols() != state_dim {
        return Err(Error::DimensionMismatch {
            context: "regularizer prior columns",
            expected: state_dim,
            found: reg.eta0.ncols(),
        });
    }

    let basis = BasisEval::at_points(&record.interval, order, 0, &record.node_times)?;
    let t = basis.values; // (M+1) x (M+1), columns are basis vectors per node

    let matrix = if reg.r0.amax() == 0.0 {
        // Square interpolation system T' eta = Xdot.
        let qr = t.transpose().qr();
        let r = qr.r();
        let cond_ok = (0..=order).all(|i| r[(i, i)].abs() > 1e-12 * r.amax());
        if !cond_ok {
            return Err(Error::SingularSystem);
        }
        let qty = qr.q().transpose() * &record.derivative_estimates;
        r.solve_upper_triangular(&qty)
            .ok_or(Error::SingularSystem)?
    } else {
        let normal = &t * t.transpose() + &reg.r0;
        let rhs = &reg.r0 * &reg.eta0 + &t * &record.derivative_estimates;
        let chol = normal.cholesky().ok_or(Error::SingularSystem)?;
        chol.solve(&rhs)
    };

    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem);
    }
    Ok(CoefficientSet::new(
        record.index,
        CoefficientKind::Eta,
        matrix,
    ))
}

/// Upper-triangular matrix of the continuity system on the new window: entry
/// `(p, i)` is the `p`-th time derivative of the `i`-th shifted basis
/// polynomial at the window's left endpoint (canonical `x = -1`). Entries
/// with `i < p` vanish and the diagonal never does, so the system is solvable
/// by back-substitution.
pub fn continuity_matrix(iv_new: &Interval, order: usize) -> DMatrix<f64> {
    let table = cheb::derivative_table(-1.0, order, order);
    let mut u = DMatrix::zeros(order + 1, order + 1);
    for (p, row) in table.iter().enumerate() {
        let scale = (2.0 / iv_new.width()).powi(p as i32);
        for (i, v) in row.iter().enumerate() {
            u[(p, i)] = scale * v;
        }
    }
    u
}

/// Re-express the previous window's polynomial on the adjacent equal-width
/// window: solve for `theta^w` so that every derivative up to the polynomial
/// order matches at the transition time. Matching all `M + 1` derivatives of
/// a degree-`M` polynomial forces polynomial identity, so `theta` is the
/// exact analytic continuation of `eta_prev`'s polynomial.
pub fn solve_theta(
    eta_prev: &CoefficientSet,
    iv_prev: &Interval,
    iv_new: &Interval,
) -> Result<CoefficientSet> {
    let width = iv_prev.width();
    if (iv_new.width() - width).abs() > 1e-12 * width.max(iv_new.width()) {
        return Err(Error::MismatchedWindows {
            detail: format!(
                "window widths differ: {} vs {}",
                width,
                iv_new.width()
            ),
        });
    }
    if (iv_prev.end() - iv_new.start()).abs() > 1e-9 * width {
        return Err(Error::MismatchedWindows {
            detail: format!(
                "windows are not adjacent: previous ends at {}, next starts at {}",
                iv_prev.end(),
                iv_new.start()
            ),
        });
    }

    let order = eta_prev.order();
    let state_dim = eta_prev.state_dim();
    let u = continuity_matrix(iv_new, order);

    // Derivatives of the previous window's polynomial at its right endpoint
    // (canonical x = +1).
    let table = cheb::derivative_table(1.0, order, order);
    let mut rhs = DMatrix::zeros(order + 1, state_dim);
    for (p, row) in table.iter().enumerate() {
        let scale = (2.0 / width).powi(p as i32);
        for j in 0..state_dim {
            let mut acc = 0.0;
            for (i, v) in row.iter().enumerate() {
                acc += v * eta_prev.matrix[(i, j)];
            }
            rhs[(p, j)] = scale * acc;
        }
    }

    let mut theta = DMatrix::zeros(order + 1, state_dim);
    for j in 0..state_dim {
        for p in (0..=order).rev() {
            let mut acc = rhs[(p, j)];
            for i in p + 1..=order {
                acc -= u[(p, i)] * theta[(i, j)];
            }
            theta[(p, j)] = acc / u[(p, p)];
        }
    }

    Ok(CoefficientSet::new(
        eta_prev.window_index + 1,
        CoefficientKind::Theta,
        theta,
    ))
}

/// Evaluate the identified dynamics `coeffs' T(t)` at a time inside the
/// window.
pub fn predict_dynamics(coeffs: &CoefficientSet, iv: &Interval, t: f64) -> Result<DVector<f64>> {
    let basis = cheb::eval_shifted_basis(t, iv, coeffs.order(), 0)?;
    Ok(apply(coeffs, &basis))
}

/// As [`predict_dynamics`] but evaluating the window's polynomial outside the
/// window on purpose.
pub fn predict_dynamics_extrapolated(
    coeffs: &CoefficientSet,
    iv: &Interval,
    t: f64,
) -> DVector<f64> {
    let basis = cheb::eval_shifted_basis_extrapolated(t, iv, coeffs.order(), 0);
    apply(coeffs, &basis)
}

fn apply(coeffs: &CoefficientSet, basis: &[f64]) -> DVector<f64> {
    let mut out = DVector::zeros(coeffs.state_dim());
    for j in 0..coeffs.state_dim() {
        let mut acc = 0.0;
        for (i, b) in basis.iter().enumerate() {
            acc += coeffs.matrix[(i, j)] * b;
        }
        out[j] = acc;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::window::{build_window_record, FnOracle, WindowConfig};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn record_from_derivatives(
        iv: Interval,
        order: usize,
        derivative_of: impl Fn(f64) -> Vec<f64>,
        state_dim: usize,
    ) -> WindowRecord {
        let node_times = crate::window::time_nodes(&iv, order);
        let rows = order + 1;
        let mut derivative_estimates = DMatrix::zeros(rows, state_dim);
        for (k, &t) in node_times.iter().enumerate() {
            let d = derivative_of(t);
            for j in 0..state_dim {
                derivative_estimates[(k, j)] = d[j];
            }
        }
        WindowRecord {
            index: 1,
            interval: iv,
            order,
            node_times,
            sampled_states: DMatrix::zeros(rows, state_dim),
            sampled_states_lagged: DMatrix::zeros(rows, state_dim),
            derivative_estimates,
            window_start_state: DVector::zeros(state_dim),
        }
    }

    #[test]
    fn fit_recovers_known_coefficients() {
        let iv = Interval::new(0.4, 0.6).unwrap();
        let order = 3;
        let truth = DMatrix::from_row_slice(4, 2, &[0.3, -1.0, 1.2, 0.4, -0.7, 0.0, 0.05, 0.9]);
        let truth_set = CoefficientSet::new(1, CoefficientKind::Eta, truth.clone());
        let record = record_from_derivatives(
            iv,
            order,
            |t| predict_dynamics(&truth_set, &iv, t).unwrap().iter().cloned().collect(),
            2,
        );
        let reg = RegularizerConfig::ridge(1e-8, order, 2);
        let eta = fit_window(&record, &reg).unwrap();
        for (a, b) in eta.matrix.iter().zip(truth.iter()) {
            assert!((a - b).abs() <= 1e-5);
        }
    }

    #[test]
    fn fit_of_zero_derivatives_is_zero() {
        let iv = Interval::new(0.0, 0.2).unwrap();
        let record = record_from_derivatives(iv, 2, |_| vec![0.0], 1);
        let reg = RegularizerConfig::ridge(1e-8, 2, 1);
        let eta = fit_window(&record, &reg).unwrap();
        assert!(eta.matrix.iter().all(|v| v.abs() <= 1e-14));
    }

    #[test]
    fn overwhelming_prior_dominates_the_fit() {
        let iv = Interval::new(0.0, 0.2).unwrap();
        let record = record_from_derivatives(iv, 2, |t| vec![t.sin()], 1);
        let eta0 = DMatrix::from_row_slice(3, 1, &[1.5, -2.5, 0.25]);
        let reg =
            RegularizerConfig::new(DMatrix::identity(3, 3) * 1e12, eta0.clone()).unwrap();
        let eta = fit_window(&record, &reg).unwrap();
        for (a, b) in eta.matrix.iter().zip(eta0.iter()) {
            assert!((a - b).abs() <= 1e-6);
        }
    }

    #[test]
    fn zero_regularizer_interpolates_the_nodes() {
        let iv = Interval::new(1.0, 1.2).unwrap();
        let order = 4;
        let record = record_from_derivatives(iv, order, |t| vec![(3.0 * t).sin()], 1);
        let reg = RegularizerConfig::none(order, 1);
        let eta = fit_window(&record, &reg).unwrap();
        for (k, &t) in record.node_times.iter().enumerate() {
            let predicted = predict_dynamics(&eta, &iv, t).unwrap()[0];
            assert_abs_diff_eq!(
                predicted,
                record.derivative_estimates[(k, 0)],
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn fit_is_bounded_by_the_regularizer_estimate() {
        // With R0 = r I the solution norm is controlled by the data and the
        // prior; exercised on random bounded inputs.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let iv = Interval::new(0.0, 0.2).unwrap();
        for _ in 0..20 {
            let order = rng.random_range(2..=6usize);
            let data: Vec<f64> = (0..=order).map(|_| rng.random_range(-1.0..1.0)).collect();
            let node_times = crate::window::time_nodes(&iv, order);
            let record = WindowRecord {
                index: 1,
                interval: iv,
                order,
                node_times,
                sampled_states: DMatrix::zeros(order + 1, 1),
                sampled_states_lagged: DMatrix::zeros(order + 1, 1),
                derivative_estimates: DMatrix::from_column_slice(order + 1, 1, &data),
                window_start_state: DVector::zeros(1),
            };
            let r = 0.5;
            let reg = RegularizerConfig::new(
                DMatrix::identity(order + 1, order + 1) * r,
                DMatrix::zeros(order + 1, 1),
            )
            .unwrap();
            let eta = fit_window(&record, &reg).unwrap();
            let basis = BasisEval::at_points(&iv, order, 0, &record.node_times).unwrap();
            let bound = (1.0 / r)
                * basis.values.norm()
                * record.derivative_estimates.norm();
            assert!(eta.matrix.norm() <= bound + 1e-9);
        }
    }

    #[test]
    fn regularizer_rejects_asymmetric_or_indefinite_matrices() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.5, 1.0]);
        assert!(RegularizerConfig::new(bad, DMatrix::zeros(2, 1)).is_err());
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(RegularizerConfig::new(indefinite, DMatrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn continuity_matrix_low_order_closed_form() {
        let tau = 0.2;
        let iv = Interval::new(0.0, tau).unwrap();
        let u = continuity_matrix(&iv, 1);
        assert_abs_diff_eq!(u[(0, 0)], 1.0);
        assert_abs_diff_eq!(u[(0, 1)], -1.0);
        assert_abs_diff_eq!(u[(1, 0)], 0.0);
        assert_abs_diff_eq!(u[(1, 1)], 2.0 / tau, epsilon = 1e-12);
    }

    #[test]
    fn continuity_matrix_diagonal_never_vanishes() {
        let iv = Interval::new(2.0, 2.2).unwrap();
        for order in 0..=10 {
            let u = continuity_matrix(&iv, order);
            for p in 0..=order {
                assert!(u[(p, p)].abs() > 0.0, "diagonal vanished at p = {p}");
                for i in 0..p {
                    assert_eq!(u[(p, i)], 0.0);
                }
            }
        }
    }

    #[test]
    fn continuity_matrix_matches_finite_differences() {
        let iv = Interval::new(0.3, 0.55).unwrap();
        let order = 4;
        let u = continuity_matrix(&iv, order);
        let h = 1e-4 * iv.width();
        // One-sided stencils at the left endpoint for p = 1 and 2.
        let b0 = cheb::eval_shifted_basis(iv.start(), &iv, order, 0).unwrap();
        let b1 = cheb::eval_shifted_basis(iv.start() + h, &iv, order, 0).unwrap();
        let b2 = cheb::eval_shifted_basis(iv.start() + 2.0 * h, &iv, order, 0).unwrap();
        let b3 = cheb::eval_shifted_basis(iv.start() + 3.0 * h, &iv, order, 0).unwrap();
        for i in 0..=order {
            let d1 = (-1.5 * b0[i] + 2.0 * b1[i] - 0.5 * b2[i]) / h;
            let d2 = (2.0 * b0[i] - 5.0 * b1[i] + 4.0 * b2[i] - b3[i]) / (h * h);
            assert!((u[(1, i)] - d1).abs() <= 1e-5 * u[(1, i)].abs().max(1.0));
            assert!((u[(2, i)] - d2).abs() <= 1e-5 * u[(2, i)].abs().max(1.0));
        }
    }

    #[test]
    fn theta_for_order_zero_copies_the_value() {
        let eta = CoefficientSet::new(1, CoefficientKind::Eta, DMatrix::from_element(1, 1, 0.7));
        let prev = Interval::new(0.0, 0.2).unwrap();
        let next = Interval::new(0.2, 0.4).unwrap();
        let theta = solve_theta(&eta, &prev, &next).unwrap();
        assert_abs_diff_eq!(theta.matrix[(0, 0)], 0.7);
        assert_eq!(theta.kind, CoefficientKind::Theta);
        assert_eq!(theta.window_index, 2);
    }

    #[test]
    fn theta_for_order_one_matches_the_hand_solution() {
        // With T_1(+-1) = +-1 and matching slopes, theta_1 = eta_1 and
        // theta_0 = eta_0 + 2 eta_1.
        let eta = CoefficientSet::new(
            3,
            CoefficientKind::Eta,
            DMatrix::from_row_slice(2, 2, &[0.4, -1.0, 0.25, 0.5]),
        );
        let prev = Interval::new(0.4, 0.6).unwrap();
        let next = Interval::new(0.6, 0.8).unwrap();
        let theta = solve_theta(&eta, &prev, &next).unwrap();
        assert_abs_diff_eq!(theta.matrix[(1, 0)], 0.25, epsilon = 1e-14);
        assert_abs_diff_eq!(theta.matrix[(0, 0)], 0.4 + 2.0 * 0.25, epsilon = 1e-14);
        assert_abs_diff_eq!(theta.matrix[(1, 1)], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(theta.matrix[(0, 1)], -1.0 + 2.0 * 0.5, epsilon = 1e-14);
    }

    /// Condition scale of evaluating `coeffs' T(t)`: the sum of the term
    /// magnitudes. Far outside a window the basis values explode and the
    /// terms cancel, so agreement can only be expected relative to this
    /// scale, not to the (small) result.
    fn evaluation_scale(coeffs: &CoefficientSet, iv: &Interval, t: f64) -> f64 {
        let basis = cheb::eval_shifted_basis_extrapolated(t, iv, coeffs.order(), 0);
        let mut scale = 0.0f64;
        for j in 0..coeffs.state_dim() {
            for (i, b) in basis.iter().enumerate() {
                scale += (coeffs.matrix[(i, j)] * b).abs();
            }
        }
        scale
    }

    #[test]
    fn theta_is_the_analytic_continuation() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for order in 0..=8usize {
            let matrix = DMatrix::from_fn(order + 1, 2, |_, _| rng.random_range(-1.0..1.0));
            let eta = CoefficientSet::new(5, CoefficientKind::Eta, matrix);
            let prev = Interval::new(0.8, 1.0).unwrap();
            let next = Interval::new(1.0, 1.2).unwrap();
            let theta = solve_theta(&eta, &prev, &next).unwrap();
            for k in 0..=100 {
                let t = 0.8 + 0.4 * (k as f64) / 100.0;
                let from_eta = predict_dynamics_extrapolated(&eta, &prev, t);
                let from_theta = predict_dynamics_extrapolated(&theta, &next, t);
                let scale = 1.0
                    + evaluation_scale(&eta, &prev, t)
                    + evaluation_scale(&theta, &next, t);
                assert!(
                    (from_eta - from_theta).norm() <= 1e-10 * scale,
                    "order {order} diverged at t = {t}"
                );
            }
        }
    }

    #[test]
    fn triangular_residual_is_at_rounding_level() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for order in 1..=8usize {
            let matrix = DMatrix::from_fn(order + 1, 3, |_, _| rng.random_range(-1.0..1.0));
            let eta = CoefficientSet::new(2, CoefficientKind::Eta, matrix);
            let prev = Interval::new(0.0, 0.2).unwrap();
            let next = Interval::new(0.2, 0.4).unwrap();
            let theta = solve_theta(&eta, &prev, &next).unwrap();
            let u = continuity_matrix(&next, order);
            let table = cheb::derivative_table(1.0, order, order);
            for j in 0..3 {
                for p in 0..=order {
                    let scale = (2.0 / 0.2f64).powi(p as i32);
                    let rhs: f64 = (0..=order)
                        .map(|i| scale * table[p][i] * eta.matrix[(i, j)])
                        .sum();
                    let lhs: f64 = (0..=order)
                        .map(|i| u[(p, i)] * theta.matrix[(i, j)])
                        .sum();
                    // Residual relative to the row's term magnitudes, the
                    // scale back-substitution can actually deliver.
                    let row_scale: f64 = (0..=order)
                        .map(|i| (u[(p, i)] * theta.matrix[(i, j)]).abs())
                        .sum::<f64>()
                        .max(rhs.abs())
                        .max(1.0);
                    assert!(
                        (lhs - rhs).abs() <= 1e-12 * row_scale,
                        "residual at p = {p}"
                    );
                }
            }
        }
    }

    #[test]
    fn raw_coefficients_carry_a_one_window_delay() {
        // Evaluating the previous coefficients in the new window's basis
        // reproduces the previous window's values shifted by tau; this is the
        // defect the continuity solve removes.
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let matrix = DMatrix::from_fn(5, 2, |_, _| rng.random_range(-1.0..1.0));
        let eta = CoefficientSet::new(7, CoefficientKind::Eta, matrix);
        let tau = 0.2;
        let prev = Interval::new(1.2, 1.2 + tau).unwrap();
        let next = Interval::new(1.2 + tau, 1.2 + 2.0 * tau).unwrap();
        for k in 0..=50 {
            let t_bar = next.start() + tau * (k as f64) / 50.0;
            let delayed = predict_dynamics_extrapolated(&eta, &next, t_bar);
            let original = predict_dynamics_extrapolated(&eta, &prev, t_bar - tau);
            assert!((delayed - original).norm() <= 1e-12);
        }
    }

    #[test]
    fn theta_matches_eta_at_the_transition() {
        let eta = CoefficientSet::new(
            1,
            CoefficientKind::Eta,
            DMatrix::from_row_slice(3, 1, &[0.3, -0.2, 0.15]),
        );
        let prev = Interval::new(0.0, 0.2).unwrap();
        let next = Interval::new(0.2, 0.4).unwrap();
        let theta = solve_theta(&eta, &prev, &next).unwrap();
        let at_boundary_theta = predict_dynamics(&theta, &next, 0.2).unwrap();
        let at_boundary_eta = predict_dynamics(&eta, &prev, 0.2).unwrap();
        assert_abs_diff_eq!(
            at_boundary_theta[0],
            at_boundary_eta[0],
            epsilon = 1e-13
        );
    }

    #[test]
    fn predict_against_a_monomial_expansion() {
        // T_0 + 0.5 T_1 - 0.25 T_3 expanded in monomials of the canonical
        // variable: 1 + 0.5 x - 0.25 (4 x^3 - 3 x).
        let coeffs = CoefficientSet::new(
            1,
            CoefficientKind::Eta,
            DMatrix::from_row_slice(4, 1, &[1.0, 0.5, 0.0, -0.25]),
        );
        let iv = Interval::new(-2.0, 6.0).unwrap();
        for &t in &[-2.0, -0.5, 1.3, 3.7, 6.0] {
            let x = iv.to_canonical(t);
            let expected = 1.0 + 0.5 * x - 0.25 * (4.0 * x * x * x - 3.0 * x);
            let got = predict_dynamics(&coeffs, &iv, t).unwrap()[0];
            assert_abs_diff_eq!(got, expected, epsilon = 1e-13);
        }
    }

    #[test]
    fn zero_coefficients_predict_zero() {
        let coeffs = CoefficientSet::new(1, CoefficientKind::Theta, DMatrix::zeros(4, 3));
        let iv = Interval::new(0.0, 1.0).unwrap();
        let out = predict_dynamics(&coeffs, &iv, 0.5).unwrap();
        assert_eq!(out, DVector::zeros(3));
    }

    #[test]
    fn prediction_outside_the_window_requires_the_explicit_variant() {
        let coeffs = CoefficientSet::new(
            1,
            CoefficientKind::Eta,
            DMatrix::from_element(3, 1, 1.0),
        );
        let iv = Interval::new(0.0, 1.0).unwrap();
        assert!(matches!(
            predict_dynamics(&coeffs, &iv, 1.5),
            Err(Error::OutsideInterval { .. })
        ));
        let _ = predict_dynamics_extrapolated(&coeffs, &iv, 1.5);
    }

    #[test]
    fn mismatched_windows_are_rejected() {
        let eta = CoefficientSet::new(1, CoefficientKind::Eta, DMatrix::zeros(3, 1));
        let prev = Interval::new(0.0, 0.2).unwrap();
        let gap = Interval::new(0.3, 0.5).unwrap();
        assert!(matches!(
            solve_theta(&eta, &prev, &gap),
            Err(Error::MismatchedWindows { .. })
        ));
        let wider = Interval::new(0.2, 0.5).unwrap();
        assert!(matches!(
            solve_theta(&eta, &prev, &wider),
            Err(Error::MismatchedWindows { .. })
        ));
    }

    #[test]
    fn fit_window_from_real_sensor_data() {
        // End to end through the sensor: cubic state, so the derivative is a
        // quadratic the order-2 basis represents exactly up to the backward
        // difference bias.
        let config = WindowConfig::new(0.2, 1e-5, 2, 2, 16).unwrap();
        let oracle = FnOracle {
            dim: 1,
            span: (0.0, 1.0),
            f: Box::new(|t| DVector::from_vec(vec![t * t * t])),
        };
        let record = build_window_record(2, &config, 2, &oracle).unwrap();
        let reg = RegularizerConfig::ridge(1e-10, 2, 1);
        let eta = fit_window(&record, &reg).unwrap();
        for k in 0..=20 {
            let t = 0.2 + 0.2 * (k as f64) / 20.0;
            let got = predict_dynamics(&eta, &record.interval, t).unwrap()[0];
            assert!((got - 3.0 * t * t).abs() <= 1e-3);
        }
    }
}
