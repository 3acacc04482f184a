//! First-kind Chebyshev polynomials: recurrence evaluation, derivatives of any
//! order, canonical and shifted nodes, offline least-squares fits, and the
//! minimax interpolation error bound.
//!
//! The canonical domain is `[-1, 1]`; [`Interval`] carries the affine map to
//! and from an arbitrary `[a, b]`. All evaluators accept points up to
//! [`DOMAIN_TOL`] outside the canonical domain so that shifted endpoints
//! survive the rounding of the affine map.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Absolute slack allowed on `|x| <= 1` when evaluating the basis. Absorbs
/// rounding introduced by the affine interval map, so that evaluating at a
/// shifted interval endpoint never raises a domain error.
pub const DOMAIN_TOL: f64 = 1e-12;

/// A finite interval `[a, b]` with `a < b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    a: f64,
    b: f64,
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() || a >= b {
            return Err(Error::InvalidInterval { a, b });
        }
        Ok(Interval { a, b })
    }

    pub fn start(&self) -> f64 {
        self.a
    }

    pub fn end(&self) -> f64 {
        self.b
    }

    pub fn width(&self) -> f64 {
        self.b - self.a
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.a + self.b)
    }

    /// Map `t` in `[a, b]` to the canonical domain `[-1, 1]`.
    pub fn to_canonical(&self, t: f64) -> f64 {
        (2.0 * t - (self.a + self.b)) / (self.b - self.a)
    }

    /// Map canonical `x` in `[-1, 1]` to `[a, b]`.
    pub fn from_canonical(&self, x: f64) -> f64 {
        0.5 * ((self.a + self.b) + (self.b - self.a) * x)
    }

    /// Containment test with the canonical-domain slack.
    pub fn contains(&self, t: f64) -> bool {
        self.to_canonical(t).abs() <= 1.0 + DOMAIN_TOL
    }
}

fn check_canonical(x: f64) -> Result<()> {
    if !x.is_finite() || x.abs() > 1.0 + DOMAIN_TOL {
        return Err(Error::OutsideCanonicalDomain { x });
    }
    Ok(())
}

/// Evaluate `[T_0(x), ..., T_M(x)]` by the three-term recurrence.
pub fn eval_basis(x: f64, degree: usize) -> Result<Vec<f64>> {
    check_canonical(x)?;
    Ok(basis_unchecked(x, degree))
}

fn basis_unchecked(x: f64, degree: usize) -> Vec<f64> {
    let mut values = vec![0.0; degree + 1];
    values[0] = 1.0;
    if degree >= 1 {
        values[1] = x;
    }
    for i in 2..=degree {
        values[i] = 2.0 * x * values[i - 1] - values[i - 2];
    }
    values
}

/// Evaluate `[d^p T_0/dx^p, ..., d^p T_M/dx^p]` at `x` for `p >= 1`.
///
/// The three-term recurrence is differentiated `p` times in place (Leibniz on
/// the `2x T_{i-1}` term), giving one algorithm valid on the whole domain; the
/// closed forms at `x = +-1` are used as test oracles only.
pub fn eval_basis_derivative(x: f64, degree: usize, order: usize) -> Result<Vec<f64>> {
    assert!(order >= 1, "derivative order must be at least 1");
    check_canonical(x)?;
    Ok(derivative_table(x, degree, order).pop().unwrap())
}

/// Rows `q = 0..=order` of `d^q T_i/dx^q` at `x`, each row of length
/// `degree + 1`. Entries with `i < q` are exactly zero.
pub(crate) fn derivative_table(x: f64, degree: usize, order: usize) -> Vec<Vec<f64>> {
    let mut table = Vec::with_capacity(order + 1);
    table.push(basis_unchecked(x, degree));
    for q in 1..=order {
        let mut row = vec![0.0; degree + 1];
        if degree >= 1 && q == 1 {
            row[1] = 1.0;
        }
        for i in 2..=degree {
            row[i] = 2.0 * x * row[i - 1] + 2.0 * (q as f64) * table[q - 1][i - 1] - row[i - 2];
        }
        table.push(row);
    }
    table
}

/// The `N` roots of `T_N`, `x_k = cos((k - 0.5) pi / N)` for `k = 1..=N`,
/// in the strictly decreasing order of the defining formula.
pub fn chebyshev_nodes(n: usize) -> Vec<f64> {
    assert!(n >= 1, "node count must be at least 1");
    (1..=n)
        .map(|k| (((k as f64) - 0.5) * std::f64::consts::PI / (n as f64)).cos())
        .collect()
}

/// Affine image of canonical `x` on the interval.
pub fn shift_point(x: f64, iv: &Interval) -> Result<f64> {
    check_canonical(x)?;
    Ok(iv.from_canonical(x))
}

/// Shifted basis values (or `p`-th derivatives) at time `t` on `iv`.
///
/// For `p >= 1` the chain rule contributes a factor `(2 / (b - a))^p`.
/// `t` must lie inside `iv` (up to [`DOMAIN_TOL`] in canonical coordinates);
/// use [`eval_shifted_basis_extrapolated`] to evaluate outside on purpose.
pub fn eval_shifted_basis(t: f64, iv: &Interval, degree: usize, order: usize) -> Result<Vec<f64>> {
    let x = iv.to_canonical(t);
    if !x.is_finite() || x.abs() > 1.0 + DOMAIN_TOL {
        return Err(Error::OutsideInterval {
            t,
            a: iv.start(),
            b: iv.end(),
        });
    }
    Ok(shifted_unchecked(x, iv, degree, order))
}

/// As [`eval_shifted_basis`] but with the domain check disabled, for call
/// sites that evaluate a window's polynomial beyond the window on purpose.
pub fn eval_shifted_basis_extrapolated(
    t: f64,
    iv: &Interval,
    degree: usize,
    order: usize,
) -> Vec<f64> {
    shifted_unchecked(iv.to_canonical(t), iv, degree, order)
}

fn shifted_unchecked(x: f64, iv: &Interval, degree: usize, order: usize) -> Vec<f64> {
    if order == 0 {
        extended_basis(x, degree)
    } else {
        let scale = (2.0 / iv.width()).powi(order as i32);
        let mut row = extended_derivative(x, degree, order);
        for v in &mut row {
            *v *= scale;
        }
        row
    }
}

// Recurrence evaluation without domain checks; valid (as a polynomial) for
// any finite x, which extrapolated call sites rely on.
fn extended_basis(x: f64, degree: usize) -> Vec<f64> {
    basis_unchecked(x, degree)
}

fn extended_derivative(x: f64, degree: usize, order: usize) -> Vec<f64> {
    derivative_table(x, degree, order).pop().unwrap()
}

/// Shifted-basis values of one derivative order at a set of query points.
///
/// `values[(i, k)]` holds `d^p T_i^S / dt^p` at the `k`-th query point, so a
/// column is the basis vector at one point.
#[derive(Clone, Debug)]
pub struct BasisEval {
    pub interval: Interval,
    pub degree: usize,
    pub derivative_order: usize,
    pub values: DMatrix<f64>,
}

impl BasisEval {
    pub fn at_points(
        iv: &Interval,
        degree: usize,
        derivative_order: usize,
        times: &[f64],
    ) -> Result<Self> {
        let mut values = DMatrix::zeros(degree + 1, times.len());
        for (k, &t) in times.iter().enumerate() {
            let col = eval_shifted_basis(t, iv, degree, derivative_order)?;
            values.set_column(k, &DVector::from_vec(col));
        }
        Ok(BasisEval {
            interval: *iv,
            degree,
            derivative_order,
            values,
        })
    }
}

/// Result of an offline least-squares fit in the shifted basis.
#[derive(Clone, Debug)]
pub struct FitResult {
    /// Coefficients `c_0..c_M` of the shifted expansion.
    pub coefficients: DVector<f64>,
    /// Euclidean norm of the data residual at the sample points.
    pub residual_norm: f64,
    /// Interpolation error bound, when a derivative bound was supplied.
    pub bound: Option<f64>,
}

/// Least-squares fit of scalar samples `(x_k, y_k)` on `iv` in the shifted
/// basis of the given degree.
///
/// Solved through a QR factorization of the design matrix rather than the
/// normal equations; near-degenerate sample sets fail with a rank error
/// (condition estimate above `1e12`). If `derivative_bound` is given it is
/// passed to [`error_bound`] and the result stored in the fit.
pub fn offline_fit(
    samples: &[(f64, f64)],
    iv: &Interval,
    degree: usize,
    derivative_bound: Option<f64>,
) -> Result<FitResult> {
    if samples.len() < degree + 1 {
        return Err(Error::DimensionMismatch {
            context: "offline_fit sample count",
            expected: degree + 1,
            found: samples.len(),
        });
    }
    let m = samples.len();
    let mut design = DMatrix::zeros(m, degree + 1);
    let mut rhs = DVector::zeros(m);
    for (k, &(x, y)) in samples.iter().enumerate() {
        let row = eval_shifted_basis(x, iv, degree, 0)?;
        for (i, v) in row.iter().enumerate() {
            design[(k, i)] = *v;
        }
        rhs[k] = y;
    }

    let qr = design.clone().qr();
    let r = qr.r();
    let mut diag_max = 0.0f64;
    let mut diag_min = f64::INFINITY;
    for i in 0..=degree {
        let d = r[(i, i)].abs();
        diag_max = diag_max.max(d);
        diag_min = diag_min.min(d);
    }
    let cond = if diag_min > 0.0 {
        diag_max / diag_min
    } else {
        f64::INFINITY
    };
    if !cond.is_finite() || cond > 1e12 {
        return Err(Error::RankDeficient { cond });
    }

    let qty = qr.q().transpose() * &rhs;
    let coefficients = r
        .solve_upper_triangular(&qty)
        .ok_or(Error::RankDeficient { cond })?;
    let residual_norm = (&design * &coefficients - &rhs).norm();
    let bound = derivative_bound.map(|d| error_bound(d, iv, degree));

    Ok(FitResult {
        coefficients,
        residual_norm,
        bound,
    })
}

/// Minimax interpolation error bound for degree-`n` interpolation at the
/// Chebyshev nodes of `iv`: `2 D / (n + 1)! * ((b - a) / 4)^(n + 1)`, where
/// `D` bounds the `(n + 1)`-th derivative on the interval.
///
/// Evaluated as a running product so intermediate factorials cannot overflow;
/// falls back to log-space accumulation for extreme inputs.
pub fn error_bound(derivative_bound: f64, iv: &Interval, n: usize) -> f64 {
    assert!(
        derivative_bound >= 0.0 && derivative_bound.is_finite(),
        "derivative bound must be finite and nonnegative"
    );
    if derivative_bound == 0.0 {
        return 0.0;
    }
    let ratio = iv.width() / 4.0;
    let mut value = 2.0 * derivative_bound;
    for k in 1..=(n + 1) {
        value *= ratio / (k as f64);
    }
    if value.is_finite() {
        return value;
    }
    let mut log_value = (2.0 * derivative_bound).ln();
    for k in 1..=(n + 1) {
        log_value += ratio.ln() - (k as f64).ln();
    }
    log_value.exp()
}
