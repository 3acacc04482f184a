//! Why the coefficients must be re-expressed between windows: reusing the
//! previous window's coefficients in the next window's shifted basis replays
//! the previous window's values one window late. The triangular continuity
//! solve removes the delay exactly.
//!
//! ```bash
//! cargo run --example continuity_solve
//! ```

use cheby_sysid::cheb::Interval;
use cheby_sysid::identifier::{self, CoefficientKind, CoefficientSet};
use nalgebra::DMatrix;

fn main() {
    // A degree-3 model fitted on window 1, one column per state dimension.
    let eta = CoefficientSet::new(
        1,
        CoefficientKind::Eta,
        DMatrix::from_row_slice(4, 1, &[0.3, -0.5, 0.2, 0.1]),
    );
    let prev = Interval::new(0.0, 0.2).unwrap();
    let next = Interval::new(0.2, 0.4).unwrap();

    println!("t      previous poly   delayed reuse   continuity theta");
    let theta = identifier::solve_theta(&eta, &prev, &next).unwrap();
    for k in 0..=4 {
        let t = 0.2 + 0.2 * (k as f64) / 4.0;
        // What the model should be: the previous polynomial continued in time.
        let continued = identifier::predict_dynamics_extrapolated(&eta, &prev, t)[0];
        // Raw reuse: same coefficients against the new window's basis replays
        // the old window shifted by tau.
        let delayed = identifier::predict_dynamics(&eta, &next, t).unwrap()[0];
        let replay = identifier::predict_dynamics(&eta, &prev, t - 0.2).unwrap()[0];
        assert!((delayed - replay).abs() <= 1e-12, "delay identity");
        let fixed = identifier::predict_dynamics(&theta, &next, t).unwrap()[0];
        println!("{t:.3}   {continued:+.6}      {delayed:+.6}      {fixed:+.6}");
    }

    println!();
    println!("continuity matrix (upper triangular, nonzero diagonal):");
    println!("{:.3}", identifier::continuity_matrix(&next, 3));

    // theta matches the analytic continuation everywhere, not just at the
    // matching point.
    let mut worst = 0.0f64;
    for k in 0..=200 {
        let t = 0.2 + 0.2 * (k as f64) / 200.0;
        let continued = identifier::predict_dynamics_extrapolated(&eta, &prev, t)[0];
        let fixed = identifier::predict_dynamics(&theta, &next, t).unwrap()[0];
        worst = worst.max((continued - fixed).abs());
    }
    println!("max |continuation - theta| over the window: {worst:.2e}");
}
