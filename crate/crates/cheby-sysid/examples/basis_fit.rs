//! Chebyshev basics: evaluate the basis and its derivatives, place nodes on
//! an interval, fit a function offline and compare the measured error with
//! the analytic interpolation bound.
//!
//! ```bash
//! cargo run --example basis_fit
//! ```

use cheby_sysid::cheb::{self, Interval};

fn main() {
    // Basis values follow the three-term recurrence; at the endpoints they
    // collapse to +-1 patterns.
    let at_half = cheb::eval_basis(0.5, 4).unwrap();
    println!("T_0..T_4 at x = 0.5:  {at_half:?}");
    let slope = cheb::eval_basis_derivative(-1.0, 4, 1).unwrap();
    println!("d/dx T_0..T_4 at -1:  {slope:?} (signed squares)");

    // Nodes of T_5 cluster toward the interval ends.
    let iv = Interval::new(0.0, 0.2).unwrap();
    let nodes: Vec<f64> = cheb::chebyshev_nodes(5)
        .into_iter()
        .map(|x| cheb::shift_point(x, &iv).unwrap())
        .collect();
    println!("T_5 nodes on [0, 0.2]: {nodes:?}");

    // Interpolate sin at 4 nodes (degree 3) and check the bound
    // 2 D / (N+1)! ((b-a)/4)^(N+1) with D = max |sin''''| = sin(0.2).
    let samples: Vec<(f64, f64)> = cheb::chebyshev_nodes(4)
        .into_iter()
        .map(|x| {
            let t = iv.from_canonical(x);
            (t, t.sin())
        })
        .collect();
    let fit = cheb::offline_fit(&samples, &iv, 3, Some(0.2f64.sin())).unwrap();
    println!("\nfit of sin on [0, 0.2], degree 3");
    println!("  coefficients: {:?}", fit.coefficients.as_slice());
    println!("  residual at the nodes: {:.3e}", fit.residual_norm);

    let mut worst = 0.0f64;
    for k in 0..=1000 {
        let t = 0.2 * (k as f64) / 1000.0;
        let basis = cheb::eval_shifted_basis(t, &iv, 3, 0).unwrap();
        let approx: f64 = fit
            .coefficients
            .iter()
            .zip(basis)
            .map(|(c, b)| c * b)
            .sum();
        worst = worst.max((t.sin() - approx).abs());
    }
    println!("  measured max error:    {worst:.4e}");
    println!("  analytic error bound:  {:.4e}", fit.bound.unwrap());
    assert!(worst <= fit.bound.unwrap());
    println!("  bound holds");
}
