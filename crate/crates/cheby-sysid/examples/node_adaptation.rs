//! The node-count update laws: the dead zone holds the count when the error
//! sits inside the band, errors above grow it logarithmically, errors below
//! shrink it, and the theoretical variant shows its conservative rate
//! constants.
//!
//! ```bash
//! cargo run --example node_adaptation
//! ```

use cheby_sysid::node_select::{self, ErrorReport, NodeSelector};

fn main() {
    let eps_th = 1e-3;
    let kappa = 0.1;

    // A made-up error sequence: bad start, settles into the band, then a
    // long quiet stretch where the dynamics are almost linear per window.
    let errors = [
        2.0, 5e-3, 5e-4, 4e-4, 6e-4, 2e-5, 1e-5, 3e-4, 5e-4, 5e-4,
    ];
    let mut m = 2usize;
    println!("eps_th = {eps_th:.0e}, band = [{:.0e}, {eps_th:.0e}]", kappa * eps_th);
    println!("\n w   avg error   regime    M -> M'");
    for (w, &avg) in errors.iter().enumerate() {
        let selector = NodeSelector::new(eps_th, kappa, 0.2, 0.9, m, 2, 16).unwrap();
        let report = ErrorReport {
            window_index: w + 1,
            avg_error: avg,
            max_node_error: avg,
            regime: selector.classify(avg),
        };
        let next = node_select::update_node_count(&selector, &report);
        println!(
            "{:2}   {avg:9.1e}   {:7}   {m} -> {next}",
            w + 1,
            report.regime.to_string(),
        );
        m = next;
    }

    // The theoretical law increments far more aggressively at small counts
    // because its rate constant is 1 / ln((M+1)/e), which peaks at M = 2.
    println!("\ntheoretical minimum-node law, error one e-fold above threshold:");
    for m in [2usize, 3, 4, 6, 10] {
        let rho = 1.0 / ((m as f64 + 1.0) / std::f64::consts::E).ln();
        let next =
            node_select::theoretical_node_count(m, eps_th * std::f64::consts::E, eps_th, kappa, m)
                .unwrap();
        println!("  M = {m:2}: rho1 = {rho:6.3}  ->  M' = {next}");
    }

    // The exponential decay envelope that drives both laws.
    println!("\nerror decay envelope C ((M+1)/e)^-M for C = 1:");
    for m in [2usize, 3, 4, 6, 8, 12] {
        println!("  M = {m:2}: {:.3e}", node_select::decay_bound(1.0, m).unwrap());
    }
}
