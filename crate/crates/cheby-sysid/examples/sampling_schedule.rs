//! The sliding-window sampling schedule: Chebyshev time nodes inside each
//! window and the smart sensor's backward-difference derivative estimates,
//! read from a simulated oscillator trace.
//!
//! ```bash
//! cargo run --example sampling_schedule
//! ```

use cheby_sysid::plant::{self, PlantSpec};
use cheby_sysid::window::{self, StateOracle, WindowConfig};
use nalgebra::DVector;

fn main() {
    let config = WindowConfig::new(0.2, 0.001, 2, 2, 16).unwrap();
    let plant = PlantSpec::stuart_landau(0.5, 1.5);
    let trace = plant::simulate(&plant, &DVector::from_vec(vec![0.5, 0.5]), 1.0, 0.001).unwrap();

    println!("window width {} s, backward-difference step {} s", config.tau, config.delta_t);
    for w in 1..=3usize {
        let interval = config.window_interval(w).unwrap();
        let nodes = window::time_nodes(&interval, 2);
        println!(
            "\nwindow {w} = ({:.1}, {:.1}]   nodes (strictly interior, end-clustered):",
            interval.start(),
            interval.end()
        );
        for t in &nodes {
            println!("  t = {t:.5}");
        }

        let record = window::build_window_record(w, &config, 2, &trace).unwrap();
        println!("  sensor reads: {} node samples (+ lagged partners) + 1 start sample", record.node_sample_count());
        for (k, &t) in record.node_times.iter().enumerate() {
            let true_rate = plant.rhs(&trace.state_at(t).unwrap()).unwrap();
            println!(
                "  node {k}: backward-difference xdot = ({:+.4}, {:+.4}), true F = ({:+.4}, {:+.4})",
                record.derivative_estimates[(k, 0)],
                record.derivative_estimates[(k, 1)],
                true_rate[0],
                true_rate[1],
            );
        }
    }

    // Sample budget over a horizon, compared with periodic sampling at the
    // simulation rate.
    let horizon = 12.0;
    let windows = (horizon / config.tau).ceil() as usize;
    let aperiodic = windows * 4;
    let periodic = (horizon / 0.001) as usize;
    println!("\nover {horizon} s with 3rd-order windows: {aperiodic} node samples vs {periodic} periodic samples");
}
