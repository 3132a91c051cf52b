//! Runs the canonical reach with the tuned gains and prints the motion
//! metrics.
//!
//! ```text
//! cargo run --release -p reachsim --example reach
//! ```

use reachsim::config::tuned_profile;
use reachsim::{canonical_7dof, compute_metrics, run, Config};

fn main() -> reachsim::Result<()> {
    let chain = canonical_7dof::<f64>();
    let trace = run(&chain, &tuned_profile(), &Config::default())?;
    let last = trace.last();
    println!(
        "{} at t = {:.3} s, |dx| = {:.4} m",
        trace.termination.label(),
        last.t,
        last.dx_norm
    );
    let m = compute_metrics(&trace)?;
    for (name, value) in reachsim::MotionMetrics::FIELDS.iter().zip(m.values()) {
        println!("{name:>22} = {value:.4}");
    }
    Ok(())
}
