//! The general bounding loop: lower approximation, surrogate minimization,
//! evaluation of the true objective and the measure update, until the gap
//! between the bounds drops below epsilon.
//!
//! ```text
//! cargo run --release --example general_loop -- [fixture]
//! ```
//!
//! The default instance has a disk as first-stage set and a random variable
//! known only through its first two moments.

use polyrecourse::fixtures;

fn main() -> polyrecourse::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "disk_two_moments".into());
    let fx = fixtures::by_name(&name)?.ok_or_else(|| polyrecourse::Error::Config(format!("no fixture `{name}`")))?;
    let cfg = fx.settings.config();
    println!("{name}: order ({}), alpha {}, epsilon {}", cfg.order, cfg.alpha, cfg.epsilon);
    let r = fx.problem.algorithm_general(&cfg)?;
    println!("{}", r.to_table());
    println!("{:?} after {} iteration(s)", r.status, r.iterations);
    println!("x* = {:?}", r.x_star);
    println!("{:.6} <= min f <= {:.6}", r.v_minus, r.v_plus);
    for h in &r.history {
        println!("t = {}: ftilde = {}", h.t, h.ftilde);
    }
    Ok(())
}
