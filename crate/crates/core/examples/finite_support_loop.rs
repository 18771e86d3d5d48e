//! The finite-support bounding loop: one lower approximation per scenario,
//! refined only for scenarios whose gap at the incumbent exceeds epsilon.
//!
//! ```text
//! cargo run --release --example finite_support_loop -- [fixture]
//! ```
//!
//! `shipment_scenarios` runs the eight-scenario shipment planning model
//! (about a minute).

use polyrecourse::fixtures;
use polyrecourse::twostage::AlgorithmConfig;

fn main() -> polyrecourse::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "bilinear_two_scenarios".into());
    let fx = fixtures::by_name(&name)?.ok_or_else(|| polyrecourse::Error::Config(format!("no fixture `{name}`")))?;
    let cfg = AlgorithmConfig {
        max_iters: 5,
        ..fx.settings.config()
    };
    let r = fx.problem.algorithm_finite_support(&cfg)?;
    println!("{}", r.to_table());
    for h in &r.history {
        println!("t = {}: re-solved scenarios {:?}", h.t, h.active);
        for (i, p) in h.p.iter().enumerate() {
            println!("  p_{} = {p}", i + 1);
        }
    }
    println!("{:?}: x* = {:?}, {:.6} <= min f <= {:.6}", r.status, r.x_star, r.v_minus, r.v_plus);
    Ok(())
}
