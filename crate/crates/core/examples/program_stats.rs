//! Sizes of the lower-approximation programs for several orders, with and
//! without a block-degree truncation of the multipliers.

use polyrecourse::fixtures;
use polyrecourse::sosrelax::{Order, Truncation};

fn main() -> polyrecourse::Result<()> {
    let fx = fixtures::polytope_recourse()?;
    let nu = fx.problem.nu.clone();
    println!("order     scalars  blocks  matrix vars  constraints");
    for o in ["2,2,2", "2,4,3", "4,4,4"] {
        let s = fx.problem.lower_approx_stats(&Order::parse(o)?, &Truncation::Full, nu.as_ref())?;
        println!(
            "{o:<9} {:>7}  {:>6}  {:>11}  {:>11}",
            s.scalar_vars, s.matrix_blocks, s.scalarized_matrix_vars, s.constraints
        );
    }

    let ship = fixtures::shipment_normal()?;
    let nu = ship.problem.nu.clone();
    let order = Order::parse("2,2,2")?;
    for (label, t) in [("full", Truncation::Full), ("truncated", fixtures::shipment_truncation())] {
        let s = ship.problem.lower_approx_stats(&order, &t, nu.as_ref())?;
        println!("shipment (2,2,2), {label}: {s:?}");
    }
    Ok(())
}
