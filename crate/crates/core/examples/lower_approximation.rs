//! Best polynomial lower approximations of a cubic recourse function at
//! increasing relaxation orders, and the minima of the resulting surrogate
//! first-stage problems.
//!
//! The recourse is `min_y (x + xi) y^3 - xi y^2 + x y` over
//! `|y - x| <= xi`, with `x` in `[-1, 1]` and `xi` uniform on `[0, 1]`.

use polyrecourse::fixtures;
use polyrecourse::sosrelax::{build_lower_approx_program, Order, Truncation};
use polyrecourse::twostage::{EvalConfig, EvalScheme};

fn main() -> polyrecourse::Result<()> {
    let fx = fixtures::cubic_interval()?;
    let pb = &fx.problem;
    let nu = pb.nu.clone().expect("uniform on the feasible region");
    for o in ["1,2,2", "1,3,2", "2,2,2", "2,3,3"] {
        let order = Order::parse(o)?;
        let prog = build_lower_approx_program(&pb.model, &nu, &order, &Truncation::Full)?;
        let a = prog.solve(&Default::default())?;
        let s = pb.surrogate_solve(&a.p, &Default::default())?;
        println!("k = ({o})  int p dnu = {:.4}", a.objective);
        println!("  p = {}", a.p);
        println!("  min E p(x, .) = {:.4} at x = {:.4}", s.value, s.x[0]);
    }
    let f = pb.evaluate_objective(&[-0.3555], &EvalScheme::Grid(100), &EvalConfig::default())?;
    println!("f(-0.3555) = {:.4} (100-cell midpoint rule)", f.value);
    Ok(())
}
