//! Evaluating the recourse `f2(x, xi)` by solving the second-stage problem
//! globally, and the expected objective under different expectation rules.

use polyrecourse::fixtures;
use polyrecourse::twostage::{EvalConfig, EvalScheme};

fn main() -> polyrecourse::Result<()> {
    let fx = fixtures::polytope_recourse()?;
    let pb = &fx.problem;
    // two orders above the minimal one, so flat truncation can certify
    let eval = EvalConfig { escalate: 2, ..EvalConfig::default() };
    let x = [-0.3979];

    for xi in [0.0, 0.5, 1.0] {
        let r = pb.evaluate_recourse(&x, &[xi], &eval)?;
        println!(
            "f2({}, {xi}) = {:.6}  order {}  certified {}  y* = {:?}",
            x[0], r.value, r.order, r.certified, r.minimizer
        );
    }
    for scheme in [EvalScheme::Gauss(4), EvalScheme::Grid(20), EvalScheme::EndGrid(20), EvalScheme::Sample(50, 1)] {
        let v = pb.evaluate_objective(&x, &scheme, &eval)?;
        let se = v.stderr.map(|s| format!(" +- {s:.4}")).unwrap_or_default();
        println!("f(x) with {scheme}: {:.6}{se}", v.value);
    }
    match pb.check_first_stage(&[2.0], eval.tol) {
        Err(e) => println!("x = 2: {e}"),
        Ok(()) => println!("x = 2 is feasible"),
    }
    Ok(())
}
