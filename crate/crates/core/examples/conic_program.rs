//! A small semidefinite program solved by the built-in interior-point method.
//!
//! `min <C, X> + u  s.t.  tr X = 1,  u - X_00 = 0.1,  X psd` where `C` is the
//! second-difference matrix. Without `u` the optimum would be the smallest
//! eigenvalue of `C`.

use nalgebra::DMatrix;
use polyrecourse::conic::{program_stats, solve, ConicProgram, MatEntry, Row, Sense, SolverConfig};

fn main() -> polyrecourse::Result<()> {
    let c = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]);
    let mut p = ConicProgram::new(Sense::Minimize);
    let x = p.add_block(3, "X");
    let u = p.add_free("u", 1.0);
    for i in 0..3 {
        for j in i..3 {
            if c[(i, j)] != 0.0 {
                p.add_objective_entry(MatEntry::new(x, i, j, c[(i, j)]))?;
            }
        }
    }
    p.add_row(Row {
        free: vec![],
        entries: (0..3).map(|i| MatEntry::new(x, i, i, 1.0)).collect(),
        rhs: 1.0,
    })?;
    p.add_row(Row {
        free: vec![(u, 1.0)],
        entries: vec![MatEntry::new(x, 0, 0, -1.0)],
        rhs: 0.1,
    })?;

    println!("{:?}", program_stats(&p));
    let s = solve(&p, &SolverConfig::default());
    println!("status {} after {} iterations", s.status, s.iterations);
    println!("primal {:.8}  dual {:.8}  gap {:.1e}", s.primal_objective, s.dual_objective, s.relative_gap);
    println!("u = {:.6}", s.free[u]);
    println!("X = {:.6}", s.blocks[x]);
    println!("lambda_min(C) = {:.8}", 2.0 - 2f64.sqrt());
    Ok(())
}
