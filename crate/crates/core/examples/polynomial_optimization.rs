//! Global minimization of a polynomial over a semialgebraic set with the
//! moment hierarchy, including the flat-truncation test and minimizer
//! extraction.

use polyrecourse::momentsolve::{solve_pop, PopConfig};
use polyrecourse::polyalg::{Polynomial, VariableSpace};
use polyrecourse::sosrelax::{SemialgebraicSet, SetTag};

fn main() -> polyrecourse::Result<()> {
    let s = VariableSpace::single("w", 2);
    let a = Polynomial::var(&s, "w", 0)?;
    let b = Polynomial::var(&s, "w", 1)?;

    // a nonconvex quartic with two global minimizers on the disk
    let f = &(&(&a.pow(4) - &(&a * &a)) + &(&b * &b)) - &(&a * &b);
    let disk = (&(&(&a * &a) + &(&b * &b)) * -1.0).add_constant(1.0);
    let g = SemialgebraicSet::new(s.clone(), &[disk], SetTag::Other)?;

    let r = solve_pop(&f, &g, &PopConfig::default())?;
    println!("order {}: lower bound {:.8}", r.order, r.value);
    println!("flat truncation: t = {:?}, ranks {:?}", r.flat.t, r.flat.ranks);
    println!("certified: {}", r.certified);
    for m in &r.minimizers {
        println!("  minimizer ({:.6}, {:.6}), f = {:.8}", m[0], m[1], f.evaluate(m)?);
    }
    Ok(())
}
