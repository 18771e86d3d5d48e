//! Block-structured polynomial arithmetic: building, evaluating,
//! substituting a block and changing coefficient bases.

use polyrecourse::polyalg::{MonomialBasis, Polynomial, VariableSpace};

fn main() -> polyrecourse::Result<()> {
    // two first-stage variables, one second-stage variable, one random one
    let s = VariableSpace::two_stage(2, 1, 1);
    let x1 = Polynomial::var(&s, "x", 0)?;
    let x2 = Polynomial::var(&s, "x", 1)?;
    let y = Polynomial::var(&s, "y", 0)?;
    let z = Polynomial::var(&s, "xi", 0)?;

    let f = &(&(&x1 * &y) * &z) + &(&(&y * &y) - &(&x2 * 2.0));
    println!("F = {f}");
    println!("deg F = {}, partial degrees {:?}", f.degree(), f.partial_degrees());

    let w = s.point(&[("x", &[0.5, -1.0]), ("y", &[2.0]), ("xi", &[0.3])])?;
    println!("F(0.5, -1, 2, 0.3) = {}", f.evaluate(&w)?);

    let fz = f.substitute_block("xi", &[0.3])?;
    println!("F(., ., ., 0.3) = {fz} on {:?}", fz.space().blocks());

    let sq = f.pow(2);
    println!("F^2 has {} terms", sq.num_terms());

    let b = MonomialBasis::full(&s, 3);
    println!("basis of degree <= 3 in {} variables: {} monomials", s.dim(), b.len());
    let coeffs = f.coefficients_in(&b)?;
    assert_eq!(b.polynomial(&coeffs), f);
    println!("F as JSON terms: {}", f.to_json_string());
    Ok(())
}
