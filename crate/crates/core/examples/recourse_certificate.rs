//! Checking a preordering certificate that identifies a recourse function
//! exactly: `F - q` is free of `y`, and `q` vanishes at a minimizer for
//! every `(x, xi)`, so `F - q` *is* `f2`.
//!
//! The model is `min_y x^2 y1 - x y2^2` over `y1 >= x`, `y2 >= 0`,
//! `y1 + y2 <= x + xi`, with `x, xi` in `[0, 1]`. Its recourse is
//! `x^3 - x xi^2`.

use nalgebra::DMatrix;
use polyrecourse::polyalg::{Exponent, MonomialBasis, Polynomial, VariableSpace};
use polyrecourse::momentsolve::PopConfig;
use polyrecourse::sosrelax::{
    verify_recourse_certificate, CertificateTerm, PreorderingCertificate, SemialgebraicSet, SetTag,
};

fn main() -> polyrecourse::Result<()> {
    let s = VariableSpace::two_stage(1, 2, 1);
    let x = Polynomial::var(&s, "x", 0)?;
    let y1 = Polynomial::var(&s, "y", 0)?;
    let y2 = Polynomial::var(&s, "y", 1)?;
    let z = Polynomial::var(&s, "xi", 0)?;
    let f = &(&(&x * &x) * &y1) - &(&x * &(&y2 * &y2));
    let g = vec![
        z.clone(),
        (&z * -1.0).add_constant(1.0),
        x.clone(),
        (&x * -1.0).add_constant(1.0),
        &y1 - &x,
        y2.clone(),
        &(&(&x + &z) - &y1) - &y2,
    ];
    let gt = SemialgebraicSet::new(s.clone(), &g, SetTag::Other)?;

    // q = x^2 g4 + g2 g5 g4 + g0 g2 g4 + g2 g5 g6 + g0 g2 g6 (0-based g),
    // each term a product of constraints times a 1x1 Gram matrix
    let one = MonomialBasis::full(&VariableSpace::single("x", 1), 0);
    let xb = MonomialBasis::from_exponents(VariableSpace::single("x", 1), vec![Exponent(vec![1])]);
    let unit = DMatrix::from_element(1, 1, 1.0);
    let term = |subset: Vec<usize>, basis: &MonomialBasis| CertificateTerm {
        subset,
        basis: basis.clone(),
        gram: unit.clone(),
    };
    let cert = PreorderingCertificate {
        terms: vec![
            term(vec![4], &xb),
            term(vec![2, 5, 4], &one),
            term(vec![0, 2, 4], &one),
            term(vec![2, 5, 6], &one),
            term(vec![0, 2, 6], &one),
        ],
    };

    let probes: Vec<(Vec<f64>, Vec<f64>)> = [(0.5, 0.3), (1.0, 1.0), (0.2, 0.9), (0.0, 0.5)]
        .iter()
        .map(|&(a, b)| (vec![a], vec![b]))
        .collect();
    let rep = verify_recourse_certificate(&f, &gt, &cert, &probes, 1e-5, &PopConfig::default())?;
    println!("q = {}", rep.q);
    println!("f2 = F - q = {}", rep.p);
    println!("smallest Gram eigenvalue {}", rep.min_gram_eigenvalue);
    for p in &rep.probes {
        println!("  x = {:?}, xi = {:?}: min_y q = {:.2e}  {}", p.x, p.xi, p.min_q, if p.ok { "ok" } else { "FAIL" });
    }
    Ok(())
}
