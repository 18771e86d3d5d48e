//! Measures by their moments: boxes, balls, atoms, products, mixtures and
//! the quadrature rules used for expectations.

use polyrecourse::measures::Measure;
use polyrecourse::polyalg::{Exponent, Polynomial, VariableSpace};

fn main() -> polyrecourse::Result<()> {
    let xs = VariableSpace::single("x", 2);
    let zs = VariableSpace::single("xi", 1);

    let disk = Measure::uniform_ball(xs.clone(), &[0.0, 0.0], 1.0, 8)?;
    let interval = Measure::uniform_box(zs.clone(), vec![0.0], vec![1.0])?;
    println!("disk: E x1^2 = {}", disk.moment(&Exponent(vec![2, 0]))?);
    println!("disk: E x1^2 x2^2 = {}", disk.moment(&Exponent(vec![2, 2]))?);

    let nu = Measure::product(disk.clone(), interval.clone())?;
    let joint = VariableSpace::new([("x", 2), ("xi", 1)])?;
    let p = &Polynomial::var(&joint, "x", 0)?.pow(2) * &Polynomial::var(&joint, "xi", 0)?;
    println!("nu = disk x [0, 1]: int x1^2 xi = {}", nu.integrate(&p)?);

    let atoms = Measure::atomic(zs.clone(), vec![vec![-0.1], vec![0.2]], vec![0.5, 0.5])?;
    let mix = Measure::mixture(0.25, interval.clone(), atoms.clone())?;
    println!("0.25 U[0,1] + 0.75 atoms: E xi = {}", mix.moment(&Exponent(vec![1]))?);

    // nu <- alpha nu + (1 - alpha) delta_x x mu, as in the bounding loop
    let updated = nu.mixture_update(0.1, &[0.6, 0.0], &interval)?;
    println!("after the update: E x1 = {}", updated.moment(&Exponent(vec![1, 0, 0]))?);

    let cube = Polynomial::var(&zs, "xi", 0)?.pow(3);
    let g = interval.gauss(2)?;
    let m = interval.midpoint_grid(100)?;
    let gauss: f64 = g.points.iter().zip(&g.weights).map(|(p, w)| w * p[0].powi(3)).sum();
    let mid: f64 = m.points.iter().zip(&m.weights).map(|(p, w)| w * p[0].powi(3)).sum();
    println!("E xi^3: exact {}, 2-node Gauss {gauss}, 100-cell midpoint {mid}", interval.integrate(&cube)?);

    let s = interval.sample_rule(5, 42)?;
    println!("five seeded samples: {:?}", s.points);
    Ok(())
}
