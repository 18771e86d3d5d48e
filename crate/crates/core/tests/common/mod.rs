//! Random small recourse models shared by the property suites.

#![allow(dead_code)]

use polyrecourse::measures::Measure;
use polyrecourse::polyalg::{exponents_up_to, Exponent, Polynomial, VariableSpace};
use polyrecourse::sosrelax::RecourseModel;
use rand::Rng;

/// A compact model: `x` in `[-1, 1]^n1`, `xi` in `[0, 1]^n0`, `y` in the
/// unit ball cut by one linear coupling constraint that keeps `y = 0`
/// feasible. `F` is dense with degree `deg`.
pub struct RandomModel {
    pub model: RecourseModel,
    pub nu: Measure,
    pub deg: u32,
}

pub fn random_model<R: Rng>(rng: &mut R) -> RandomModel {
    let n1 = rng.gen_range(1..=2);
    let n2 = rng.gen_range(1..=2);
    let n0 = rng.gen_range(1..=2);
    let deg = rng.gen_range(2..=4);
    random_model_with(rng, n1, n2, n0, deg)
}

pub fn random_model_with<R: Rng>(rng: &mut R, n1: usize, n2: usize, n0: usize, deg: u32) -> RandomModel {
    let s = VariableSpace::two_stage(n1, n2, n0);
    let n = s.dim();
    let terms: Vec<(Exponent, f64)> = exponents_up_to(n, deg)
        .into_iter()
        .map(|e| (e, rng.gen_range(-1.0..1.0)))
        .collect();
    let f = Polynomial::from_terms(s.clone(), terms);
    let v = |b: &str, i: usize| Polynomial::var(&s, b, i).unwrap();
    let g1: Vec<Polynomial> = (0..n1).map(|i| (&(&v("x", i) * &v("x", i)) * -1.0).add_constant(1.0)).collect();
    let g0: Vec<Polynomial> = (0..n0)
        .map(|i| &v("xi", i) * &(&v("xi", i) * -1.0).add_constant(1.0))
        .collect();
    let mut ball = Polynomial::constant(s.clone(), 1.0);
    for i in 0..n2 {
        ball = &ball - &(&v("y", i) * &v("y", i));
    }
    let mut lin = Polynomial::zero(s.clone());
    let mut total = 0.0;
    for (b, m) in [("x", n1), ("y", n2), ("xi", n0)] {
        for i in 0..m {
            let a: f64 = rng.gen_range(-1.0..1.0);
            total += a.abs();
            lin = &lin + &(&v(b, i) * a);
        }
    }
    let coupling = lin.add_constant(total + 0.1);
    let model = RecourseModel::new(f, &g0, &g1, &[ball, coupling], None).unwrap();
    let bx = Measure::uniform_box(VariableSpace::single("x", n1), vec![-1.0; n1], vec![1.0; n1]).unwrap();
    let bxi = Measure::uniform_box(VariableSpace::single("xi", n0), vec![0.0; n0], vec![1.0; n0]).unwrap();
    let nu = Measure::product(bx, bxi).unwrap();
    RandomModel { model, nu, deg }
}

/// Points of a regular grid with about `target` nodes on the bounding box
/// of `K`, restricted to those satisfying every constraint of the model.
pub fn feasible_grid(model: &RecourseModel, target: usize) -> Vec<Vec<f64>> {
    let s = &model.space;
    let n = s.dim();
    let per_axis = ((target as f64).powf(1.0 / n as f64).round() as usize).max(2);
    let (mut lo, hi) = (vec![-1.0; n], vec![1.0; n]);
    for i in s.range("xi").unwrap() {
        lo[i] = 0.0;
    }
    let all = model.all_constraints().unwrap();
    let mut pts = Vec::new();
    let mut idx = vec![0usize; n];
    loop {
        let p: Vec<f64> = (0..n)
            .map(|d| lo[d] + (hi[d] - lo[d]) * idx[d] as f64 / (per_axis - 1) as f64)
            .collect();
        if all.contains(&p, 0.0).unwrap() {
            pts.push(p);
        }
        let mut d = 0;
        while d < n {
            idx[d] += 1;
            if idx[d] < per_axis {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
        if d == n {
            return pts;
        }
    }
}

/// Largest violation of `F - p >= 0` over `points` of `(x, y, xi)`.
pub fn soundness_violation(model: &RecourseModel, p: &Polynomial, points: &[Vec<f64>]) -> f64 {
    let pp = p.embed(&model.space).unwrap();
    points
        .iter()
        .map(|w| model.objective.evaluate(w).unwrap() - pp.evaluate(w).unwrap())
        .fold(0.0f64, |m, g| m.max(-g))
}
