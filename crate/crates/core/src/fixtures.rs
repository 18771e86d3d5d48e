//! Built-in problem instances with their recommended run settings. The same
//! instances ship as JSON problem files under `fixtures/`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::measures::Measure;
use crate::polyalg::{Exponent, Polynomial, VariableSpace};
use crate::sosrelax::{Order, RecourseModel, Truncation};
use crate::twostage::{AlgorithmConfig, EvalScheme, RunResult, TwoStageProblem};

/// Which loop a fixture is meant for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    General,
    FiniteSupport,
}

/// Recommended settings stored next to a problem.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Settings {
    pub algorithm: Algorithm,
    pub order: Order,
    pub alpha: f64,
    pub epsilon: f64,
    pub scheme: EvalScheme,
    #[serde(default)]
    pub truncation: Truncation,
    #[serde(default = "one")]
    pub min_iters: usize,
    #[serde(default = "ten")]
    pub max_iters: usize,
}

fn one() -> usize {
    1
}

fn ten() -> usize {
    10
}

impl Settings {
    fn general(order: Order, epsilon: f64, scheme: EvalScheme) -> Self {
        Self {
            algorithm: Algorithm::General,
            order,
            alpha: 0.1,
            epsilon,
            scheme,
            truncation: Truncation::Full,
            min_iters: 1,
            max_iters: 10,
        }
    }

    /// Loop configuration with these settings and defaults elsewhere.
    pub fn config(&self) -> AlgorithmConfig {
        AlgorithmConfig {
            alpha: self.alpha,
            epsilon: self.epsilon,
            order: self.order,
            truncation: self.truncation.clone(),
            min_iters: self.min_iters,
            max_iters: self.max_iters,
            scheme: self.scheme,
            ..AlgorithmConfig::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: &'static str,
    pub problem: TwoStageProblem,
    pub settings: Settings,
}

impl Fixture {
    /// Runs the loop named by the settings.
    pub fn run(&self) -> Result<RunResult> {
        let cfg = self.settings.config();
        match self.settings.algorithm {
            Algorithm::General => self.problem.algorithm_general(&cfg),
            Algorithm::FiniteSupport => self.problem.algorithm_finite_support(&cfg),
        }
    }
}

fn var(s: &VariableSpace, b: &str, i: usize) -> Polynomial {
    Polynomial::var(s, b, i).expect("fixture variable")
}

fn c(s: &VariableSpace, v: f64) -> Polynomial {
    Polynomial::constant(s.clone(), v)
}

/// `v (1 - v)` style interval constraint `(v - l)(u - v)`.
fn interval(v: &Polynomial, l: f64, u: f64) -> Polynomial {
    &v.add_constant(-l) * &(v * -1.0).add_constant(u)
}

fn unit_disk(s: &VariableSpace) -> Polynomial {
    let a = var(s, "x", 0);
    let b = var(s, "x", 1);
    (&(&(&a * &a) + &(&b * &b)) * -1.0).add_constant(1.0)
}

fn box_measure(block: &str, lower: Vec<f64>, upper: Vec<f64>) -> Measure {
    Measure::uniform_box(VariableSpace::single(block, lower.len()), lower, upper).expect("box")
}

/// Moments of the standard normal on `n` variables up to degree `d`.
fn gaussian_moments(space: &VariableSpace, d: u32) -> Measure {
    let m1 = |k: u32| -> f64 {
        if k % 2 == 1 {
            0.0
        } else {
            (1..k).step_by(2).map(|j| j as f64).product()
        }
    };
    let map = crate::polyalg::exponents_up_to(space.dim(), d)
        .into_iter()
        .map(|e| {
            let v = e.0.iter().map(|&k| m1(k)).product();
            (e, v)
        })
        .collect();
    Measure::moment_list(space.clone(), d, map).expect("moment list")
}

/// `F = (x + y - xi)^2` with no constraints and standard normal `mu`, `nu`.
/// The best quadratic lower approximation is zero.
pub fn unconstrained_square() -> Result<Fixture> {
    let s = VariableSpace::two_stage(1, 1, 1);
    let l = &(&var(&s, "x", 0) + &var(&s, "y", 0)) - &var(&s, "xi", 0);
    let model = RecourseModel::new(&l * &l, &[], &[], &[], None)?;
    let xis = VariableSpace::single("xi", 1);
    let mu = gaussian_moments(&xis, 4);
    let nu = gaussian_moments(&VariableSpace::new([("x", 1), ("xi", 1)])?, 4);
    let x0 = VariableSpace::single("x", 1);
    let p = TwoStageProblem::new("unconstrained_square", &Polynomial::zero(x0), model, mu)?.with_nu(nu)?;
    Ok(Fixture {
        name: "unconstrained_square",
        problem: p,
        settings: Settings::general(Order::Full(1), 1e-3, EvalScheme::Gauss(4)),
    })
}

/// Cubic recourse in one variable on an interval around `x`:
/// `min (x + xi) y^3 - xi y^2 + x y  s.t.  xi^2 - (y - x)^2 >= 0`.
pub fn cubic_interval() -> Result<Fixture> {
    let s = VariableSpace::two_stage(1, 1, 1);
    let x = var(&s, "x", 0);
    let y = var(&s, "y", 0);
    let z = var(&s, "xi", 0);
    let f = &(&(&(&x + &z) * &y.pow(3)) - &(&z * &y.pow(2))) + &(&x * &y);
    let d = &y - &x;
    let model = RecourseModel::new(
        f,
        &[interval(&z, 0.0, 1.0)],
        &[(&(&x * &x) * -1.0).add_constant(1.0)],
        &[&(&z * &z) - &(&d * &d)],
        None,
    )?;
    let mu = box_measure("xi", vec![0.0], vec![1.0]);
    let nu = Measure::product(box_measure("x", vec![-1.0], vec![1.0]), mu.clone())?;
    let p = TwoStageProblem::new("cubic_interval", &c(&VariableSpace::single("x", 1), 0.0), model, mu)?.with_nu(nu)?;
    Ok(Fixture {
        name: "cubic_interval",
        problem: p,
        settings: Settings::general(Order::Bidegree { k1: 2, k2: 3, k: 3 }, 1e-3, EvalScheme::EndGrid(100)),
    })
}

/// Linear program in `y` with two scenarios `xi in {-0.1, 0.2}`; the second
/// is feasible only for `x >= 0.2`.
pub fn bilinear_two_scenarios() -> Result<Fixture> {
    let s = VariableSpace::two_stage(1, 2, 1);
    let x = var(&s, "x", 0);
    let y1 = var(&s, "y", 0);
    let y2 = var(&s, "y", 1);
    let z = var(&s, "xi", 0);
    let f = &(&(&x * &x) * &y1) + &(&(&z * &x) * &y2);
    let model = RecourseModel::new(
        f,
        &[],
        &[interval(&x, 0.0, 1.0)],
        &[&y1 - &z, y2.clone(), &(&x - &y1) - &y2],
        None,
    )?;
    let xis = VariableSpace::single("xi", 1);
    let mu = Measure::atomic(xis, vec![vec![-0.1], vec![0.2]], vec![0.5, 0.5])?;
    let p = TwoStageProblem::new("bilinear_two_scenarios", &c(&VariableSpace::single("x", 1), 0.0), model, mu)?
        .with_scenario_nu(vec![box_measure("x", vec![0.0], vec![1.0]), box_measure("x", vec![0.2], vec![1.0])])?;
    Ok(Fixture {
        name: "bilinear_two_scenarios",
        problem: p,
        settings: Settings {
            algorithm: Algorithm::FiniteSupport,
            ..Settings::general(Order::Full(2), 1e-3, EvalScheme::Exact)
        },
    })
}

/// Disk first stage, `min x2 y  s.t.  x1 - 2 xi <= y <= x1 + xi`, and `mu`
/// given only by `E[xi] = 0.6`, `E[xi^2] = 0.5`.
pub fn disk_two_moments() -> Result<Fixture> {
    let s = VariableSpace::two_stage(2, 1, 1);
    let x1 = var(&s, "x", 0);
    let x2 = var(&s, "x", 1);
    let y = var(&s, "y", 0);
    let z = var(&s, "xi", 0);
    let model = RecourseModel::new(
        &x2 * &y,
        &[interval(&z, 0.0, 1.0)],
        &[unit_disk(&s)],
        &[&(&y - &x1) + &(&z * 2.0), &(&x1 + &z) - &y],
        None,
    )?;
    let xis = VariableSpace::single("xi", 1);
    let mu = Measure::moment_list(
        xis,
        2,
        [(Exponent(vec![0]), 1.0), (Exponent(vec![1]), 0.6), (Exponent(vec![2]), 0.5)].into_iter().collect(),
    )?;
    let xs = VariableSpace::single("x", 2);
    let nu = Measure::product(
        Measure::uniform_ball(xs.clone(), &[0.0, 0.0], 1.0, 8)?,
        box_measure("xi", vec![0.0], vec![1.0]),
    )?;
    let f1 = &(&(&var(&xs, "x", 0) * &var(&xs, "x", 1)) * &var(&xs, "x", 1)) * 2.0;
    let f1 = &f1 - &(&var(&xs, "x", 0) * &var(&xs, "x", 0));
    let p = TwoStageProblem::new("disk_two_moments", &f1, model, mu)?.with_nu(nu)?;
    Ok(Fixture {
        name: "disk_two_moments",
        problem: p,
        // f2 is affine in xi, so the one-node rule at the mean is exact
        settings: Settings::general(Order::Bidegree { k1: 2, k2: 2, k: 2 }, 1e-3, EvalScheme::Gauss(1)),
    })
}

/// Ball radius squared for [`polytope_recourse`]: `|x| <= 1`, `xi <= 1`,
/// `-1 <= y1 <= 5` and `-2 <= y2 <= 3` on `K`.
pub const POLYTOPE_BALL: f64 = 36.0;

/// `min x y1 + 2 x y2` over a triangle in `y` that moves with `(x, xi)`.
pub fn polytope_recourse() -> Result<Fixture> {
    let s = VariableSpace::two_stage(1, 2, 1);
    let x = var(&s, "x", 0);
    let y1 = var(&s, "y", 0);
    let y2 = var(&s, "y", 1);
    let z = var(&s, "xi", 0);
    let model = RecourseModel::new(
        &(&x * &y1) + &(&(&x * &y2) * 2.0),
        &[interval(&z, 0.0, 1.0)],
        &[(&(&x * &x) * -1.0).add_constant(1.0)],
        &[
            &(&y1 - &x) - &z,
            &(&y2 - &x) + &z,
            &(&(&(&x * 2.0) + &(&z * 3.0)) - &y1) - &y2,
        ],
        Some(POLYTOPE_BALL),
    )?;
    let mu = box_measure("xi", vec![0.0], vec![1.0]);
    let nu = Measure::product(box_measure("x", vec![-1.0], vec![1.0]), mu.clone())?;
    let p = TwoStageProblem::new("polytope_recourse", &c(&VariableSpace::single("x", 1), 0.0), model, mu)?.with_nu(nu)?;
    Ok(Fixture {
        name: "polytope_recourse",
        problem: p,
        settings: Settings::general(Order::Bidegree { k1: 4, k2: 4, k: 4 }, 0.1, EvalScheme::Grid(100)),
    })
}

/// Ball radius squared for [`ten_dim_qp`]: the optimal `y` is
/// `y1 = 10 - x1` with the rest zero, so `|(x, y, xi)|^2 <= 1 + 121 + 1`.
pub const QP_BALL: f64 = 144.0;

/// Convex quadratic second stage with ten variables, `y10` unbounded:
/// `min |y|^2 - y1^2 - xi e'y` with closed form `f2 = -xi (10 - x1)`.
pub fn ten_dim_qp() -> Result<Fixture> {
    let s = VariableSpace::two_stage(2, 10, 1);
    let x1 = var(&s, "x", 0);
    let x2 = var(&s, "x", 1);
    let z = var(&s, "xi", 0);
    let y: Vec<Polynomial> = (0..10).map(|i| var(&s, "y", i)).collect();
    let mut sum = c(&s, 0.0);
    let mut sq = c(&s, 0.0);
    for (i, yi) in y.iter().enumerate() {
        sum = &sum + yi;
        if i > 0 {
            sq = &sq + &(yi * yi);
        }
    }
    let f = &sq - &(&z * &sum);
    let mut g2 = vec![
        &(&(&x2.add_constant(2.0) * &y[0]) - &x1) + &(&z * 2.0),
        &x2.add_constant(2.0) + &(&x1.add_constant(-2.0) * &y[1]),
        &(&x1 * -1.0).add_constant(10.0) - &sum,
    ];
    for yi in &y[1..9] {
        g2.push(yi.clone());
    }
    let model = RecourseModel::new(f, &[interval(&z, 0.0, 1.0)], &[unit_disk(&s)], &g2, Some(QP_BALL))?;
    let mu = box_measure("xi", vec![0.0], vec![1.0]);
    let xs = VariableSpace::single("x", 2);
    let nu = Measure::product(Measure::uniform_ball(xs.clone(), &[0.0, 0.0], 1.0, 8)?, mu.clone())?;
    let f1 = &var(&xs, "x", 0) * &var(&xs, "x", 1);
    let p = TwoStageProblem::new("ten_dim_qp", &f1, model, mu)?
        .with_nu(nu)?
        .with_recourse_ball(QP_BALL);
    Ok(Fixture {
        name: "ten_dim_qp",
        problem: p,
        settings: Settings::general(Order::Bidegree { k1: 2, k2: 2, k: 2 }, 0.06, EvalScheme::Grid(100)),
    })
}

const UNIT_COST: [f64; 2] = [0.2, 0.2];
const EXTRA_COST: [f64; 2] = [0.44, 0.46];
const SHIP: [[f64; 3]; 2] = [[0.1, 0.2, 0.3], [0.3, 0.2, 0.1]];

/// Shipment planning: price `x0 in [0, 1]`; second stage over planned and
/// extra production `(u1, u2, v1, v2)` and shipments `z_ij`, with demand
/// `a_j x0 + b_j` from `demand(s, j)`.
fn shipment_model(n0: usize, demand: impl Fn(&VariableSpace, usize) -> Polynomial, g0: Vec<Polynomial>) -> Result<RecourseModel> {
    let s = VariableSpace::two_stage(1, 10, n0);
    let x0 = var(&s, "x", 0);
    let u: Vec<Polynomial> = (0..2).map(|i| var(&s, "y", i)).collect();
    let v: Vec<Polynomial> = (0..2).map(|i| var(&s, "y", 2 + i)).collect();
    let zz = |i: usize, j: usize| var(&s, "y", 4 + 3 * i + j);
    let mut f = c(&s, 0.0);
    for i in 0..2 {
        f = &f + &(&u[i] * UNIT_COST[i]);
        f = &f + &(&v[i] * EXTRA_COST[i]);
        for j in 0..3 {
            f = &f + &(&(&x0 * -1.0).add_constant(SHIP[i][j]) * &zz(i, j));
        }
    }
    let mut g2 = Vec::new();
    for j in 0..3 {
        g2.push(&demand(&s, j) - &(&zz(0, j) + &zz(1, j)));
    }
    for i in 0..2 {
        g2.push(&(&u[i] + &v[i]) - &(&(&zz(i, 0) + &zz(i, 1)) + &zz(i, 2)));
    }
    for w in u.iter().chain(&v) {
        g2.push(w.clone());
        g2.push((w * -1.0).add_constant(1.0));
    }
    for i in 0..2 {
        for j in 0..3 {
            g2.push(zz(i, j));
        }
    }
    let g1 = vec![x0.clone(), (&x0 * -1.0).add_constant(1.0)];
    RecourseModel::new(f, &g0, &g1, &g2, None)
}

/// `x0 >= 0`, `x0 <= 1`.
fn price_box() -> Measure {
    box_measure("x", vec![0.0], vec![1.0])
}

/// Truncated standard normal samples on `[0, 1]^2`.
pub fn truncated_normal_samples(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || loop {
        let v: f64 = StandardNormal.sample(&mut rng);
        if (0.0..=1.0).contains(&v) {
            return v;
        }
    };
    (0..n).map(|_| vec![draw(), draw()]).collect()
}

pub const SHIPMENT_SAMPLES: usize = 500;
pub const SHIPMENT_SEED: u64 = 2024;

/// Shipment planning with demand driven by a truncated normal `xi in [0,1]^2`,
/// represented by a fixed sample.
pub fn shipment_normal() -> Result<Fixture> {
    let a = [(-2.0, 0.0), (-2.5, -0.025), (-3.0, -0.06)];
    let b = [(0.5, 3.0), (0.7, 4.0), (-0.1, 5.0)];
    let demand = |s: &VariableSpace, j: usize| {
        let x0 = var(s, "x", 0);
        let aj = (&var(s, "xi", 0) * a[j].0).add_constant(a[j].1);
        let bj = (&var(s, "xi", 1) * b[j].0).add_constant(b[j].1);
        &(&aj * &x0) + &bj
    };
    let s = VariableSpace::two_stage(1, 10, 2);
    let g0 = vec![interval(&var(&s, "xi", 0), 0.0, 1.0), interval(&var(&s, "xi", 1), 0.0, 1.0)];
    let model = shipment_model(2, demand, g0)?;
    let mu = Measure::empirical(
        VariableSpace::single("xi", 2),
        truncated_normal_samples(SHIPMENT_SAMPLES, SHIPMENT_SEED),
    )?;
    let nu = Measure::product(price_box(), mu.clone())?;
    let p = TwoStageProblem::new("shipment_normal", &c(&VariableSpace::single("x", 1), 0.0), model, mu)?.with_nu(nu)?;
    Ok(Fixture {
        name: "shipment_normal",
        problem: p,
        settings: Settings {
            min_iters: 5,
            max_iters: 5,
            truncation: shipment_truncation(),
            ..Settings::general(Order::Bidegree { k1: 2, k2: 2, k: 2 }, 0.3, EvalScheme::Exact)
        },
    })
}

/// Multiplier bases with full degree in `(x, xi)` and degree at most one in
/// the ten second-stage variables.
pub fn shipment_truncation() -> Truncation {
    Truncation::BlockDegree {
        primary: vec!["x".into(), "xi".into()],
        sos_cap: 1,
        multiplier_cap: 1,
    }
}

/// Shipment planning with eight equally likely demand scenarios;
/// `xi = (a1, a2, a3, b1, b2, b3)`.
pub fn shipment_scenarios() -> Result<Fixture> {
    let demand = |s: &VariableSpace, j: usize| {
        let x0 = var(s, "x", 0);
        &(&var(s, "xi", j) * &x0) + &var(s, "xi", 3 + j)
    };
    let model = shipment_model(6, demand, vec![])?;
    let mut pts = Vec::new();
    for a1 in [-0.5, -2.0] {
        for a3 in [-1.0, -3.0] {
            for b2 in [4.0, 7.0] {
                pts.push(vec![a1, -3.0, a3, 3.0, b2, 5.0]);
            }
        }
    }
    let mu = Measure::atomic(VariableSpace::single("xi", 6), pts, vec![0.125; 8])?;
    let p = TwoStageProblem::new("shipment_scenarios", &c(&VariableSpace::single("x", 1), 0.0), model, mu)?
        .with_scenario_nu(vec![price_box()])?;
    Ok(Fixture {
        name: "shipment_scenarios",
        problem: p,
        settings: Settings {
            algorithm: Algorithm::FiniteSupport,
            truncation: shipment_truncation(),
            ..Settings::general(Order::Full(4), 0.3, EvalScheme::Exact)
        },
    })
}

/// Every built-in fixture.
pub fn all() -> Result<Vec<Fixture>> {
    Ok(vec![
        unconstrained_square()?,
        cubic_interval()?,
        bilinear_two_scenarios()?,
        disk_two_moments()?,
        polytope_recourse()?,
        ten_dim_qp()?,
        shipment_normal()?,
        shipment_scenarios()?,
    ])
}

pub fn by_name(name: &str) -> Result<Option<Fixture>> {
    Ok(all()?.into_iter().find(|f| f.name == name))
}
