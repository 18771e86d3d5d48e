//! Two-stage stochastic programs `min_{x in X} f1(x) + E_mu[f2(x, xi)]`
//! with polynomial data, recourse and objective evaluation, and the two
//! cutting-plane loops driven by polynomial lower approximations of `f2`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::conic::{ProgramStats, SolverConfig};
use crate::error::{Error, Result};
use crate::measures::{AtomicRule, Measure};
use crate::momentsolve::{self, PopConfig};
use crate::polyalg::{Exponent, Polynomial, VariableSpace};
use crate::sosrelax::{
    build_lower_approx_program, build_scenario_program, degree_d3, Order, RecourseModel, SemialgebraicSet,
    Truncation,
};

/// A two-stage problem on the canonical `(x, y, xi)` space.
#[derive(Debug, Clone)]
pub struct TwoStageProblem {
    pub name: String,
    /// First-stage cost on the `x` space.
    pub f1: Polynomial,
    pub model: RecourseModel,
    /// Distribution of `xi`.
    pub mu: Measure,
    /// Measure on `(x, xi)` for the lower-approximation objective; see
    /// [`TwoStageProblem::default_nu`] when absent.
    pub nu: Option<Measure>,
    /// `R` of a redundant `R - |y|^2 >= 0` added to second-stage solves.
    pub recourse_ball: Option<f64>,
    /// Measures `nu_i` on `x` for the finite-support loop: one per scenario,
    /// or a single one shared by all. Empty means uniform on a box `X`.
    pub scenario_nu: Vec<Measure>,
}

impl TwoStageProblem {
    pub fn new(name: impl Into<String>, f1: &Polynomial, model: RecourseModel, mu: Measure) -> Result<Self> {
        let xs = model.space.restrict(&["x"])?;
        let f1 = f1.transfer(&xs)?;
        let xis = model.space.restrict(&["xi"])?;
        if mu.space() != &xis {
            return Err(Error::SpaceMismatch("mu must live on the xi block".into()));
        }
        Ok(Self {
            name: name.into(),
            f1,
            model,
            mu,
            nu: None,
            recourse_ball: None,
            scenario_nu: Vec::new(),
        })
    }

    pub fn with_nu(mut self, nu: Measure) -> Result<Self> {
        if nu.space() != &self.x_xi_space() {
            return Err(Error::SpaceMismatch("nu must live on (x, xi)".into()));
        }
        self.nu = Some(nu);
        Ok(self)
    }

    pub fn with_scenario_nu(mut self, nus: Vec<Measure>) -> Result<Self> {
        let xs = self.x_space();
        if nus.iter().any(|m| m.space() != &xs) {
            return Err(Error::SpaceMismatch("scenario measures must live on x".into()));
        }
        self.scenario_nu = nus;
        Ok(self)
    }

    /// `nu_i` for each of `r` scenarios.
    pub fn scenario_measures(&self, r: usize) -> Result<Vec<Measure>> {
        match self.scenario_nu.len() {
            0 => {
                let bx = detect_box(&self.first_stage_set()?)
                    .filter(|b| b.exact)
                    .ok_or_else(|| Error::Config("X is not a box; supply scenario measures".into()))?;
                Ok(vec![Measure::uniform_box(self.x_space(), bx.lower, bx.upper)?; r])
            }
            1 => Ok(vec![self.scenario_nu[0].clone(); r]),
            n if n == r => Ok(self.scenario_nu.clone()),
            n => Err(Error::Config(format!("{n} scenario measures for {r} scenarios"))),
        }
    }

    pub fn with_recourse_ball(mut self, r: f64) -> Self {
        self.recourse_ball = Some(r);
        self
    }

    pub fn space(&self) -> &VariableSpace {
        &self.model.space
    }

    pub fn x_space(&self) -> VariableSpace {
        self.model.space.restrict(&["x"]).expect("x block")
    }

    pub fn xi_space(&self) -> VariableSpace {
        self.model.space.restrict(&["xi"]).expect("xi block")
    }

    pub fn x_xi_space(&self) -> VariableSpace {
        self.model.space.restrict(&["x", "xi"]).expect("x and xi blocks")
    }

    /// `X` on the `x` space.
    pub fn first_stage_set(&self) -> Result<SemialgebraicSet> {
        self.model.g1.transfer(&self.x_space())
    }

    /// `S` on the `xi` space.
    pub fn support_set(&self) -> Result<SemialgebraicSet> {
        self.model.g0.transfer(&self.xi_space())
    }

    pub fn check_first_stage(&self, x: &[f64], tol: f64) -> Result<()> {
        check_dim(x, self.model.n1())?;
        let v = self.first_stage_set()?.violated(x, tol)?;
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InfeasiblePoint { set: "X".into(), violated: v })
        }
    }

    pub fn check_support(&self, xi: &[f64], tol: f64) -> Result<()> {
        check_dim(xi, self.model.n0())?;
        let v = self.support_set()?.violated(xi, tol)?;
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InfeasiblePoint { set: "S".into(), violated: v })
        }
    }

    /// `nu` if given; otherwise the uniform measure on `X x S` when both are
    /// boxes, else an empirical sample of `F` drawn by rejection from a
    /// bounding box.
    pub fn default_nu(&self, samples: usize, seed: u64, eval: &EvalConfig) -> Result<Measure> {
        if let Some(nu) = &self.nu {
            return Ok(nu.clone());
        }
        let xs = self.first_stage_set()?;
        let ss = self.support_set()?;
        let bx = detect_box(&xs);
        let bs = detect_box(&ss);
        if let (Some(bx), Some(bs)) = (&bx, &bs) {
            if bx.exact && bs.exact {
                let mx = Measure::uniform_box(self.x_space(), bx.lower.clone(), bx.upper.clone())?;
                let ms = Measure::uniform_box(self.xi_space(), bs.lower.clone(), bs.upper.clone())?;
                return Measure::product(mx, ms);
            }
        }
        let (Some(bx), Some(bs)) = (bx, bs) else {
            return Err(Error::Config(
                "no bounding box for X x S can be read off the constraints; supply nu".into(),
            ));
        };
        let mut lower = bx.lower.clone();
        lower.extend(&bs.lower);
        let mut upper = bx.upper.clone();
        upper.extend(&bs.upper);
        let n1 = self.model.n1();
        crate::measures::sample_support(
            self.x_xi_space(),
            &lower,
            &upper,
            |p: &[f64]| self.in_feasible_region(&p[..n1], &p[n1..], eval),
            samples,
            seed,
            1000 * samples.max(1),
        )
    }

    /// Membership in `F`: `x in X`, `xi in S`, and the second-stage
    /// feasibility relaxation does not certify `Y(x, xi)` empty.
    pub fn in_feasible_region(&self, x: &[f64], xi: &[f64], eval: &EvalConfig) -> bool {
        if self.check_first_stage(x, eval.tol).is_err() || self.check_support(xi, eval.tol).is_err() {
            return false;
        }
        let Ok((_, g)) = self.model.second_stage(x, xi) else {
            return false;
        };
        let zero = Polynomial::zero(g.space().clone());
        let k = g.max_degree().div_ceil(2).max(1);
        let cfg = PopConfig {
            k_start: Some(k),
            max_order: Some(k),
            ball: self.recourse_ball,
            solver: eval.pop.solver.clone(),
            ..PopConfig::default()
        };
        !matches!(momentsolve::solve_pop(&zero, &g, &cfg), Err(Error::EmptyRecourse { .. }))
    }

    /// `f2(x, xi)` by the moment hierarchy in `y`.
    pub fn evaluate_recourse(&self, x: &[f64], xi: &[f64], eval: &EvalConfig) -> Result<RecourseValue> {
        self.check_first_stage(x, eval.tol)?;
        check_dim(xi, self.model.n0())?;
        let (f, g) = self.model.second_stage(x, xi)?;
        let d3 = degree_d3(&f, &g).max(1);
        let k0 = d3.div_ceil(2);
        let cfg = PopConfig {
            k_start: Some(k0),
            max_order: Some(k0 + eval.escalate),
            ball: self.recourse_ball,
            ..eval.pop.clone()
        };
        let r = momentsolve::solve_pop(&f, &g, &cfg).map_err(|e| match e {
            Error::EmptyRecourse { .. } => Error::EmptyRecourse {
                point: x.iter().chain(xi).copied().collect(),
            },
            other => other,
        })?;
        Ok(RecourseValue {
            value: r.value,
            certified: r.certified,
            order: r.order,
            minimizer: r.candidate,
        })
    }

    /// The rule used for `E_mu` under `scheme`.
    pub fn rule(&self, scheme: &EvalScheme) -> Result<AtomicRule> {
        match *scheme {
            EvalScheme::Exact => self.mu.atoms().ok_or_else(|| {
                Error::Config("exact expectation needs an atomic or empirical mu; use grid, sample or gauss".into())
            }),
            EvalScheme::Grid(n) => self.mu.midpoint_grid(n),
            EvalScheme::EndGrid(n) => self.mu.endpoint_grid(n),
            EvalScheme::Sample(n, seed) => self.mu.sample_rule(n, seed),
            EvalScheme::Gauss(n) => self.mu.gauss(n),
        }
    }

    /// `f(x) = f1(x) + E_mu[f2(x, xi)]` with the expectation from `scheme`.
    pub fn evaluate_objective(&self, x: &[f64], scheme: &EvalScheme, eval: &EvalConfig) -> Result<ObjectiveValue> {
        self.check_first_stage(x, eval.tol)?;
        let rule = self.rule(scheme)?;
        let f1 = self.f1.evaluate(x)?;
        let vals = parallel_map(&rule.points, |xi| self.evaluate_recourse(x, xi, eval));
        let mut nodes = Vec::with_capacity(rule.len());
        let mut mean = 0.0;
        let mut all_cert = true;
        for (i, (v, (xi, w))) in vals.into_iter().zip(rule.points.iter().zip(&rule.weights)).enumerate() {
            let v = v.map_err(|e| Error::Scenario { index: i, source: Box::new(e) })?;
            mean += w * v.value;
            all_cert &= v.certified;
            nodes.push(NodeValue {
                xi: xi.clone(),
                weight: *w,
                value: v.value,
                certified: v.certified,
            });
        }
        let stderr = match scheme {
            EvalScheme::Sample(n, _) if *n > 1 => {
                let var = nodes.iter().map(|nd| (nd.value - mean).powi(2)).sum::<f64>() / (*n as f64 - 1.0);
                Some((var / *n as f64).sqrt())
            }
            _ => None,
        };
        Ok(ObjectiveValue {
            value: f1 + mean,
            f1,
            expectation: mean,
            stderr,
            all_certified: all_cert,
            nodes,
        })
    }

    /// Minimizes `f1 + E_mu[p]` over `X` for `p` on `(x, xi)` (or on `x`).
    pub fn surrogate_solve(&self, p: &Polynomial, pop: &PopConfig) -> Result<Surrogate> {
        let xs = self.x_space();
        let ep = if p.space().has_block("xi") {
            self.mu.expected_polynomial(p)?.transfer(&xs)?
        } else {
            p.transfer(&xs)?
        };
        let ftilde = &self.f1 + &ep;
        let g = self.first_stage_set()?;
        let r = momentsolve::solve_pop(&ftilde, &g, pop)?;
        let x = r.candidate.clone().ok_or_else(|| {
            Error::Numerical(format!(
                "surrogate relaxation of order {} gave no feasible candidate (flat: {:?})",
                r.order, r.flat.ranks
            ))
        })?;
        let at_x = ftilde.evaluate(&x)?;
        // Certified: the extracted minimizer attains the bound. Otherwise
        // only the relaxation value is a guaranteed lower bound.
        let lower = if r.certified { at_x } else { r.value.min(at_x) };
        Ok(Surrogate {
            ftilde,
            x,
            value: at_x,
            lower,
            bound: r.value,
            certified: r.certified,
        })
    }

    fn nu_or_default(&self, cfg: &AlgorithmConfig) -> Result<Measure> {
        self.default_nu(cfg.nu_samples, cfg.seed, &cfg.eval)
    }

    /// Size of the first lower-approximation program.
    pub fn lower_approx_stats(&self, order: &Order, trunc: &Truncation, nu: Option<&Measure>) -> Result<ProgramStats> {
        let nu = match nu {
            Some(n) => n.clone(),
            None => self.default_nu(64, 0, &EvalConfig::default())?,
        };
        Ok(build_lower_approx_program(&self.model, &nu, order, trunc)?.stats())
    }

    /// The general loop: one lower approximation `p(x, xi)` per iteration,
    /// cuts at earlier candidates, and `nu` pulled towards `delta_x x mu`.
    pub fn algorithm_general(&self, cfg: &AlgorithmConfig) -> Result<RunResult> {
        cfg.validate()?;
        let mut nu = self.nu_or_default(cfg)?;
        let mut cuts: Vec<(Vec<f64>, f64)> = Vec::new();
        let mut st = Bounds::new();
        let mut history = Vec::new();
        let mut status = RunStatus::MaxIterations;
        for t in 1..=cfg.max_iters {
            let timer = std::time::Instant::now();
            let mut prog = build_lower_approx_program(&self.model, &nu, &cfg.order, &cfg.truncation)?;
            for (xc, b) in &cuts {
                prog.add_point_cut(xc, Some(&self.mu), *b)?;
            }
            let stats = prog.stats();
            let approx = prog.solve(&cfg.solver())?;
            let sur = self.surrogate_solve(&approx.p, &cfg.surrogate_pop())?;
            let fx = self.evaluate_objective(&sur.x, &cfg.scheme, &cfg.eval)?;
            st.update(sur.lower, fx.value, &sur.x);
            let rec = IterationRecord {
                t,
                x: sur.x.clone(),
                ftilde_at_x: sur.value,
                f_at_x: fx.value,
                diff: fx.value - sur.value,
                v_minus: st.v_minus,
                v_plus: st.v_plus,
                gap: st.v_plus - st.v_minus,
                surrogate_certified: sur.certified,
                recourse_certified: fx.all_certified,
                ftilde: sur.ftilde.clone(),
                p: vec![approx.p.clone()],
                stats: Some(stats),
                active: vec![],
                seconds: timer.elapsed().as_secs_f64(),
            };
            log::info!(
                "t={t} x={:?} ftilde={:.6} f={:.6} v-={:.6} v+={:.6}",
                rec.x,
                rec.ftilde_at_x,
                rec.f_at_x,
                rec.v_minus,
                rec.v_plus
            );
            history.push(rec);
            if st.v_plus - st.v_minus <= cfg.epsilon && t >= cfg.min_iters {
                status = RunStatus::Converged;
                break;
            }
            if t == cfg.max_iters {
                break;
            }
            // E_mu[p(x, .)] >= ftilde(x) - f1(x) at the new candidate
            let f1x = self.f1.evaluate(&sur.x)?;
            push_cut(&mut cuts, &sur.x, sur.value - f1x);
            nu = nu.mixture_update(cfg.alpha, &sur.x, &self.mu)?;
        }
        Ok(RunResult {
            problem: self.name.clone(),
            algorithm: "general".into(),
            status,
            x_star: st.x_star.clone().unwrap_or_default(),
            f_tilde_star: st.v_minus,
            v_plus: st.v_plus,
            v_minus: st.v_minus,
            iterations: history.len(),
            history,
            config: cfg.clone(),
        })
    }

    /// The finite-support loop: one lower approximation `p_i(x)` per
    /// scenario, recomputed only for scenarios whose gap exceeds `epsilon`.
    pub fn algorithm_finite_support(&self, cfg: &AlgorithmConfig) -> Result<RunResult> {
        cfg.validate()?;
        let rule = self
            .mu
            .atoms()
            .ok_or_else(|| Error::Config("the finite-support loop needs an atomic mu".into()))?;
        let r = rule.len();
        let xs = self.x_space();
        let mut nus = self.scenario_measures(r)?;
        let k = cfg.order.k();
        let mut p: Vec<Option<Polynomial>> = vec![None; r];
        let mut v_i = vec![f64::NEG_INFINITY; r];
        let mut cuts: Vec<Vec<(Vec<f64>, f64)>> = vec![Vec::new(); r];
        let mut active: Vec<usize> = (0..r).collect();
        let mut st = Bounds::new();
        let mut history = Vec::new();
        let mut status = RunStatus::MaxIterations;
        for t in 1..=cfg.max_iters {
            let timer = std::time::Instant::now();
            let solved = parallel_map(&active, |&i| -> Result<Polynomial> {
                let mut prog = build_scenario_program(&self.model, &rule.points[i], &nus[i], k, &cfg.truncation)?;
                for (xc, b) in &cuts[i] {
                    prog.add_point_cut(xc, None, *b)?;
                }
                Ok(prog.solve(&cfg.solver())?.p)
            });
            for (&i, res) in active.iter().zip(solved) {
                p[i] = Some(res.map_err(|e| Error::Scenario { index: i, source: Box::new(e) })?);
            }
            let mut combined = Polynomial::zero(xs.clone());
            for (i, pi) in p.iter().enumerate() {
                let pi = pi.as_ref().expect("every scenario solved in the first pass");
                combined = &combined + &(pi * rule.weights[i]);
            }
            let sur = self.surrogate_solve(&combined, &cfg.surrogate_pop())?;
            for &i in &active {
                let pv = p[i].as_ref().expect("solved").evaluate(&sur.x)?;
                v_i[i] = v_i[i].max(pv);
            }
            let fx = self.evaluate_objective(&sur.x, &EvalScheme::Exact, &cfg.eval)?;
            let lower: f64 = v_i.iter().zip(&rule.weights).map(|(v, w)| v * w).sum::<f64>() + self.f1.evaluate(&sur.x)?;
            st.update(lower.max(f64::NEG_INFINITY), fx.value, &sur.x);
            let x_star = st.x_star.clone().expect("set by update");
            let f2_star = if x_star == sur.x {
                fx.nodes.iter().map(|n| n.value).collect::<Vec<_>>()
            } else {
                self.evaluate_objective(&x_star, &EvalScheme::Exact, &cfg.eval)?
                    .nodes
                    .iter()
                    .map(|n| n.value)
                    .collect()
            };
            let new_active: Vec<usize> = (0..r).filter(|&i| f2_star[i] - v_i[i] > cfg.epsilon).collect();
            let f1s = self.f1.evaluate(&x_star)?;
            let ftilde_star = f1s + v_i.iter().zip(&rule.weights).map(|(v, w)| v * w).sum::<f64>();
            let rec = IterationRecord {
                t,
                x: sur.x.clone(),
                ftilde_at_x: sur.value,
                f_at_x: fx.value,
                diff: fx.value - sur.value,
                v_minus: ftilde_star,
                v_plus: st.v_plus,
                gap: st.v_plus - ftilde_star,
                surrogate_certified: sur.certified,
                recourse_certified: fx.all_certified,
                ftilde: sur.ftilde.clone(),
                p: p.iter().map(|q| q.clone().expect("solved")).collect(),
                stats: None,
                active: active.clone(),
                seconds: timer.elapsed().as_secs_f64(),
            };
            log::info!(
                "t={t} x={:?} ftilde={:.6} f={:.6} sum v_i={:.6} active={:?}",
                rec.x,
                rec.ftilde_at_x,
                rec.f_at_x,
                ftilde_star,
                new_active
            );
            history.push(rec);
            st.v_minus = ftilde_star;
            if new_active.is_empty() && t >= cfg.min_iters {
                status = RunStatus::Converged;
                break;
            }
            if t == cfg.max_iters {
                break;
            }
            let next = if new_active.is_empty() { (0..r).collect() } else { new_active };
            for &i in &next {
                if v_i[i].is_finite() {
                    push_cut(&mut cuts[i], &sur.x, v_i[i]);
                }
                nus[i] = nus[i].mixture_with_dirac(cfg.alpha, &sur.x)?;
            }
            active = next;
        }
        Ok(RunResult {
            problem: self.name.clone(),
            algorithm: "finite-support".into(),
            status,
            x_star: st.x_star.clone().unwrap_or_default(),
            f_tilde_star: st.v_minus,
            v_plus: st.v_plus,
            v_minus: st.v_minus,
            iterations: history.len(),
            history,
            config: cfg.clone(),
        })
    }
}

/// Cuts at (numerically) the same point collapse into the strongest one;
/// repeated rows make the Schur complement singular.
fn push_cut(cuts: &mut Vec<(Vec<f64>, f64)>, x: &[f64], bound: f64) {
    const SAME_POINT: f64 = 1e-7;
    let near = |c: &[f64]| c.iter().zip(x).all(|(a, b)| (a - b).abs() <= SAME_POINT);
    match cuts.iter_mut().find(|(c, _)| near(c)) {
        Some((_, b)) => *b = b.max(bound),
        None => cuts.push((x.to_vec(), bound)),
    }
}

fn check_dim(p: &[f64], n: usize) -> Result<()> {
    if p.len() != n {
        Err(Error::DimensionMismatch { expected: n, got: p.len() })
    } else {
        Ok(())
    }
}

/// Runs `f` over `items` on scoped threads, preserving order.
fn parallel_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    if threads <= 1 || items.len() <= 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(threads);
    std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|c| {
                let f = &f;
                s.spawn(move || c.iter().map(f).collect::<Vec<R>>())
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker thread panicked"))
            .collect()
    })
}

/// Axis-aligned box read off univariate constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectedBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Every constraint is univariate, so the set is exactly the box.
    pub exact: bool,
}

/// Reads interval bounds from constraints that involve a single variable
/// with degree at most two, and from a ball `r - sum w_i^2`.
pub fn detect_box(set: &SemialgebraicSet) -> Option<DetectedBox> {
    let n = set.space().dim();
    let mut lo = vec![f64::NEG_INFINITY; n];
    let mut hi = vec![f64::INFINITY; n];
    let mut exact = true;
    for g in set.constraints() {
        let vars: Vec<usize> = (0..n).filter(|&i| g.terms().any(|(e, _)| e.0[i] > 0)).collect();
        if vars.len() == 1 && g.degree() <= 2 {
            let i = vars[0];
            let c = |d: u32| {
                let mut e = Exponent::zero(n);
                e.0[i] = d;
                g.coeff(&e)
            };
            let (a, b, c0) = (c(2), c(1), c(0));
            let (l, u) = quadratic_interval(a, b, c0)?;
            lo[i] = lo[i].max(l);
            hi[i] = hi[i].min(u);
        } else if let Some(r) = ball_radius(g) {
            exact = false;
            for i in 0..n {
                lo[i] = lo[i].max(-r);
                hi[i] = hi[i].min(r);
            }
        } else {
            exact = false;
        }
    }
    if lo.iter().chain(&hi).all(|v| v.is_finite()) && lo.iter().zip(&hi).all(|(l, u)| l <= u) {
        Some(DetectedBox { lower: lo, upper: hi, exact })
    } else {
        None
    }
}

/// `{t : a t^2 + b t + c >= 0}` when it is one interval (possibly a
/// half-line); `None` when it is empty, all of R, or two pieces.
fn quadratic_interval(a: f64, b: f64, c: f64) -> Option<(f64, f64)> {
    if a == 0.0 {
        if b > 0.0 {
            return Some((-c / b, f64::INFINITY));
        }
        if b < 0.0 {
            return Some((f64::NEG_INFINITY, -c / b));
        }
        return Some((f64::NEG_INFINITY, f64::INFINITY));
    }
    if a > 0.0 {
        return None;
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    let r1 = (-b + s) / (2.0 * a);
    let r2 = (-b - s) / (2.0 * a);
    Some((r1.min(r2), r1.max(r2)))
}

/// `sqrt(r)` when `g = r - |w|^2`.
fn ball_radius(g: &Polynomial) -> Option<f64> {
    let n = g.space().dim();
    let r = g.coeff(&Exponent::zero(n));
    let mut count = 0;
    for (e, c) in g.terms() {
        if e.is_zero() {
            continue;
        }
        if e.degree() == 2 && e.0.iter().any(|&d| d == 2) && (c + 1.0).abs() < 1e-12 {
            count += 1;
        } else {
            return None;
        }
    }
    (count == n && r > 0.0).then(|| r.sqrt())
}

/// Quadrature used for `E_mu`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum EvalScheme {
    /// Weighted sum over the atoms of an atomic or empirical `mu`.
    Exact,
    /// Midpoint rule with `n` cells per coordinate on a box.
    Grid(usize),
    /// Nodes `l + (u - l) i / n`, `i = 1..n`, per coordinate on a box.
    EndGrid(usize),
    /// `n` draws from `mu` with a seed.
    Sample(usize, u64),
    /// Gaussian rule with `n` nodes per coordinate.
    Gauss(usize),
}

impl FromStr for EvalScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |t: &str| -> Result<usize> {
            t.parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| Error::Config(format!("bad count `{t}` in scheme `{s}`")))
        };
        match parts.as_slice() {
            ["exact"] => Ok(EvalScheme::Exact),
            ["grid", n] => Ok(EvalScheme::Grid(num(n)?)),
            ["endgrid", n] => Ok(EvalScheme::EndGrid(num(n)?)),
            ["gauss", n] => Ok(EvalScheme::Gauss(num(n)?)),
            ["sample", n] => Ok(EvalScheme::Sample(num(n)?, 0)),
            ["sample", n, seed] => Ok(EvalScheme::Sample(
                num(n)?,
                seed.parse().map_err(|_| Error::Config(format!("bad seed in `{s}`")))?,
            )),
            _ => Err(Error::Config(format!(
                "unknown scheme `{s}` (exact | grid:N | endgrid:N | sample:N[:seed] | gauss:N)"
            ))),
        }
    }
}

impl TryFrom<String> for EvalScheme {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<EvalScheme> for String {
    fn from(e: EvalScheme) -> String {
        e.to_string()
    }
}

impl fmt::Display for EvalScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalScheme::Exact => write!(f, "exact"),
            EvalScheme::Grid(n) => write!(f, "grid:{n}"),
            EvalScheme::EndGrid(n) => write!(f, "endgrid:{n}"),
            EvalScheme::Sample(n, s) => write!(f, "sample:{n}:{s}"),
            EvalScheme::Gauss(n) => write!(f, "gauss:{n}"),
        }
    }
}

/// Settings for second-stage solves.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalConfig {
    pub pop: PopConfig,
    /// Orders tried above `ceil(d3 / 2)` when the relaxation is not
    /// certified.
    pub escalate: u32,
    /// Feasibility tolerance for input points.
    pub tol: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            pop: PopConfig::default(),
            escalate: 0,
            tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecourseValue {
    pub value: f64,
    /// The relaxation was flat and its minimizer attains the value.
    pub certified: bool,
    pub order: u32,
    pub minimizer: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeValue {
    pub xi: Vec<f64>,
    pub weight: f64,
    pub value: f64,
    pub certified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObjectiveValue {
    pub value: f64,
    pub f1: f64,
    pub expectation: f64,
    /// Standard error of the sample mean for sampled schemes.
    pub stderr: Option<f64>,
    pub all_certified: bool,
    pub nodes: Vec<NodeValue>,
}

#[derive(Debug, Clone)]
pub struct Surrogate {
    /// `f1 + E_mu[p]` on `x`.
    pub ftilde: Polynomial,
    pub x: Vec<f64>,
    /// `ftilde(x)`.
    pub value: f64,
    /// Guaranteed lower bound on `min_X ftilde`: `value` when certified, else
    /// the relaxation bound.
    pub lower: f64,
    /// Relaxation value.
    pub bound: f64,
    pub certified: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlgorithmConfig {
    pub alpha: f64,
    pub epsilon: f64,
    pub order: Order,
    pub truncation: Truncation,
    pub min_iters: usize,
    pub max_iters: usize,
    /// Expectation rule for `f(x)` in the general loop.
    pub scheme: EvalScheme,
    pub eval: EvalConfig,
    /// Settings for the first-stage surrogate solve.
    pub surrogate: PopConfig,
    /// Sample count and seed for a sampled default `nu`.
    pub nu_samples: usize,
    pub seed: u64,
}

impl Default for AlgorithmConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            epsilon: 1e-3,
            order: Order::Full(2),
            truncation: Truncation::Full,
            min_iters: 1,
            max_iters: 10,
            scheme: EvalScheme::Grid(100),
            eval: EvalConfig::default(),
            surrogate: PopConfig::default(),
            nu_samples: 200,
            seed: 0,
        }
    }
}

impl AlgorithmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha = {} must lie in (0, 1)", self.alpha)));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::Config(format!("epsilon = {} must be >= 0", self.epsilon)));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max iterations must be >= 1".into()));
        }
        self.eval.pop.solver.validate()
    }

    fn solver(&self) -> SolverConfig {
        self.eval.pop.solver.clone()
    }

    fn surrogate_pop(&self) -> PopConfig {
        self.surrogate.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Converged,
    MaxIterations,
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub t: usize,
    pub x: Vec<f64>,
    pub ftilde_at_x: f64,
    pub f_at_x: f64,
    /// `f(x) - ftilde(x)`.
    pub diff: f64,
    pub v_minus: f64,
    pub v_plus: f64,
    /// `v_plus - v_minus`.
    pub gap: f64,
    pub surrogate_certified: bool,
    pub recourse_certified: bool,
    #[serde(serialize_with = "ser_poly")]
    pub ftilde: Polynomial,
    #[serde(serialize_with = "ser_polys")]
    pub p: Vec<Polynomial>,
    pub stats: Option<ProgramStats>,
    /// Scenarios recomputed in this iteration (finite-support loop).
    pub active: Vec<usize>,
    pub seconds: f64,
}

fn ser_poly<S: serde::Serializer>(p: &Polynomial, s: S) -> std::result::Result<S::Ok, S::Error> {
    p.to_json_terms().serialize(s)
}

fn ser_polys<S: serde::Serializer>(p: &[Polynomial], s: S) -> std::result::Result<S::Ok, S::Error> {
    p.iter().map(|q| q.to_json_terms()).collect::<Vec<_>>().serialize(s)
}

#[derive(Debug, Clone, Serialize)]
pub struct RunResult {
    pub problem: String,
    pub algorithm: String,
    pub status: RunStatus,
    pub x_star: Vec<f64>,
    pub f_tilde_star: f64,
    pub v_plus: f64,
    pub v_minus: f64,
    pub iterations: usize,
    pub history: Vec<IterationRecord>,
    pub config: AlgorithmConfig,
}

impl RunResult {
    /// `t, x..., ftilde_t(x), f(x), v-, v+, diff` with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let n = self.x_star.len().max(self.history.first().map_or(0, |h| h.x.len()));
        let mut s = String::from("t");
        for i in 0..n {
            s.push_str(&format!(",x{}", i + 1));
        }
        s.push_str(",ftilde,f,v_minus,v_plus,diff\n");
        for h in &self.history {
            s.push_str(&h.t.to_string());
            for v in &h.x {
                s.push_str(&format!(",{}", fmt17(*v)));
            }
            for v in [h.ftilde_at_x, h.f_at_x, h.v_minus, h.v_plus, h.diff] {
                s.push_str(&format!(",{}", fmt17(v)));
            }
            s.push('\n');
        }
        s
    }

    /// Human table with four decimals.
    pub fn to_table(&self) -> String {
        let mut s = format!("{:>3}  {:<24} {:>10} {:>10} {:>10} {:>10} {:>10}\n", "t", "x", "ftilde", "f", "v-", "v+", "diff");
        for h in &self.history {
            let xs = h.x.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(", ");
            s.push_str(&format!(
                "{:>3}  {:<24} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4}\n",
                h.t, xs, h.ftilde_at_x, h.f_at_x, h.v_minus, h.v_plus, h.diff
            ));
        }
        s
    }

    /// Bound report against candidate values obtained elsewhere.
    pub fn certificate(&self, external: &[f64], tol: f64) -> BoundReport {
        bound_certificate(self.v_minus, self.v_plus, self.config.epsilon, external, tol)
    }
}

/// `%.17g`-style formatting for machine outputs.
pub fn fmt17(v: f64) -> String {
    if v.is_finite() {
        let s = format!("{v:.16e}");
        let parsed: f64 = s.parse().expect("formatted float");
        format!("{parsed:?}")
    } else {
        format!("{v}")
    }
}

struct Bounds {
    v_minus: f64,
    v_plus: f64,
    x_star: Option<Vec<f64>>,
}

impl Bounds {
    fn new() -> Self {
        Self {
            v_minus: f64::NEG_INFINITY,
            v_plus: f64::INFINITY,
            x_star: None,
        }
    }

    fn update(&mut self, lower: f64, f_x: f64, x: &[f64]) {
        self.v_minus = self.v_minus.max(lower);
        if self.v_plus > f_x {
            self.v_plus = f_x;
            self.x_star = Some(x.to_vec());
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateCheck {
    pub value: f64,
    /// `value - v_minus`.
    pub excess: f64,
    /// Within `epsilon` of the lower bound.
    pub near_global: bool,
    /// Below the lower bound by more than `tol`: the candidate or a solve is
    /// suspect.
    pub inconsistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub v_minus: f64,
    pub v_plus: f64,
    pub candidates: Vec<CandidateCheck>,
    /// Index of the candidate closest to `v_minus` from above.
    pub closest: Option<usize>,
}

/// Compares externally computed objective values with the lower bound.
pub fn bound_certificate(v_minus: f64, v_plus: f64, epsilon: f64, external: &[f64], tol: f64) -> BoundReport {
    let candidates: Vec<CandidateCheck> = external
        .iter()
        .map(|&v| {
            let excess = v - v_minus;
            if excess < -tol {
                log::warn!("candidate value {v} lies below the lower bound {v_minus}");
            }
            CandidateCheck {
                value: v,
                excess,
                near_global: excess >= -tol && excess <= epsilon,
                inconsistent: excess < -tol,
            }
        })
        .collect();
    let closest = candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.inconsistent)
        .min_by(|a, b| a.1.excess.total_cmp(&b.1.excess))
        .map(|(i, _)| i);
    BoundReport {
        v_minus,
        v_plus,
        candidates,
        closest,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sosrelax::SetTag;

    fn ex42() -> TwoStageProblem {
        let s = VariableSpace::two_stage(1, 2, 1);
        let x = Polynomial::var(&s, "x", 0).unwrap();
        let y1 = Polynomial::var(&s, "y", 0).unwrap();
        let y2 = Polynomial::var(&s, "y", 1).unwrap();
        let z = Polynomial::var(&s, "xi", 0).unwrap();
        let f = &(&(&x * &x) * &y1) + &(&(&z * &x) * &y2);
        let model = RecourseModel::new(
            f,
            &[],
            &[&x * &(&x * -1.0).add_constant(1.0)],
            &[&y1 - &z, y2.clone(), &(&x - &y1) - &y2],
            None,
        )
        .unwrap();
        let mu = Measure::atomic(VariableSpace::single("xi", 1), vec![vec![-0.1], vec![0.2]], vec![0.5, 0.5]).unwrap();
        TwoStageProblem::new("ex", &Polynomial::zero(VariableSpace::single("x", 1)), model, mu).unwrap()
    }

    #[test]
    fn scheme_parsing_round_trips() {
        for s in ["exact", "grid:100", "endgrid:7", "sample:50:3", "gauss:4"] {
            let e: EvalScheme = s.parse().unwrap();
            assert_eq!(e.to_string(), s);
        }
        assert!("grid:0".parse::<EvalScheme>().is_err());
        assert!("simpson:3".parse::<EvalScheme>().is_err());
    }

    #[test]
    fn linear_recourse_matches_closed_form() {
        let p = ex42();
        let e = EvalConfig::default();
        let v = p.evaluate_recourse(&[0.5], &[-0.1], &e).unwrap();
        assert!((v.value - (-0.2 * 0.25 - 0.01 * 0.5)).abs() < 1e-6, "{}", v.value);
        let v = p.evaluate_recourse(&[0.5], &[0.2], &e).unwrap();
        assert!((v.value - 0.05).abs() < 1e-6, "{}", v.value);
        let err = p.evaluate_recourse(&[0.1], &[0.2], &e).unwrap_err();
        assert!(matches!(err, Error::EmptyRecourse { .. }), "{err:?}");
        let err = p.evaluate_recourse(&[1.5], &[0.2], &e).unwrap_err();
        assert!(matches!(err, Error::InfeasiblePoint { .. }), "{err:?}");
    }

    #[test]
    fn dirac_mu_objective_equals_recourse() {
        let mut p = ex42();
        p.mu = Measure::dirac(VariableSpace::single("xi", 1), vec![-0.1]).unwrap();
        let e = EvalConfig::default();
        let o = p.evaluate_objective(&[0.3], &EvalScheme::Exact, &e).unwrap();
        let r = p.evaluate_recourse(&[0.3], &[-0.1], &e).unwrap();
        assert_eq!(o.value, r.value);
    }

    #[test]
    fn box_detection() {
        let s = VariableSpace::single("x", 2);
        let a = Polynomial::var(&s, "x", 0).unwrap();
        let b = Polynomial::var(&s, "x", 1).unwrap();
        let set = SemialgebraicSet::new(
            s.clone(),
            &[&a * &(&a * -1.0).add_constant(1.0), b.add_constant(1.0), (&b * -1.0).add_constant(2.0)],
            SetTag::FirstStage,
        )
        .unwrap();
        let bx = detect_box(&set).unwrap();
        assert_eq!(bx.lower, vec![0.0, -1.0]);
        assert_eq!(bx.upper, vec![1.0, 2.0]);
        assert!(bx.exact);
        let disk = SemialgebraicSet::new(
            s,
            &[(&(&(&a * &a) + &(&b * &b)) * -1.0).add_constant(1.0)],
            SetTag::FirstStage,
        )
        .unwrap();
        let bx = detect_box(&disk).unwrap();
        assert_eq!(bx.lower, vec![-1.0, -1.0]);
        assert!(!bx.exact);
    }

    #[test]
    fn huge_epsilon_stops_after_one_pass() {
        let p = ex42();
        let cfg = AlgorithmConfig {
            epsilon: 1e9,
            order: Order::Full(2),
            ..AlgorithmConfig::default()
        };
        let r = p.algorithm_finite_support(&cfg).unwrap();
        assert_eq!(r.status, RunStatus::Converged);
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn certificate_flags_candidates() {
        let rep = bound_certificate(-0.5225, -0.5198, 0.1, &[-0.5042, -0.5627, -0.4784, -0.4406, -0.4915], 1e-3);
        assert_eq!(rep.closest, Some(0));
        assert!(rep.candidates[1].inconsistent);
        assert!(rep.candidates[0].near_global);
        let empty = bound_certificate(-1.0, 0.0, 0.1, &[], 1e-6);
        assert!(empty.candidates.is_empty() && empty.closest.is_none());
    }

    #[test]
    fn fmt17_round_trips() {
        for v in [0.1, -2.5801, 1e-300, 123456.789] {
            assert_eq!(fmt17(v).parse::<f64>().unwrap(), v);
        }
    }
}
