//! Command-line front end: problem files, the `approx`, `solve`, `eval` and
//! `stats` commands, reports and plot data.
//!
//! Exit codes: 0 success or converged, 2 solver failure, 3 iteration cap
//! reached, 4 infeasible input point, 5 malformed input.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixtures::{self, Algorithm, Fixture, Settings};
use crate::measures::{Measure, MeasureJson};
use crate::polyalg::{Polynomial, TermJson, VariableSpace};
use crate::sosrelax::{build_lower_approx_program, build_scenario_program, Order, RecourseModel, Truncation};
use crate::twostage::{detect_box, fmt17, AlgorithmConfig, EvalConfig, EvalScheme, RunResult, RunStatus, TwoStageProblem};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_MAX_ITERS: i32 = 3;
pub const EXIT_INFEASIBLE: i32 = 4;
pub const EXIT_SCHEMA: i32 = 5;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Blocks {
    pub x: usize,
    pub y: usize,
    pub xi: usize,
}

/// Finite scenario table; an alternative to an atomic `mu`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioTable {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

/// JSON problem description. Polynomials use the term-list encoding; `f1`
/// lives on `x`, everything else on `(x, y, xi)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(default)]
    pub name: Option<String>,
    pub blocks: Blocks,
    #[serde(default)]
    pub f1: Vec<TermJson>,
    #[serde(rename = "F")]
    pub objective: Vec<TermJson>,
    #[serde(default)]
    pub g0: Vec<Vec<TermJson>>,
    #[serde(default)]
    pub g1: Vec<Vec<TermJson>>,
    #[serde(default)]
    pub g2: Vec<Vec<TermJson>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<MeasureJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenarios: Option<ScenarioTable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<MeasureJson>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scenario_nu: Vec<MeasureJson>,
    /// `R` of a redundant `R - |(x, y, xi)|^2 >= 0` in the lower
    /// approximation programs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ball: Option<f64>,
    /// `R` of a redundant `R - |y|^2 >= 0` in second-stage solves.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recourse_ball: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub settings: Option<Settings>,
}

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut s = String::new();
    for seg in path.iter() {
        s.push('/');
        match seg {
            Segment::Seq { index } => s.push_str(&index.to_string()),
            Segment::Map { key } => s.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => s.push_str(variant),
            Segment::Unknown => s.push('?'),
        }
    }
    if s.is_empty() {
        s.push('/');
    }
    s
}

/// Parses JSON into `T`, reporting failures at a JSON pointer.
pub fn parse_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let pointer = pointer_of(e.path());
        Error::Schema {
            pointer,
            message: e.into_inner().to_string(),
        }
    })
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<Self> {
        parse_json(text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    /// Builds the problem; every failure carries the pointer of the field.
    pub fn build(&self) -> Result<TwoStageProblem> {
        let b = &self.blocks;
        if b.x == 0 || b.y == 0 {
            return Err(Error::schema("/blocks", "x and y need at least one variable"));
        }
        let space = VariableSpace::two_stage(b.x, b.y, b.xi);
        let xs = VariableSpace::single("x", b.x);
        let f1 = Polynomial::from_json_terms(&xs, &self.f1, "/f1")?;
        let objective = Polynomial::from_json_terms(&space, &self.objective, "/F")?;
        let list = |gs: &[Vec<TermJson>], name: &str| -> Result<Vec<Polynomial>> {
            gs.iter()
                .enumerate()
                .map(|(j, g)| Polynomial::from_json_terms(&space, g, &format!("/{name}/{j}")))
                .collect()
        };
        let g0 = list(&self.g0, "g0")?;
        let g1 = list(&self.g1, "g1")?;
        let g2 = list(&self.g2, "g2")?;
        for (j, g) in g1.iter().enumerate() {
            if g.block_degree("y") > 0 || g.block_degree("xi") > 0 {
                return Err(Error::schema(format!("/g1/{j}"), "first-stage constraints may only involve x"));
            }
        }
        for (j, g) in g0.iter().enumerate() {
            if g.block_degree("x") > 0 || g.block_degree("y") > 0 {
                return Err(Error::schema(format!("/g0/{j}"), "support constraints may only involve xi"));
            }
        }
        for (name, r) in [("/ball", self.ball), ("/recourse_ball", self.recourse_ball)] {
            if let Some(r) = r {
                if !(r > 0.0 && r.is_finite()) {
                    return Err(Error::schema(name, "radius squared must be positive"));
                }
            }
        }
        let model = RecourseModel::new(objective, &g0, &g1, &g2, self.ball).map_err(|e| Error::schema("/F", e.to_string()))?;
        let xis = VariableSpace::single("xi", b.xi);
        let mu = match (&self.mu, &self.scenarios) {
            (Some(m), None) => m.build("/mu")?,
            (None, Some(t)) => {
                let sum: f64 = t.weights.iter().sum();
                if (sum - 1.0).abs() > 1e-9 {
                    return Err(Error::schema("/scenarios/weights", format!("weights sum to {sum}, not 1")));
                }
                Measure::atomic(xis.clone(), t.points.clone(), t.weights.clone())
                    .map_err(|e| Error::schema("/scenarios", e.to_string()))?
            }
            (Some(_), Some(_)) => return Err(Error::schema("/scenarios", "give either mu or scenarios, not both")),
            (None, None) => return Err(Error::schema("/mu", "missing distribution: give mu or scenarios")),
        };
        if mu.space() != &xis {
            return Err(Error::schema("/mu", format!("mu must live on the block xi of dimension {}", b.xi)));
        }
        let name = self.name.clone().unwrap_or_else(|| "problem".into());
        let mut p = TwoStageProblem::new(name, &f1, model, mu)?;
        if let Some(nu) = &self.nu {
            let nu = nu.build("/nu")?;
            p = p.with_nu(nu).map_err(|e| Error::schema("/nu", e.to_string()))?;
        }
        if !self.scenario_nu.is_empty() {
            let nus = self
                .scenario_nu
                .iter()
                .enumerate()
                .map(|(i, m)| m.build(&format!("/scenario_nu/{i}")))
                .collect::<Result<Vec<_>>>()?;
            p = p.with_scenario_nu(nus).map_err(|e| Error::schema("/scenario_nu", e.to_string()))?;
        }
        if let Some(r) = self.recourse_ball {
            p = p.with_recourse_ball(r);
        }
        Ok(p)
    }

    /// The file for a problem together with optional run settings.
    pub fn from_problem(p: &TwoStageProblem, settings: Option<Settings>) -> Self {
        let m = &p.model;
        let terms = |g: &crate::sosrelax::SemialgebraicSet| g.constraints().iter().map(|q| q.to_json_terms()).collect();
        Self {
            name: Some(p.name.clone()),
            blocks: Blocks {
                x: m.n1(),
                y: m.n2(),
                xi: m.n0(),
            },
            f1: p.f1.to_json_terms(),
            objective: m.objective.to_json_terms(),
            g0: terms(&m.g0),
            g1: terms(&m.g1),
            g2: terms(&m.g2),
            mu: Some(MeasureJson::from_measure(&p.mu)),
            scenarios: None,
            nu: p.nu.as_ref().map(MeasureJson::from_measure),
            scenario_nu: p.scenario_nu.iter().map(MeasureJson::from_measure).collect(),
            ball: m.ball,
            recourse_ball: p.recourse_ball,
            settings,
        }
    }

    pub fn from_fixture(f: &Fixture) -> Self {
        Self::from_problem(&f.problem, Some(f.settings.clone()))
    }
}

/// `full` or `block:<b1>+<b2>:<sos cap>:<multiplier cap>`.
pub fn parse_truncation(s: &str) -> Result<Truncation> {
    if s == "full" {
        return Ok(Truncation::Full);
    }
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Error::Config(format!("cannot parse truncation `{s}` (full | block:x+xi:S:M)"));
    match parts.as_slice() {
        ["block", blocks, a, b] => Ok(Truncation::BlockDegree {
            primary: blocks.split('+').map(str::to_string).collect(),
            sos_cap: a.parse().map_err(|_| bad())?,
            multiplier_cap: b.parse().map_err(|_| bad())?,
        }),
        _ => Err(bad()),
    }
}

fn parse_point(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("cannot parse point `{s}`")))
        })
        .collect()
}

#[derive(Debug, Parser)]
#[command(name = "polyrecourse", version, about = "Polynomial lower approximations of recourse functions and two-stage bounds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Computes the best polynomial lower approximation of the recourse.
    Approx(ApproxArgs),
    /// Runs the global bounding loop.
    Solve(SolveArgs),
    /// Evaluates `f1(x) + E f2(x, xi)` or a surrogate at a point.
    Eval(EvalArgs),
    /// Prints the size of the lower-approximation program.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Problem file, or `builtin:<name>` for a bundled instance.
    pub problem: String,
    /// Redundant ball `R - |(x, y, xi)|^2 >= 0` for the relaxations.
    #[arg(long, value_name = "R")]
    pub add_ball: Option<f64>,
    /// `full` or `block:x+xi:S:M`.
    #[arg(long)]
    pub truncation: Option<String>,
    /// Write outputs into this directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for sampled measures.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ApproxArgs {
    #[command(flatten)]
    pub common: Common,
    /// `k` or `k1,k2,k`.
    #[arg(long)]
    pub order: Option<String>,
    /// One `p_i(x)` per scenario of an atomic `mu`.
    #[arg(long)]
    pub per_scenario: bool,
    /// Points per axis of the CSV value grid.
    #[arg(long, default_value_t = 101)]
    pub grid: usize,
    /// Sample size of a sampled default `nu`.
    #[arg(long, default_value_t = 200)]
    pub nu_samples: usize,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: Common,
    /// 1 for the general loop, 2 for the finite-support loop.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub algorithm: Option<u8>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub order: Option<String>,
    #[arg(long)]
    pub min_iters: Option<usize>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Expectation rule for `f(x)`: exact | grid:N | endgrid:N | sample:N[:seed] | gauss:N.
    #[arg(long)]
    pub scheme: Option<String>,
    /// Print the report as JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    /// First-stage point, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    pub x: String,
    #[arg(long, default_value = "grid:100")]
    pub scheme: String,
    /// Print each node of the rule.
    #[arg(long)]
    pub breakdown: bool,
    /// Output of `approx`: evaluates `f1(x) + E p(x, xi)` instead of `f`.
    #[arg(long)]
    pub surrogate: Option<PathBuf>,
    /// Feasibility tolerance for `x` (rounded inputs may need more slack).
    #[arg(long, default_value_t = 1e-7)]
    pub tol: f64,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub order: Option<String>,
    #[arg(long)]
    pub json: bool,
}

/// Output of `approx`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApproxOutput {
    pub problem: String,
    pub order: String,
    pub kind: ApproxKindJson,
    pub pieces: Vec<ApproxPiece>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ApproxKindJson {
    /// One `p(x, xi)`.
    Joint,
    /// One `p_i(x)` per scenario.
    PerScenario,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApproxPiece {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
    /// `int p d nu`.
    pub objective: f64,
    pub p: Vec<TermJson>,
}

impl ApproxOutput {
    /// `E_mu p(x, .)` for a joint approximation or `sum_i w_i p_i(x)`.
    pub fn expected_on_x(&self, problem: &TwoStageProblem) -> Result<Polynomial> {
        let xs = problem.x_space();
        match self.kind {
            ApproxKindJson::Joint => {
                let piece = self.pieces.first().ok_or_else(|| Error::schema("/pieces", "empty"))?;
                let p = Polynomial::from_json_terms(&problem.x_xi_space(), &piece.p, "/pieces/0/p")?;
                problem.mu.expected_polynomial(&p)?.transfer(&xs)
            }
            ApproxKindJson::PerScenario => {
                let mut acc = Polynomial::zero(xs.clone());
                for (i, piece) in self.pieces.iter().enumerate() {
                    let w = piece.weight.ok_or_else(|| Error::schema(format!("/pieces/{i}/weight"), "missing weight"))?;
                    let p = Polynomial::from_json_terms(&xs, &piece.p, &format!("/pieces/{i}/p"))?;
                    acc = &acc + &(&p * w);
                }
                Ok(acc)
            }
        }
    }
}

/// Problem, stored settings and the solver overrides from the environment.
pub struct Loaded {
    pub problem: TwoStageProblem,
    pub settings: Option<Settings>,
}

pub fn load_problem(spec: &str) -> Result<Loaded> {
    if let Some(name) = spec.strip_prefix("builtin:") {
        let f = fixtures::by_name(name)?.ok_or_else(|| Error::Config(format!("no built-in problem `{name}`")))?;
        return Ok(Loaded {
            problem: f.problem,
            settings: Some(f.settings),
        });
    }
    let file = ProblemFile::load(Path::new(spec))?;
    Ok(Loaded {
        problem: file.build()?,
        settings: file.settings,
    })
}

/// Applies the solver tolerance overrides from the environment.
fn apply_env(cfg: &mut crate::conic::SolverConfig) -> Result<()> {
    *cfg = cfg.clone().from_env()?;
    Ok(())
}

fn prepare(common: &Common) -> Result<Loaded> {
    let mut l = load_problem(&common.problem)?;
    if let Some(r) = common.add_ball {
        if !(r > 0.0) {
            return Err(Error::Config("--add-ball needs R > 0".into()));
        }
        l.problem.model.ball = Some(r);
    }
    Ok(l)
}

fn truncation(common: &Common, settings: Option<&Settings>) -> Result<Truncation> {
    match &common.truncation {
        Some(s) => parse_truncation(s),
        None => Ok(settings.map(|s| s.truncation.clone()).unwrap_or_default()),
    }
}

fn order_of(flag: &Option<String>, settings: Option<&Settings>) -> Result<Order> {
    match flag {
        Some(s) => Order::parse(s),
        None => Ok(settings.map(|s| s.order).unwrap_or(Order::Full(2))),
    }
}

fn write_out(dir: &Path, name: &str, text: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), text)?;
    Ok(())
}

/// Evenly spaced points including both ends.
fn linspace(l: f64, u: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![0.5 * (l + u)];
    }
    (0..n).map(|i| l + (u - l) * i as f64 / (n - 1) as f64).collect()
}

/// Values of a polynomial on a tensor grid over a box, at most two axes.
fn grid_csv(p: &Polynomial, names: &[String], lower: &[f64], upper: &[f64], n: usize) -> Result<String> {
    let mut s = names.join(",");
    s.push_str(",p\n");
    let axes: Vec<Vec<f64>> = lower.iter().zip(upper).map(|(&l, &u)| linspace(l, u, n)).collect();
    let mut idx = vec![0usize; axes.len()];
    loop {
        let pt: Vec<f64> = idx.iter().zip(&axes).map(|(&i, a)| a[i]).collect();
        for v in &pt {
            s.push_str(&fmt17(*v));
            s.push(',');
        }
        s.push_str(&fmt17(p.evaluate(&pt)?));
        s.push('\n');
        let mut d = axes.len();
        loop {
            if d == 0 {
                return Ok(s);
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < axes[d].len() {
                break;
            }
            idx[d] = 0;
        }
    }
}

fn var_names(space: &VariableSpace) -> Vec<String> {
    (0..space.dim()).map(|i| space.var_name(i)).collect()
}

pub fn cmd_approx(a: &ApproxArgs, out: &mut dyn Write) -> Result<i32> {
    let l = prepare(&a.common)?;
    let pb = &l.problem;
    let trunc = truncation(&a.common, l.settings.as_ref())?;
    let order = order_of(&a.order, l.settings.as_ref())?;
    let mut solver = AlgorithmConfig::default().eval.pop.solver;
    apply_env(&mut solver)?;
    let per_scenario = a.per_scenario || l.settings.as_ref().is_some_and(|s| s.algorithm == Algorithm::FiniteSupport && a.order.is_none());
    let mut pieces = Vec::new();
    let mut csv = None;
    if per_scenario {
        let rule = pb
            .mu
            .atoms()
            .ok_or_else(|| Error::Config("--per-scenario needs an atomic mu".into()))?;
        let nus = pb.scenario_measures(rule.len())?;
        let mut polys = Vec::new();
        for i in 0..rule.len() {
            let prog = build_scenario_program(&pb.model, &rule.points[i], &nus[i], order.k(), &trunc)
                .map_err(|e| Error::Scenario { index: i, source: Box::new(e) })?;
            let r = prog.solve(&solver).map_err(|e| Error::Scenario { index: i, source: Box::new(e) })?;
            pieces.push(ApproxPiece {
                scenario: Some(i),
                xi: Some(rule.points[i].clone()),
                weight: Some(rule.weights[i]),
                objective: r.objective,
                p: r.p.to_json_terms(),
            });
            polys.push(r.p);
        }
        if let Some(bx) = detect_box(&pb.first_stage_set()?).filter(|_| pb.model.n1() == 1) {
            let xs = linspace(bx.lower[0], bx.upper[0], a.grid);
            let mut s = String::from("x1");
            for i in 0..polys.len() {
                s.push_str(&format!(",p{}", i + 1));
            }
            s.push('\n');
            for x in xs {
                s.push_str(&fmt17(x));
                for p in &polys {
                    s.push(',');
                    s.push_str(&fmt17(p.evaluate(&[x])?));
                }
                s.push('\n');
            }
            csv = Some(s);
        }
    } else {
        let nu = pb.default_nu(a.nu_samples, a.common.seed.unwrap_or(0), &EvalConfig::default())?;
        let prog = build_lower_approx_program(&pb.model, &nu, &order, &trunc)?;
        let r = prog.solve(&solver)?;
        let space = r.p.space().clone();
        if space.dim() <= 2 {
            let bx = detect_box(&pb.first_stage_set()?);
            let bs = if pb.model.n0() == 0 {
                Some(crate::twostage::DetectedBox {
                    lower: vec![],
                    upper: vec![],
                    exact: true,
                })
            } else {
                detect_box(&pb.support_set()?)
            };
            if let (Some(bx), Some(bs)) = (bx, bs) {
                let lower: Vec<f64> = bx.lower.iter().chain(&bs.lower).copied().collect();
                let upper: Vec<f64> = bx.upper.iter().chain(&bs.upper).copied().collect();
                csv = Some(grid_csv(&r.p, &var_names(&space), &lower, &upper, a.grid)?);
            }
        }
        pieces.push(ApproxPiece {
            scenario: None,
            xi: None,
            weight: None,
            objective: r.objective,
            p: r.p.to_json_terms(),
        });
    }
    let report = ApproxOutput {
        problem: pb.name.clone(),
        order: order.to_string(),
        kind: if per_scenario {
            ApproxKindJson::PerScenario
        } else {
            ApproxKindJson::Joint
        },
        pieces,
    };
    let json = serde_json::to_string_pretty(&report)?;
    match &a.common.out {
        Some(dir) => {
            write_out(dir, "approx.json", &json)?;
            if let Some(c) = csv {
                write_out(dir, "approx_grid.csv", &c)?;
            }
            writeln!(out, "wrote {}", dir.join("approx.json").display())?;
        }
        None => writeln!(out, "{json}")?,
    }
    Ok(EXIT_OK)
}

/// Settings file values overridden by flags.
pub fn solve_config(a: &SolveArgs, settings: Option<&Settings>) -> Result<(AlgorithmConfig, Algorithm)> {
    let mut cfg = settings.map(Settings::config).unwrap_or_default();
    let mut alg = settings.map_or(Algorithm::General, |s| s.algorithm);
    if let Some(n) = a.algorithm {
        alg = if n == 1 { Algorithm::General } else { Algorithm::FiniteSupport };
    }
    if let Some(v) = a.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = a.epsilon {
        cfg.epsilon = v;
    }
    if let Some(o) = &a.order {
        cfg.order = Order::parse(o)?;
    }
    if let Some(v) = a.min_iters {
        cfg.min_iters = v;
    }
    if let Some(v) = a.max_iters {
        cfg.max_iters = v;
    }
    if let Some(s) = &a.scheme {
        cfg.scheme = s.parse()?;
    }
    if let Some(t) = &a.common.truncation {
        cfg.truncation = parse_truncation(t)?;
    }
    if let Some(seed) = a.common.seed {
        cfg.seed = seed;
    }
    apply_env(&mut cfg.eval.pop.solver)?;
    cfg.surrogate.solver = cfg.eval.pop.solver.clone();
    cfg.validate()?;
    Ok((cfg, alg))
}

pub fn run_solve(problem: &TwoStageProblem, cfg: &AlgorithmConfig, alg: Algorithm) -> Result<RunResult> {
    match alg {
        Algorithm::General => problem.algorithm_general(cfg),
        Algorithm::FiniteSupport => problem.algorithm_finite_support(cfg),
    }
}

fn summary(r: &RunResult) -> String {
    let xs = r.x_star.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(", ");
    let status = match r.status {
        RunStatus::Converged => "converged",
        RunStatus::MaxIterations => "iteration cap reached",
    };
    format!(
        "status: {status} after {} iteration(s)\nx*: ({xs})\nlower bound v-: {:.4}\nupper bound v+: {:.4}\ndiff: {:.4}\nseed: {}\n",
        r.iterations,
        r.v_minus,
        r.v_plus,
        r.v_plus - r.v_minus,
        r.config.seed
    )
}

pub fn cmd_solve(a: &SolveArgs, out: &mut dyn Write) -> Result<i32> {
    let l = prepare(&a.common)?;
    let (cfg, alg) = solve_config(a, l.settings.as_ref())?;
    let r = run_solve(&l.problem, &cfg, alg)?;
    let json = serde_json::to_string_pretty(&r)?;
    if let Some(dir) = &a.common.out {
        write_out(dir, "report.json", &json)?;
        write_out(dir, "trace.csv", &r.to_csv())?;
    }
    if a.json {
        writeln!(out, "{json}")?;
    } else {
        write!(out, "{}\n{}", r.to_table(), summary(&r))?;
    }
    Ok(match r.status {
        RunStatus::Converged => EXIT_OK,
        RunStatus::MaxIterations => EXIT_MAX_ITERS,
    })
}

#[derive(Debug, Clone, Serialize)]
struct EvalReport {
    x: Vec<f64>,
    scheme: String,
    f1: f64,
    expectation: f64,
    value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    stderr: Option<f64>,
    certified: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    nodes: Vec<NodeJson>,
}

#[derive(Debug, Clone, Serialize)]
struct NodeJson {
    xi: Vec<f64>,
    weight: f64,
    value: f64,
    certified: bool,
}

pub fn cmd_eval(a: &EvalArgs, out: &mut dyn Write) -> Result<i32> {
    let l = prepare(&a.common)?;
    let pb = &l.problem;
    let x = parse_point(&a.x)?;
    let mut eval = EvalConfig {
        tol: a.tol,
        ..EvalConfig::default()
    };
    apply_env(&mut eval.pop.solver)?;
    pb.check_first_stage(&x, eval.tol)?;
    if let Some(path) = &a.surrogate {
        let approx: ApproxOutput = parse_json(&std::fs::read_to_string(path)?)?;
        let ep = approx.expected_on_x(pb)?;
        let f1 = pb.f1.evaluate(&x)?;
        let e = ep.evaluate(&x)?;
        if a.json {
            let v = serde_json::json!({ "x": x, "f1": f1, "expectation": e, "value": f1 + e });
            writeln!(out, "{}", serde_json::to_string_pretty(&v)?)?;
        } else {
            writeln!(out, "surrogate at x: {}", fmt17(f1 + e))?;
            writeln!(out, "f1(x): {}\nE p(x, xi): {}", fmt17(f1), fmt17(e))?;
        }
        return Ok(EXIT_OK);
    }
    let mut scheme: EvalScheme = a.scheme.parse()?;
    if let (EvalScheme::Sample(n, _), Some(seed)) = (scheme, a.common.seed) {
        scheme = EvalScheme::Sample(n, seed);
    }
    let v = pb.evaluate_objective(&x, &scheme, &eval)?;
    let rep = EvalReport {
        x: x.clone(),
        scheme: scheme.to_string(),
        f1: v.f1,
        expectation: v.expectation,
        value: v.value,
        stderr: v.stderr,
        certified: v.all_certified,
        nodes: if a.breakdown {
            v.nodes
                .iter()
                .map(|n| NodeJson {
                    xi: n.xi.clone(),
                    weight: n.weight,
                    value: n.value,
                    certified: n.certified,
                })
                .collect()
        } else {
            vec![]
        },
    };
    if a.json {
        writeln!(out, "{}", serde_json::to_string_pretty(&rep)?)?;
    } else {
        writeln!(out, "f(x) = {:.4}  ({})", rep.value, fmt17(rep.value))?;
        writeln!(out, "f1(x) = {:.4}\nE f2(x, xi) = {:.4}", rep.f1, rep.expectation)?;
        if let Some(se) = rep.stderr {
            writeln!(out, "standard error: {se:.4}")?;
        }
        writeln!(out, "every node certified: {}", rep.certified)?;
        for n in &rep.nodes {
            let xi = n.xi.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(", ");
            writeln!(out, "  xi = ({xi})  w = {:.4}  f2 = {:.4}{}", n.weight, n.value, if n.certified { "" } else { "  (uncertified)" })?;
        }
    }
    Ok(EXIT_OK)
}

pub fn cmd_stats(a: &StatsArgs, out: &mut dyn Write) -> Result<i32> {
    let l = prepare(&a.common)?;
    let trunc = truncation(&a.common, l.settings.as_ref())?;
    let order = order_of(&a.order, l.settings.as_ref())?;
    let nu = l.problem.default_nu(64, a.common.seed.unwrap_or(0), &EvalConfig::default())?;
    let s = l.problem.lower_approx_stats(&order, &trunc, Some(&nu))?;
    if a.json {
        writeln!(out, "{}", serde_json::to_string_pretty(&s)?)?;
    } else {
        writeln!(out, "order: {order}")?;
        writeln!(out, "scalar variables: {}", s.scalar_vars)?;
        writeln!(out, "matrix blocks: {}", s.matrix_blocks)?;
        writeln!(out, "scalarized matrix variables: {}", s.scalarized_matrix_vars)?;
        writeln!(out, "constraints: {}", s.constraints)?;
    }
    Ok(EXIT_OK)
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InfeasiblePoint { .. } | Error::EmptyRecourse { .. } => EXIT_INFEASIBLE,
        Error::Solver { .. } | Error::Numerical(_) => EXIT_SOLVER,
        Error::Scenario { source, .. } => exit_code(source),
        _ => EXIT_SCHEMA,
    }
}

/// Runs the command line and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{e}");
            return if e.use_stderr() { EXIT_SCHEMA } else { EXIT_OK };
        }
    };
    let res = match &cli.command {
        Command::Approx(a) => cmd_approx(a, out),
        Command::Solve(a) => cmd_solve(a, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Stats(a) => cmd_stats(a, out),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}
