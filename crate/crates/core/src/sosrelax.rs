//! Sum-of-squares relaxations: truncated quadratic modules, the lower
//! approximation programs for the recourse function, cuts, and verification
//! of polynomial recourse certificates.
//!
//! Membership `h - sum_u u * m_u in Q<g>_{2k}` is written as one equality per
//! monomial `a`:
//!
//! ```text
//!   sum_j <G_j^a, X_j> + sum_u u * m_u[a] = h[a],
//! ```
//!
//! where `X_0` is the Gram matrix of the pure SOS part and `X_j` that of the
//! multiplier of `g_j`. The dual multipliers of these rows are the moments
//! `z_a` of the moment relaxation.

use std::collections::{BTreeSet, HashMap};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::conic::{self, ConicProgram, ConicSolution, MatEntry, ProgramStats, Row, Sense, SolverConfig};
use crate::error::{Error, Result};
use crate::measures::Measure;
use crate::momentsolve::{self, PopConfig};
use crate::polyalg::{exponents_up_to, Exponent, MonomialBasis, Polynomial, VariableSpace};

/// Which part of a two-stage model a constraint belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetTag {
    /// Support of the random vector (`g0`).
    Support,
    /// First-stage feasible set (`g1`).
    FirstStage,
    /// Coupling constraints of the second stage (`g2`).
    Coupling,
    /// Redundant ball added to make the module archimedean.
    Ball,
    Other,
}

/// `{w : g_j(w) >= 0 for all j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SemialgebraicSet {
    space: VariableSpace,
    constraints: Vec<Polynomial>,
    tags: Vec<SetTag>,
}

impl SemialgebraicSet {
    pub fn empty(space: VariableSpace) -> Self {
        Self {
            space,
            constraints: Vec::new(),
            tags: Vec::new(),
        }
    }

    /// Every constraint is moved into `space`.
    pub fn new(space: VariableSpace, constraints: &[Polynomial], tag: SetTag) -> Result<Self> {
        let mut s = Self::empty(space);
        for g in constraints {
            s.push(g, tag)?;
        }
        Ok(s)
    }

    pub fn push(&mut self, g: &Polynomial, tag: SetTag) -> Result<()> {
        self.constraints.push(g.transfer(&self.space)?);
        self.tags.push(tag);
        Ok(())
    }

    pub fn extend(&mut self, other: &SemialgebraicSet) -> Result<()> {
        for (g, t) in other.constraints.iter().zip(&other.tags) {
            self.push(g, *t)?;
        }
        Ok(())
    }

    /// The same constraints moved to another space.
    pub fn transfer(&self, space: &VariableSpace) -> Result<Self> {
        let mut s = Self::empty(space.clone());
        s.extend(self)?;
        Ok(s)
    }

    pub fn space(&self) -> &VariableSpace {
        &self.space
    }

    pub fn constraints(&self) -> &[Polynomial] {
        &self.constraints
    }

    pub fn tags(&self) -> &[SetTag] {
        &self.tags
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn max_degree(&self) -> u32 {
        self.constraints.iter().map(|g| g.degree()).max().unwrap_or(0)
    }

    /// Indices of constraints with `g_j(point) < -tol`.
    pub fn violated(&self, point: &[f64], tol: f64) -> Result<Vec<usize>> {
        let mut v = Vec::new();
        for (j, g) in self.constraints.iter().enumerate() {
            if g.evaluate(point)? < -tol {
                v.push(j);
            }
        }
        Ok(v)
    }

    pub fn contains(&self, point: &[f64], tol: f64) -> Result<bool> {
        Ok(self.violated(point, tol)?.is_empty())
    }

    /// Fixes a block; constraints that become identically zero are dropped.
    pub fn substitute_block(&self, block: &str, values: &[f64]) -> Result<Self> {
        let space = self.space.without(block)?;
        let mut s = Self::empty(space);
        for (g, t) in self.constraints.iter().zip(&self.tags) {
            let h = g.substitute_block(block, values)?;
            if !h.is_zero() {
                s.constraints.push(h);
                s.tags.push(*t);
            }
        }
        Ok(s)
    }
}

/// How the multiplier Gram bases are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Truncation {
    /// Full-degree bases: `[w]_k` for the SOS part and
    /// `[w]_{floor((2k - deg g_j)/2)}` for the multiplier of `g_j`.
    #[default]
    Full,
    /// Same total degrees as `Full`, but the degree in the blocks not listed
    /// in `primary` is capped (`sos_cap` for the SOS part, `multiplier_cap`
    /// for the multipliers). The result is a subset of the order-`k` module,
    /// so bounds stay valid and the program is much smaller when the capped
    /// blocks are large. Missing primary blocks are ignored.
    BlockDegree {
        primary: Vec<String>,
        sos_cap: u32,
        multiplier_cap: u32,
    },
}

/// Gram block of one generator.
#[derive(Debug, Clone)]
pub struct GramBlock {
    /// `None` for the pure SOS part.
    pub generator: Option<usize>,
    pub block: usize,
    pub basis: MonomialBasis,
}

/// Layout of a quadratic-module membership inside a [`ConicProgram`].
#[derive(Debug, Clone)]
pub struct QmodLayout {
    pub k: u32,
    /// Row `r` of the program (offset by `first_row`) matches monomial
    /// `row_exponents[r]`.
    pub first_row: usize,
    pub row_exponents: Vec<Exponent>,
    pub blocks: Vec<GramBlock>,
    /// Generators dropped because `deg g_j > 2k`.
    pub excluded: Vec<usize>,
}

impl QmodLayout {
    pub fn row_of(&self, e: &Exponent) -> Option<usize> {
        self.row_exponents.binary_search(e).ok().map(|r| r + self.first_row)
    }
}

fn capped_basis(space: &VariableSpace, primary: &[String], pdeg: u32, cap: u32) -> Result<MonomialBasis> {
    let mut pr = Vec::new();
    for name in primary {
        if space.has_block(name) {
            pr.extend(space.range(name)?);
        }
    }
    let exps: Vec<Exponent> = exponents_up_to(space.dim(), pdeg)
        .into_iter()
        .filter(|e| {
            let p: u32 = pr.iter().map(|&i| e.0[i]).sum();
            e.degree() <= pdeg && e.degree() - p <= cap
        })
        .collect();
    Ok(MonomialBasis::from_exponents(space.clone(), exps))
}

/// Appends rows and Gram blocks encoding
/// `fixed - sum_u u * poly_u in Q<gens>_{2k}` to `prog`.
///
/// `unknowns` pairs a free variable of `prog` with its polynomial.
pub fn qmod_membership(
    prog: &mut ConicProgram,
    fixed: &Polynomial,
    unknowns: &[(usize, Polynomial)],
    gens: &SemialgebraicSet,
    k: u32,
    trunc: &Truncation,
) -> Result<QmodLayout> {
    let space = gens.space().clone();
    let fixed = fixed.transfer(&space)?;
    let unknowns: Vec<(usize, Polynomial)> = unknowns
        .iter()
        .map(|(u, p)| p.transfer(&space).map(|q| (*u, q)))
        .collect::<Result<_>>()?;

    let mut layout_blocks: Vec<(Option<usize>, MonomialBasis)> = Vec::new();
    let mut excluded = Vec::new();
    let sos_basis = match trunc {
        Truncation::Full => MonomialBasis::full(&space, k),
        Truncation::BlockDegree { primary, sos_cap, .. } => capped_basis(&space, primary, k, *sos_cap)?,
    };
    layout_blocks.push((None, sos_basis));
    for (j, g) in gens.constraints().iter().enumerate() {
        let d = g.degree();
        if d > 2 * k {
            log::warn!("generator {j} has degree {d} > 2k = {}; excluded from the module", 2 * k);
            excluded.push(j);
            continue;
        }
        let half = (2 * k - d) / 2;
        let basis = match trunc {
            Truncation::Full => MonomialBasis::full(&space, half),
            Truncation::BlockDegree {
                primary,
                multiplier_cap,
                ..
            } => capped_basis(&space, primary, half, *multiplier_cap)?,
        };
        layout_blocks.push((Some(j), basis));
    }

    // Rows: every monomial any part can touch.
    let mut rows_set: BTreeSet<Exponent> = BTreeSet::new();
    match trunc {
        Truncation::Full => rows_set.extend(exponents_up_to(space.dim(), 2 * k)),
        Truncation::BlockDegree { .. } => {
            for (gidx, basis) in &layout_blocks {
                let one = Polynomial::constant(space.clone(), 1.0);
                let g = match gidx {
                    None => &one,
                    Some(j) => &gens.constraints()[*j],
                };
                let ex = basis.exponents();
                for p in 0..ex.len() {
                    for q in p..ex.len() {
                        let bpq = ex[p].add(&ex[q]);
                        for (gam, _) in g.terms() {
                            rows_set.insert(bpq.add(gam));
                        }
                    }
                }
            }
        }
    }
    for (e, _) in fixed.terms() {
        if !rows_set.contains(e) {
            return Err(Error::DegreeOverflow {
                monomial: e.display(&space),
                degree: e.degree(),
                max: 2 * k,
            });
        }
    }
    for (_, p) in &unknowns {
        for (e, _) in p.terms() {
            if !rows_set.contains(e) {
                return Err(Error::DegreeOverflow {
                    monomial: e.display(&space),
                    degree: e.degree(),
                    max: 2 * k,
                });
            }
        }
    }
    let row_exponents: Vec<Exponent> = rows_set.into_iter().collect();
    let row_index: HashMap<&Exponent, usize> = row_exponents.iter().enumerate().map(|(i, e)| (e, i)).collect();
    let mut rows: Vec<Row> = row_exponents
        .iter()
        .map(|e| Row {
            free: Vec::new(),
            entries: Vec::new(),
            rhs: fixed.coeff(e),
        })
        .collect();
    for (u, p) in &unknowns {
        for (e, c) in p.terms() {
            rows[row_index[e]].free.push((*u, c));
        }
    }
    let mut blocks = Vec::new();
    for (gidx, basis) in layout_blocks {
        let label = match gidx {
            None => "sos".to_string(),
            Some(j) => format!("g{j}"),
        };
        let bidx = prog.add_block(basis.len(), label);
        let one = Polynomial::constant(space.clone(), 1.0);
        let g = match gidx {
            None => &one,
            Some(j) => &gens.constraints()[j],
        };
        let ex = basis.exponents();
        for p in 0..ex.len() {
            for q in p..ex.len() {
                let bpq = ex[p].add(&ex[q]);
                for (gam, c) in g.terms() {
                    let a = bpq.add(gam);
                    let r = *row_index.get(&a).ok_or_else(|| Error::DegreeOverflow {
                        monomial: a.display(&space),
                        degree: a.degree(),
                        max: 2 * k,
                    })?;
                    rows[r].entries.push(MatEntry::new(bidx, p, q, c));
                }
            }
        }
        blocks.push(GramBlock {
            generator: gidx,
            block: bidx,
            basis,
        });
    }
    let first_row = prog.rows().len();
    for r in rows {
        prog.add_row(r)?;
    }
    Ok(QmodLayout {
        k,
        first_row,
        row_exponents,
        blocks,
        excluded,
    })
}

/// Relaxation order: a single `k` or the bidegree triple `(k1, k2, k)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Order {
    Full(u32),
    Bidegree { k1: u32, k2: u32, k: u32 },
}

impl Order {
    /// Parses `"k"` or `"k1,k2,k"`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(|t| t.trim()).collect();
        let nums: Vec<u32> = parts
            .iter()
            .map(|t| t.parse::<u32>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Config(format!("cannot parse order `{s}`")))?;
        match nums.as_slice() {
            [k] => Ok(Order::Full(*k)),
            [k1, k2, k] => Ok(Order::Bidegree { k1: *k1, k2: *k2, k: *k }),
            _ => Err(Error::Config(format!("order `{s}` must be `k` or `k1,k2,k`"))),
        }
    }

    pub fn k(&self) -> u32 {
        match self {
            Order::Full(k) => *k,
            Order::Bidegree { k, .. } => *k,
        }
    }
}

impl TryFrom<String> for Order {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        Order::parse(&s)
    }
}

impl From<Order> for String {
    fn from(o: Order) -> String {
        o.to_string()
    }
}

impl std::fmt::Display for Order {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Order::Full(k) => write!(f, "{k}"),
            Order::Bidegree { k1, k2, k } => write!(f, "{k1},{k2},{k}"),
        }
    }
}

/// Data shared by every relaxation of a recourse function: `F(x, y, xi)` and
/// the constraint tuples on the canonical `(x, y, xi)` space.
#[derive(Debug, Clone)]
pub struct RecourseModel {
    pub space: VariableSpace,
    pub objective: Polynomial,
    pub g0: SemialgebraicSet,
    pub g1: SemialgebraicSet,
    pub g2: SemialgebraicSet,
    /// `R` of an optional redundant constraint `R - |(x, y, xi)|^2 >= 0`
    /// included in the lower-approximation programs.
    pub ball: Option<f64>,
}

impl RecourseModel {
    pub fn new(
        objective: Polynomial,
        g0: &[Polynomial],
        g1: &[Polynomial],
        g2: &[Polynomial],
        ball: Option<f64>,
    ) -> Result<Self> {
        let space = objective.space().clone();
        for b in ["x", "y", "xi"] {
            if !space.has_block(b) {
                return Err(Error::UnknownBlock(b.into()));
            }
        }
        let g0 = SemialgebraicSet::new(space.clone(), g0, SetTag::Support)?;
        let g1 = SemialgebraicSet::new(space.clone(), g1, SetTag::FirstStage)?;
        let g2 = SemialgebraicSet::new(space.clone(), g2, SetTag::Coupling)?;
        for g in g0.constraints() {
            if g.block_degree("x") + g.block_degree("y") > 0 {
                return Err(Error::SpaceMismatch("support constraints may only involve xi".into()));
            }
        }
        for g in g1.constraints() {
            if g.block_degree("y") + g.block_degree("xi") > 0 {
                return Err(Error::SpaceMismatch("first-stage constraints may only involve x".into()));
            }
        }
        if let Some(r) = ball {
            if !(r > 0.0) {
                return Err(Error::Config("ball radius must be positive".into()));
            }
        }
        Ok(Self {
            space,
            objective,
            g0,
            g1,
            g2,
            ball,
        })
    }

    pub fn n1(&self) -> usize {
        self.space.block_dim("x")
    }

    pub fn n2(&self) -> usize {
        self.space.block_dim("y")
    }

    pub fn n0(&self) -> usize {
        self.space.block_dim("xi")
    }

    /// `(g0, g1, g2)` and the optional ball, on the full space.
    pub fn all_constraints(&self) -> Result<SemialgebraicSet> {
        let mut s = SemialgebraicSet::empty(self.space.clone());
        s.extend(&self.g0)?;
        s.extend(&self.g1)?;
        s.extend(&self.g2)?;
        if let Some(r) = self.ball {
            s.push(&self.ball_polynomial(r), SetTag::Ball)?;
        }
        Ok(s)
    }

    fn ball_polynomial(&self, r: f64) -> Polynomial {
        let n = self.space.dim();
        let mut terms: Vec<(Exponent, f64)> = (0..n).map(|i| (Exponent::unit(n, i).add(&Exponent::unit(n, i)), -1.0)).collect();
        terms.push((Exponent::zero(n), r));
        Polynomial::from_terms(self.space.clone(), terms)
    }

    /// `(d1, d2)`: degrees in `x` and in `xi` of `F`, `g1`, `g2`.
    pub fn degree_constants(&self) -> (u32, u32) {
        let d1 = self
            .objective
            .block_degree("x")
            .max(self.g1.max_degree())
            .max(self.g2.constraints().iter().map(|g| g.block_degree("x")).max().unwrap_or(0));
        let d2 = self
            .objective
            .block_degree("xi")
            .max(self.g0.max_degree())
            .max(self.g2.constraints().iter().map(|g| g.block_degree("xi")).max().unwrap_or(0));
        (d1, d2)
    }

    /// The second-stage problem at fixed `(x, xi)`: objective and constraints
    /// on `y`.
    pub fn second_stage(&self, x: &[f64], xi: &[f64]) -> Result<(Polynomial, SemialgebraicSet)> {
        let f = self.objective.substitute_block("x", x)?.substitute_block("xi", xi)?;
        let g = self.g2.substitute_block("x", x)?.substitute_block("xi", xi)?;
        Ok((f, g))
    }
}

/// `d3 = max(deg f, deg g)` for a polynomial optimization problem.
pub fn degree_d3(f: &Polynomial, g: &SemialgebraicSet) -> u32 {
    f.degree().max(g.max_degree())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApproxKind {
    /// `p(x, xi)` for the whole support.
    Joint,
    /// `p_i(x)` for one scenario.
    Scenario,
}

/// A lower-approximation program together with the basis of `p`.
#[derive(Debug, Clone)]
pub struct LowerApproxProgram {
    pub program: ConicProgram,
    pub basis: MonomialBasis,
    pub free_vars: Vec<usize>,
    pub layout: QmodLayout,
    pub kind: ApproxKind,
    cuts: usize,
}

/// Solved lower approximation.
#[derive(Debug, Clone)]
pub struct LowerApprox {
    pub p: Polynomial,
    /// `int p d nu`.
    pub objective: f64,
    pub solution: ConicSolution,
}

impl LowerApproxProgram {
    pub fn stats(&self) -> ProgramStats {
        conic::program_stats(&self.program)
    }

    pub fn num_cuts(&self) -> usize {
        self.cuts
    }

    /// Adds `sum_a coeffs[a] * p_a >= bound`. An infinite bound adds nothing.
    pub fn add_cut(&mut self, coeffs: &[f64], bound: f64) -> Result<()> {
        if coeffs.len() != self.basis.len() {
            return Err(Error::BasisMismatch(format!(
                "cut has {} coefficients for a basis of {}",
                coeffs.len(),
                self.basis.len()
            )));
        }
        let lin: Vec<(usize, f64)> = self
            .free_vars
            .iter()
            .zip(coeffs)
            .filter(|(_, c)| **c != 0.0)
            .map(|(u, c)| (*u, *c))
            .collect();
        let label = format!("cut{}", self.cuts);
        if self.program.add_free_inequality(&lin, bound, &label)?.is_some() {
            self.cuts += 1;
        }
        Ok(())
    }

    /// Cut `p(x_hat, xi) averaged by mu >= bound` for a joint program, or
    /// `p_i(x_hat) >= bound` for a scenario program.
    pub fn add_point_cut(&mut self, x_hat: &[f64], mu: Option<&Measure>, bound: f64) -> Result<()> {
        let space = self.basis.space().clone();
        let xr = space.range("x")?;
        let mut coeffs = Vec::with_capacity(self.basis.len());
        for e in self.basis.exponents() {
            let xe = Exponent(e.0[xr.clone()].to_vec());
            let mut v = xe.eval(x_hat);
            if self.kind == ApproxKind::Joint {
                let mu = mu.ok_or_else(|| Error::Config("joint cut needs the measure mu".into()))?;
                let xir = space.range("xi")?;
                v *= mu.moment(&Exponent(e.0[xir].to_vec()))?;
            }
            coeffs.push(v);
        }
        self.add_cut(&coeffs, bound)
    }

    pub fn solve(&self, cfg: &SolverConfig) -> Result<LowerApprox> {
        let sol = conic::solve(&self.program, cfg).require_usable(cfg)?;
        let coeffs: Vec<f64> = self.free_vars.iter().map(|&u| sol.free[u]).collect();
        let p = self.basis.polynomial(&coeffs);
        Ok(LowerApprox {
            p,
            objective: sol.primal_objective,
            solution: sol,
        })
    }
}

fn p_basis_joint(model: &RecourseModel, order: &Order) -> Result<MonomialBasis> {
    let xs = model.space.restrict(&["x", "xi"])?;
    let dega = model.objective.degree();
    match *order {
        Order::Full(k) => {
            if 2 * k < dega {
                return Err(Error::OrderTooSmall(format!("2k = {} < deg F = {dega}", 2 * k)));
            }
            Ok(MonomialBasis::full(&xs, 2 * k))
        }
        Order::Bidegree { k1, k2, k } => {
            let need = ((k1 + k2).div_ceil(2)).max(dega.div_ceil(2));
            if k < need {
                return Err(Error::OrderTooSmall(format!(
                    "k = {k} < max(ceil((k1+k2)/2), ceil(deg F/2)) = {need}"
                )));
            }
            MonomialBasis::bidegree(&xs, &[("x", k1), ("xi", k2)])
        }
    }
}

/// `max int p d nu  s.t.  F - p in Q<g0, g1, g2>_{2k}` over `p` in the basis
/// chosen by `order` (full degree `2k`, or bidegree `(k1, k2)` in `(x, xi)`).
pub fn build_lower_approx_program(
    model: &RecourseModel,
    nu: &Measure,
    order: &Order,
    trunc: &Truncation,
) -> Result<LowerApproxProgram> {
    let basis = p_basis_joint(model, order)?;
    let k = order.k();
    let mv = nu.moment_vector(&basis)?;
    let mut prog = ConicProgram::new(Sense::Maximize);
    let mut unknowns = Vec::with_capacity(basis.len());
    let mut free_vars = Vec::with_capacity(basis.len());
    for (i, e) in basis.exponents().iter().enumerate() {
        let u = prog.add_free(format!("p[{}]", e.display(basis.space())), mv.values[i]);
        free_vars.push(u);
        unknowns.push((u, Polynomial::monomial(basis.space().clone(), e.clone(), 1.0)));
    }
    let gens = model.all_constraints()?;
    if gens.len() > 0 && gens.constraints().iter().all(|g| g.degree() > 2 * k) {
        return Err(Error::OrderTooSmall("every generator exceeds degree 2k".into()));
    }
    let layout = qmod_membership(&mut prog, &model.objective, &unknowns, &gens, k, trunc)?;
    Ok(LowerApproxProgram {
        program: prog,
        basis,
        free_vars,
        layout,
        kind: ApproxKind::Joint,
        cuts: 0,
    })
}

/// `max int p_i d nu_i  s.t.  F(x, y, xi_i) - p_i(x) in Q<g1, g2(., xi_i)>_{2k}`
/// with `p_i` of degree `2k` in `x`.
pub fn build_scenario_program(
    model: &RecourseModel,
    xi: &[f64],
    nu: &Measure,
    k: u32,
    trunc: &Truncation,
) -> Result<LowerApproxProgram> {
    let f = model.objective.substitute_block("xi", xi)?;
    if f.degree() > 2 * k {
        return Err(Error::OrderTooSmall(format!("2k = {} < deg F = {}", 2 * k, f.degree())));
    }
    let xy = f.space().clone();
    let xs = xy.restrict(&["x"])?;
    let basis = MonomialBasis::full(&xs, 2 * k);
    let mv = nu.moment_vector(&basis)?;
    let mut prog = ConicProgram::new(Sense::Maximize);
    let mut unknowns = Vec::new();
    let mut free_vars = Vec::new();
    for (i, e) in basis.exponents().iter().enumerate() {
        let u = prog.add_free(format!("p[{}]", e.display(&xs)), mv.values[i]);
        free_vars.push(u);
        unknowns.push((u, Polynomial::monomial(xs.clone(), e.clone(), 1.0)));
    }
    let all = model.all_constraints()?;
    let mut gens = SemialgebraicSet::empty(xy.clone());
    for (g, t) in all.constraints().iter().zip(all.tags()) {
        if *t == SetTag::Support {
            continue;
        }
        let h = g.substitute_block("xi", xi)?;
        if !h.is_zero() {
            gens.push(&h, *t)?;
        }
    }
    let layout = qmod_membership(&mut prog, &f, &unknowns, &gens, k, trunc)?;
    Ok(LowerApproxProgram {
        program: prog,
        basis,
        free_vars,
        layout,
        kind: ApproxKind::Scenario,
        cuts: 0,
    })
}

// ---------------------------------------------------------------------------
// Recourse certificates.

/// One product term `(prod_{i in J} g_i) * [b]^T G [b]`.
#[derive(Debug, Clone)]
pub struct CertificateTerm {
    pub subset: Vec<usize>,
    pub basis: MonomialBasis,
    pub gram: DMatrix<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct PreorderingCertificate {
    pub terms: Vec<CertificateTerm>,
}

#[derive(Debug, Clone)]
pub struct ProbeResult {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
    /// `min_y q(x, y, xi)` over `Y(x, xi)`.
    pub min_q: f64,
    pub ok: bool,
}

#[derive(Debug, Clone)]
pub struct CertificateReport {
    /// `F - q` on `(x, xi)`.
    pub p: Polynomial,
    pub q: Polynomial,
    pub min_gram_eigenvalue: f64,
    pub probes: Vec<ProbeResult>,
}

impl CertificateReport {
    pub fn all_probes_ok(&self) -> bool {
        self.probes.iter().all(|p| p.ok)
    }
}

/// Rebuilds `q` from the certificate, checks that `F - q` does not depend on
/// `y`, and at each probe `(x, xi)` checks that `min_y q` over `Y(x, xi)` is
/// (numerically) zero. Probe failures are reported, not raised.
pub fn verify_recourse_certificate(
    objective: &Polynomial,
    gtilde: &SemialgebraicSet,
    cert: &PreorderingCertificate,
    probes: &[(Vec<f64>, Vec<f64>)],
    tol: f64,
    pop: &PopConfig,
) -> Result<CertificateReport> {
    let space = gtilde.space().clone();
    let mut q = Polynomial::zero(space.clone());
    let mut min_eig = f64::INFINITY;
    for (t, term) in cert.terms.iter().enumerate() {
        let n = term.basis.len();
        if term.gram.nrows() != n || term.gram.ncols() != n {
            return Err(Error::NotRecourseCertificate(format!(
                "term {t}: Gram matrix is {}x{} for a basis of {n}",
                term.gram.nrows(),
                term.gram.ncols()
            )));
        }
        let sym = (&term.gram + term.gram.transpose()) * 0.5;
        if n > 0 {
            let ev = nalgebra::SymmetricEigen::new(sym.clone()).eigenvalues;
            let lmin = ev.iter().copied().fold(f64::INFINITY, f64::min);
            let scale = ev.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            min_eig = min_eig.min(lmin);
            if lmin < -1e-9 * scale {
                return Err(Error::NotRecourseCertificate(format!(
                    "term {t}: Gram matrix has eigenvalue {lmin:e}"
                )));
            }
        }
        let mut sigma = Polynomial::zero(space.clone());
        for i in 0..n {
            for j in 0..n {
                let e = term.basis.get(i).add(term.basis.get(j));
                let m = Polynomial::monomial(term.basis.space().clone(), e, sym[(i, j)]).transfer(&space)?;
                sigma = &sigma + &m;
            }
        }
        let mut prod = Polynomial::constant(space.clone(), 1.0);
        for &i in &term.subset {
            let g = gtilde.constraints().get(i).ok_or_else(|| {
                Error::NotRecourseCertificate(format!("term {t} references generator {i} of {}", gtilde.len()))
            })?;
            prod = &prod * g;
        }
        q = &q + &(&prod * &sigma);
    }
    let f = objective.transfer(&space)?;
    let p_full = &f - &q;
    if p_full.block_degree("y") > 0 {
        return Err(Error::NotRecourseCertificate(format!(
            "F - q still depends on y (degree {})",
            p_full.block_degree("y")
        )));
    }
    let pspace = space.restrict(&["x", "xi"])?;
    let p = p_full.restrict(&pspace)?;
    let mut results = Vec::new();
    for (x, xi) in probes {
        let qy = q.substitute_block("x", x)?.substitute_block("xi", xi)?;
        let gy = gtilde.substitute_block("x", x)?.substitute_block("xi", xi)?;
        let r = momentsolve::solve_pop(&qy, &gy, pop)?;
        results.push(ProbeResult {
            x: x.clone(),
            xi: xi.clone(),
            min_q: r.value,
            ok: r.value.abs() <= tol,
        });
    }
    Ok(CertificateReport {
        p,
        q,
        min_gram_eigenvalue: if min_eig.is_finite() { min_eig } else { 0.0 },
        probes: results,
    })
}
