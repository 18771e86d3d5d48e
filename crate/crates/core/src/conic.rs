//! Linear programs over products of PSD cones and free scalars.
//!
//! A [`ConicProgram`] is stored in equality form
//!
//! ```text
//!   max/min  c'u + <C, X> + c0
//!   s.t.     B u + A(X) = b,   X = diag(X_1, .., X_s),  X_j PSD,  u free.
//! ```
//!
//! Matrix coefficients are given on the upper triangle; an off-diagonal entry
//! `(i, j, v)` stands for `v` at both `(i, j)` and `(j, i)`, so it contributes
//! `2 v X[i, j]` to an inner product.
//!
//! [`solve`] removes the free scalars by Gauss-Jordan elimination and runs an
//! infeasible primal-dual path-following method (HKM direction, Mehrotra
//! predictor-corrector) on the remaining semidefinite program. The Schur
//! complement is factored with faer; block-sized dense algebra uses nalgebra.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use faer::prelude::SpSolver;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIters,
    NumericalFailure,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::MaxIters => "max-iters",
            SolveStatus::NumericalFailure => "numerical-failure",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    pub feas_tol: f64,
    pub gap_tol: f64,
    pub max_iters: usize,
    pub scaling: bool,
    /// Residual level at which a stalled or iteration-capped solve is still
    /// usable by callers (see [`ConicSolution::is_usable`]).
    pub inaccurate_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            feas_tol: 1e-8,
            gap_tol: 1e-8,
            max_iters: 200,
            scaling: true,
            inaccurate_tol: 1e-5,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.feas_tol > 0.0 && self.gap_tol > 0.0 && self.inaccurate_tol > 0.0) {
            return Err(Error::Config("solver tolerances must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        Ok(())
    }

    /// Applies `POLYRECOURSE_FEAS_TOL`, `POLYRECOURSE_GAP_TOL` and
    /// `POLYRECOURSE_MAX_ITERS` overrides when set.
    pub fn from_env(mut self) -> Result<Self> {
        fn parse<T: std::str::FromStr>(key: &str) -> Result<Option<T>> {
            match std::env::var(key) {
                Ok(v) => v
                    .trim()
                    .parse()
                    .map(Some)
                    .map_err(|_| Error::Config(format!("cannot parse {key}={v}"))),
                Err(_) => Ok(None),
            }
        }
        if let Some(v) = parse("POLYRECOURSE_FEAS_TOL")? {
            self.feas_tol = v;
        }
        if let Some(v) = parse("POLYRECOURSE_GAP_TOL")? {
            self.gap_tol = v;
        }
        if let Some(v) = parse("POLYRECOURSE_MAX_ITERS")? {
            self.max_iters = v;
        }
        self.validate()?;
        Ok(self)
    }
}

/// Upper-triangle coefficient of a matrix block (`i <= j`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatEntry {
    pub block: usize,
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

impl MatEntry {
    pub fn new(block: usize, i: usize, j: usize, value: f64) -> Self {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        Self { block, i, j, value }
    }
}

/// One equality `sum_k free_k u_k + <A, X> = rhs`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Row {
    pub free: Vec<(usize, f64)>,
    pub entries: Vec<MatEntry>,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct ConicProgram {
    sense: Sense,
    free_names: Vec<String>,
    free_objective: Vec<f64>,
    blocks: Vec<usize>,
    block_labels: Vec<String>,
    objective_entries: Vec<MatEntry>,
    objective_constant: f64,
    rows: Vec<Row>,
}

impl ConicProgram {
    pub fn new(sense: Sense) -> Self {
        Self {
            sense,
            free_names: Vec::new(),
            free_objective: Vec::new(),
            blocks: Vec::new(),
            block_labels: Vec::new(),
            objective_entries: Vec::new(),
            objective_constant: 0.0,
            rows: Vec::new(),
        }
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn add_free(&mut self, name: impl Into<String>, objective: f64) -> usize {
        self.free_names.push(name.into());
        self.free_objective.push(objective);
        self.free_names.len() - 1
    }

    pub fn add_block(&mut self, size: usize, label: impl Into<String>) -> usize {
        self.blocks.push(size);
        self.block_labels.push(label.into());
        self.blocks.len() - 1
    }

    pub fn add_objective_entry(&mut self, e: MatEntry) -> Result<()> {
        self.check_entry(&e)?;
        self.objective_entries.push(e);
        Ok(())
    }

    pub fn set_objective_constant(&mut self, c: f64) {
        self.objective_constant = c;
    }

    fn check_entry(&self, e: &MatEntry) -> Result<()> {
        let n = *self.blocks.get(e.block).ok_or_else(|| {
            Error::Config(format!("matrix entry references undeclared block {}", e.block))
        })?;
        if e.i > e.j || e.j >= n {
            return Err(Error::Config(format!(
                "entry ({}, {}) outside the upper triangle of block {} (size {n})",
                e.i, e.j, e.block
            )));
        }
        Ok(())
    }

    pub fn add_row(&mut self, row: Row) -> Result<usize> {
        for (k, _) in &row.free {
            if *k >= self.free_names.len() {
                return Err(Error::Config(format!("row references undeclared free variable {k}")));
            }
        }
        for e in &row.entries {
            self.check_entry(e)?;
        }
        self.rows.push(row);
        Ok(self.rows.len() - 1)
    }

    /// Adds `sum_k c_k u_k >= bound` through a 1x1 PSD slack. An infinite
    /// lower bound adds nothing and returns `None`.
    pub fn add_free_inequality(&mut self, coeffs: &[(usize, f64)], bound: f64, label: &str) -> Result<Option<usize>> {
        if bound == f64::NEG_INFINITY {
            return Ok(None);
        }
        if !bound.is_finite() {
            return Err(Error::Config(format!("cut bound {bound} is not finite")));
        }
        let b = self.add_block(1, label);
        let row = Row {
            free: coeffs.to_vec(),
            entries: vec![MatEntry::new(b, 0, 0, -1.0)],
            rhs: bound,
        };
        self.add_row(row).map(Some)
    }

    pub fn num_free(&self) -> usize {
        self.free_names.len()
    }

    pub fn free_names(&self) -> &[String] {
        &self.free_names
    }

    pub fn free_objective(&self) -> &[f64] {
        &self.free_objective
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    pub fn block_labels(&self) -> &[String] {
        &self.block_labels
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn objective_entries(&self) -> &[MatEntry] {
        &self.objective_entries
    }

    pub fn objective_constant(&self) -> f64 {
        self.objective_constant
    }

    /// Objective value at a point.
    pub fn objective_value(&self, free: &[f64], x: &[DMatrix<f64>]) -> f64 {
        let mut v = self.objective_constant;
        for (k, c) in self.free_objective.iter().enumerate() {
            v += c * free[k];
        }
        v + entries_dot(&self.objective_entries, x)
    }

    /// `max_r |B u + A(X) - b|_r` at a point.
    pub fn primal_residual(&self, free: &[f64], x: &[DMatrix<f64>]) -> f64 {
        self.rows
            .iter()
            .map(|r| {
                let lhs: f64 =
                    r.free.iter().map(|(k, c)| c * free[*k]).sum::<f64>() + entries_dot(&r.entries, x);
                (lhs - r.rhs).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Writes the sparse text format documented in the crate README.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let sense = match self.sense {
            Sense::Maximize => "max",
            Sense::Minimize => "min",
        };
        let _ = writeln!(s, "# polyrecourse conic program v1");
        let _ = writeln!(s, "sense {sense}");
        let _ = writeln!(s, "free {}", self.free_names.len());
        let sizes: Vec<String> = self.blocks.iter().map(|b| b.to_string()).collect();
        let _ = writeln!(s, "blocks {} {}", self.blocks.len(), sizes.join(" "));
        let _ = writeln!(s, "rows {}", self.rows.len());
        let _ = writeln!(s, "objconst {:e}", self.objective_constant);
        for (k, c) in self.free_objective.iter().enumerate() {
            if *c != 0.0 {
                let _ = writeln!(s, "objf {k} {c:e}");
            }
        }
        for e in &self.objective_entries {
            let _ = writeln!(s, "objm {} {} {} {:e}", e.block, e.i, e.j, e.value);
        }
        for (r, row) in self.rows.iter().enumerate() {
            let _ = writeln!(s, "rhs {r} {:e}", row.rhs);
            for (k, c) in &row.free {
                let _ = writeln!(s, "f {r} {k} {c:e}");
            }
            for e in &row.entries {
                let _ = writeln!(s, "m {r} {} {} {} {:e}", e.block, e.i, e.j, e.value);
            }
        }
        s
    }
}

/// `<A, X>` for upper-triangle entries with off-diagonal weight 2.
pub fn entries_dot(entries: &[MatEntry], x: &[DMatrix<f64>]) -> f64 {
    entries
        .iter()
        .map(|e| {
            let w = if e.i == e.j { 1.0 } else { 2.0 };
            w * e.value * x[e.block][(e.i, e.j)]
        })
        .sum()
}

/// Size accounting on the moment side: one scalar per equality row, the PSD
/// blocks, their scalarized sizes, and the constraint count (one per
/// scalarized matrix entry plus one per free variable).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct ProgramStats {
    pub scalar_vars: usize,
    pub matrix_blocks: usize,
    pub scalarized_matrix_vars: usize,
    pub constraints: usize,
}

pub fn program_stats(prog: &ConicProgram) -> ProgramStats {
    let scalarized: usize = prog.blocks.iter().map(|n| n * (n + 1) / 2).sum();
    ProgramStats {
        scalar_vars: prog.rows.len(),
        matrix_blocks: prog.blocks.len(),
        scalarized_matrix_vars: scalarized,
        constraints: scalarized + prog.free_names.len(),
    }
}

#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub status: SolveStatus,
    /// Free scalar values `u`.
    pub free: Vec<f64>,
    /// PSD block values `X_j`.
    pub blocks: Vec<DMatrix<f64>>,
    /// Row multipliers `z` of the natural dual (`min b'z` for a maximization).
    pub dual: Vec<f64>,
    /// Dual slack matrices: `A*(z) - C` for a maximization, `C - A*(z)` for a
    /// minimization.
    pub dual_slack: Vec<DMatrix<f64>>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub relative_gap: f64,
    pub iterations: usize,
    pub detail: String,
}

impl ConicSolution {
    fn empty(prog: &ConicProgram, status: SolveStatus, detail: impl Into<String>) -> Self {
        Self {
            status,
            free: vec![0.0; prog.num_free()],
            blocks: prog.blocks.iter().map(|&n| DMatrix::zeros(n, n)).collect(),
            dual: vec![0.0; prog.rows.len()],
            dual_slack: prog.blocks.iter().map(|&n| DMatrix::zeros(n, n)).collect(),
            primal_objective: f64::NAN,
            dual_objective: f64::NAN,
            primal_infeasibility: f64::NAN,
            dual_infeasibility: f64::NAN,
            relative_gap: f64::NAN,
            iterations: 0,
            detail: detail.into(),
        }
    }

    /// Optimal, or stopped early with every residual below `cfg.inaccurate_tol`.
    pub fn is_usable(&self, cfg: &SolverConfig) -> bool {
        match self.status {
            SolveStatus::Optimal => true,
            SolveStatus::MaxIters | SolveStatus::NumericalFailure => {
                self.primal_infeasibility <= cfg.inaccurate_tol
                    && self.dual_infeasibility <= cfg.inaccurate_tol
                    && self.relative_gap <= cfg.inaccurate_tol
            }
            _ => false,
        }
    }

    /// Turns an unusable solve into an error.
    pub fn require_usable(self, cfg: &SolverConfig) -> Result<Self> {
        if self.is_usable(cfg) {
            Ok(self)
        } else {
            Err(Error::Solver {
                status: self.status,
                detail: format!(
                    "{} (pinf {:.2e}, dinf {:.2e}, gap {:.2e})",
                    self.detail, self.primal_infeasibility, self.dual_infeasibility, self.relative_gap
                ),
            })
        }
    }
}

// ---------------------------------------------------------------------------
// Presolve: eliminate free variables.

#[derive(Clone, Default)]
struct WorkRow {
    free: BTreeMap<usize, f64>,
    mats: BTreeMap<(usize, usize, usize), f64>,
    rhs: f64,
    /// Combination of original rows producing this row.
    origin: BTreeMap<usize, f64>,
}

impl WorkRow {
    fn axpy(&mut self, s: f64, other: &WorkRow) {
        for (k, v) in &other.free {
            *self.free.entry(*k).or_insert(0.0) += s * v;
        }
        self.free.retain(|_, v| v.abs() > 1e-13);
        for (k, v) in &other.mats {
            *self.mats.entry(*k).or_insert(0.0) += s * v;
        }
        self.mats.retain(|_, v| v.abs() > 1e-15);
        self.rhs += s * other.rhs;
        for (k, v) in &other.origin {
            *self.origin.entry(*k).or_insert(0.0) += s * v;
        }
    }

    fn scale(&mut self, s: f64) {
        self.free.values_mut().for_each(|v| *v *= s);
        self.mats.values_mut().for_each(|v| *v *= s);
        self.rhs *= s;
        self.origin.values_mut().for_each(|v| *v *= s);
    }
}

fn work_row(r: &Row, idx: usize) -> WorkRow {
    let mut w = WorkRow {
        rhs: r.rhs,
        ..Default::default()
    };
    for (k, v) in &r.free {
        *w.free.entry(*k).or_insert(0.0) += v;
    }
    for e in &r.entries {
        *w.mats.entry((e.block, e.i, e.j)).or_insert(0.0) += e.value;
    }
    w.free.retain(|_, v| *v != 0.0);
    w.mats.retain(|_, v| *v != 0.0);
    w.origin.insert(idx, 1.0);
    w
}

struct Presolved {
    /// Reduced rows: (original work row, mats) in the order fed to the IPM.
    reduced: Vec<WorkRow>,
    /// Objective over X after substitution (sense of the original program).
    objective: BTreeMap<(usize, usize, usize), f64>,
    /// Pivot row for each free variable, or `None` when it is set to zero.
    pivots: Vec<Option<WorkRow>>,
}

enum PresolveOutcome {
    Reduced(Presolved),
    Infeasible(String),
    Unbounded(String),
}

fn presolve(prog: &ConicProgram) -> PresolveOutcome {
    let nfree = prog.num_free();
    let mut rows: Vec<WorkRow> = prog.rows.iter().enumerate().map(|(i, r)| work_row(r, i)).collect();
    let mut cols: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); nfree];
    for (i, r) in rows.iter().enumerate() {
        for k in r.free.keys() {
            cols[*k].insert(i);
        }
    }
    let mut obj = WorkRow::default();
    for (k, c) in prog.free_objective.iter().enumerate() {
        if *c != 0.0 {
            obj.free.insert(k, *c);
        }
    }
    for e in &prog.objective_entries {
        *obj.mats.entry((e.block, e.i, e.j)).or_insert(0.0) += e.value;
    }
    let mut is_pivot = vec![false; rows.len()];
    let mut pivot_row: Vec<Option<usize>> = vec![None; nfree];

    for j in 0..nfree {
        let cand = cols[j]
            .iter()
            .copied()
            .filter(|&r| !is_pivot[r])
            .max_by(|&a, &b| {
                let va = rows[a].free.get(&j).copied().unwrap_or(0.0).abs();
                let vb = rows[b].free.get(&j).copied().unwrap_or(0.0).abs();
                va.partial_cmp(&vb).unwrap_or(std::cmp::Ordering::Equal).then(b.cmp(&a))
            });
        let Some(r) = cand else { continue };
        let a = rows[r].free[&j];
        rows[r].scale(1.0 / a);
        is_pivot[r] = true;
        pivot_row[j] = Some(r);
        let pr = rows[r].clone();
        let targets: Vec<usize> = cols[j].iter().copied().filter(|&i| i != r).collect();
        for i in targets {
            let c = rows[i].free.get(&j).copied().unwrap_or(0.0);
            if c == 0.0 {
                continue;
            }
            let before: Vec<usize> = rows[i].free.keys().copied().collect();
            rows[i].axpy(-c, &pr);
            for k in before {
                if !rows[i].free.contains_key(&k) {
                    cols[k].remove(&i);
                }
            }
            for k in rows[i].free.keys() {
                cols[*k].insert(i);
            }
            rows[i].free.remove(&j);
            cols[j].remove(&i);
        }
        cols[j].retain(|&i| i == r);
        if let Some(c) = obj.free.get(&j).copied() {
            obj.axpy(-c, &pr);
            obj.rhs = 0.0;
            obj.free.remove(&j);
        }
    }

    for (k, c) in &obj.free {
        if c.abs() > 1e-9 {
            return PresolveOutcome::Unbounded(format!(
                "free variable `{}` has objective weight {c:e} but is otherwise unconstrained",
                prog.free_names[*k]
            ));
        }
    }

    let bnorm = prog.rows.iter().map(|r| r.rhs.abs()).fold(1.0, f64::max);
    let mut reduced = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        if is_pivot[i] {
            continue;
        }
        debug_assert!(r.free.is_empty());
        if r.mats.is_empty() {
            if r.rhs.abs() > 1e-9 * bnorm {
                return PresolveOutcome::Infeasible(format!(
                    "row {i} reduces to 0 = {:e}",
                    r.rhs
                ));
            }
            continue;
        }
        reduced.push(r.clone());
    }
    let pivots = pivot_row.iter().map(|p| p.map(|r| rows[r].clone())).collect();
    PresolveOutcome::Reduced(Presolved {
        reduced,
        objective: obj.mats,
        pivots,
    })
}

// ---------------------------------------------------------------------------
// Interior point method for  min <C,X>  s.t.  A(X) = b,  X PSD.

struct Sdp {
    sizes: Vec<usize>,
    m: usize,
    /// Per block: (row, full symmetric entries (p, q, a)).
    block_rows: Vec<Vec<(usize, Vec<(u32, u32, f64)>)>>,
    c: Vec<DMatrix<f64>>,
    b: DVector<f64>,
}

impl Sdp {
    fn op(&self, x: &[DMatrix<f64>]) -> DVector<f64> {
        let mut out = DVector::zeros(self.m);
        for (blk, rows) in self.block_rows.iter().enumerate() {
            let xb = &x[blk];
            for (r, ents) in rows {
                let mut s = 0.0;
                for &(p, q, a) in ents {
                    s += a * xb[(p as usize, q as usize)];
                }
                out[*r] += s;
            }
        }
        out
    }

    /// `A(M)` for a possibly non-symmetric `M` (only the symmetric part counts).
    fn op_nonsym(&self, x: &[DMatrix<f64>]) -> DVector<f64> {
        self.op(x)
    }

    fn adjoint(&self, y: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let mut out: Vec<DMatrix<f64>> = self.sizes.iter().map(|&n| DMatrix::zeros(n, n)).collect();
        for (blk, rows) in self.block_rows.iter().enumerate() {
            let ob = &mut out[blk];
            for (r, ents) in rows {
                let yr = y[*r];
                if yr == 0.0 {
                    continue;
                }
                for &(p, q, a) in ents {
                    ob[(p as usize, q as usize)] += yr * a;
                }
            }
        }
        out
    }

    fn dim(&self) -> usize {
        self.sizes.iter().sum()
    }
}

fn dot(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn fro(a: &[DMatrix<f64>]) -> f64 {
    a.iter().map(|x| x.norm_squared()).sum::<f64>().sqrt()
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Largest `a <= 1` scaled by `gamma` keeping `x + a dx` PSD, from the
/// eigenvalues of `L^{-1} dx L^{-T}`.
fn max_step(x: &[DMatrix<f64>], dx: &[DMatrix<f64>]) -> Option<f64> {
    let mut amax = f64::INFINITY;
    for (xb, db) in x.iter().zip(dx) {
        let n = xb.nrows();
        if n == 0 {
            continue;
        }
        if n == 1 {
            let (v, d) = (xb[(0, 0)], db[(0, 0)]);
            if d < 0.0 {
                amax = amax.min(-v / d);
            }
            continue;
        }
        let chol = nalgebra::Cholesky::new(xb.clone())?;
        let l = chol.l();
        let mut t = db.clone();
        l.solve_lower_triangular_mut(&mut t);
        let mut tt = t.transpose();
        l.solve_lower_triangular_mut(&mut tt);
        let ev = nalgebra::SymmetricEigen::new(sym(&tt)).eigenvalues;
        let lmin = ev.iter().copied().fold(f64::INFINITY, f64::min);
        if lmin < 0.0 {
            amax = amax.min(-1.0 / lmin);
        }
    }
    Some(amax)
}

/// `x + a dx` for the largest `a` in `a0, 0.8 a0, ...` whose blocks all
/// admit a Cholesky factorization.
fn backtrack(x: &[DMatrix<f64>], dx: &[DMatrix<f64>], a0: f64) -> Option<(Vec<DMatrix<f64>>, f64)> {
    let mut a = a0;
    for _ in 0..30 {
        let next: Vec<DMatrix<f64>> = x.iter().zip(dx).map(|(xb, db)| sym(&(xb + db * a))).collect();
        if next.iter().all(|b| b.nrows() == 0 || nalgebra::Cholesky::new(b.clone()).is_some()) {
            return Some((next, a));
        }
        a *= 0.8;
    }
    None
}

fn inverse_spd(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let c = nalgebra::Cholesky::new(m.clone())?;
    Some(c.inverse())
}

struct IpmOut {
    x: Vec<DMatrix<f64>>,
    y: DVector<f64>,
    status: SolveStatus,
    iters: usize,
    pinf: f64,
    dinf: f64,
    gap: f64,
    detail: String,
}

fn assemble_schur(sdp: &Sdp, x: &[DMatrix<f64>], w: &[DMatrix<f64>]) -> Vec<f64> {
    let m = sdp.m;
    let mut mm = vec![0.0; m * m];
    for (blk, rows) in sdp.block_rows.iter().enumerate() {
        let n = sdp.sizes[blk];
        let xb = &x[blk];
        let wb = &w[blk];
        let dense_cut = 2 * n.max(4);
        let is_dense: Vec<bool> = rows.iter().map(|(_, e)| e.len() > dense_cut).collect();
        for (ii, (ri, ei)) in rows.iter().enumerate() {
            if is_dense[ii] {
                let mut a = DMatrix::zeros(n, n);
                for &(p, q, v) in ei {
                    a[(p as usize, q as usize)] += v;
                }
                let g = xb * a * wb;
                for (jj, (rj, ej)) in rows.iter().enumerate() {
                    if is_dense[jj] && jj < ii {
                        continue;
                    }
                    let mut s = 0.0;
                    for &(r, c, v) in ej {
                        s += v * g[(r as usize, c as usize)];
                    }
                    mm[ri * m + rj] += s;
                    if ri != rj {
                        mm[rj * m + ri] += s;
                    }
                }
            } else {
                for (jj, (rj, ej)) in rows.iter().enumerate().skip(ii) {
                    if is_dense[jj] {
                        continue;
                    }
                    let mut s = 0.0;
                    for &(p, q, a) in ei {
                        for &(r, c, v) in ej {
                            s += a * v * xb[(p as usize, r as usize)] * wb[(c as usize, q as usize)];
                        }
                    }
                    mm[ri * m + rj] += s;
                    if ri != rj {
                        mm[rj * m + ri] += s;
                    }
                }
            }
        }
    }
    mm
}

struct Best {
    score: f64,
    x: Vec<DMatrix<f64>>,
    y: DVector<f64>,
    iters: usize,
    res: (f64, f64, f64),
}

/// Failure exit: the iterate with the smallest residuals seen so far.
fn finish(best: Option<Best>, x: Vec<DMatrix<f64>>, y: DVector<f64>, iters: usize, res: (f64, f64, f64), detail: &str) -> IpmOut {
    let score = res.0.max(res.1).max(res.2);
    let (x, y, iters, (pinf, dinf, gap)) = match best {
        Some(b) if b.score < score || !score.is_finite() => (b.x, b.y, b.iters, b.res),
        _ => (x, y, iters, res),
    };
    IpmOut { x, y, status: SolveStatus::NumericalFailure, iters, pinf, dinf, gap, detail: detail.into() }
}

fn ipm(sdp: &Sdp, cfg: &SolverConfig) -> IpmOut {
    let m = sdp.m;
    let ntot = sdp.dim().max(1) as f64;
    let nb = sdp.sizes.len();
    let bnorm = sdp.b.norm();
    let cnorm = fro(&sdp.c);

    // Row norms per block for the starting point.
    let mut row_block_norm = vec![vec![0.0; nb]; m];
    for (blk, rows) in sdp.block_rows.iter().enumerate() {
        for (r, e) in rows {
            row_block_norm[*r][blk] = e.iter().map(|t| t.2 * t.2).sum::<f64>().sqrt();
        }
    }
    let mut x: Vec<DMatrix<f64>> = Vec::with_capacity(nb);
    let mut z: Vec<DMatrix<f64>> = Vec::with_capacity(nb);
    for blk in 0..nb {
        let n = sdp.sizes[blk] as f64;
        let mut zeta: f64 = 10.0f64.max(n.sqrt());
        let mut eta: f64 = 10.0f64.max(n.sqrt()).max(sdp.c[blk].norm());
        for r in 0..m {
            let a = row_block_norm[r][blk];
            if a > 0.0 {
                zeta = zeta.max(n * (1.0 + sdp.b[r].abs()) / (1.0 + a));
                eta = eta.max(a);
            }
        }
        x.push(DMatrix::identity(sdp.sizes[blk], sdp.sizes[blk]) * zeta);
        z.push(DMatrix::identity(sdp.sizes[blk], sdp.sizes[blk]) * eta);
    }
    let mut y = DVector::zeros(m);
    let (mut ap_prev, mut ad_prev) = (1.0f64, 1.0f64);
    let mut stall = 0usize;
    let mut last = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut best: Option<Best> = None;
    let mut since_progress = 0usize;

    for iter in 0..cfg.max_iters {
        let ax = sdp.op(&x);
        let rp = &sdp.b - &ax;
        let aty = sdp.adjoint(&y);
        let rd: Vec<DMatrix<f64>> = (0..nb).map(|k| &sdp.c[k] - &z[k] - &aty[k]).collect();
        let pobj = dot(&sdp.c, &x);
        let dobj = sdp.b.dot(&y);
        let pinf = rp.norm() / (1.0 + bnorm);
        let dinf = fro(&rd) / (1.0 + cnorm);
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        let mu = dot(&x, &z) / ntot;
        last = (pinf, dinf, gap);
        let score = pinf.max(dinf).max(gap);
        if best.as_ref().map_or(true, |b| score < b.score) {
            since_progress = 0;
            best = Some(Best { score, x: x.clone(), y: y.clone(), iters: iter, res: (pinf, dinf, gap) });
        } else {
            since_progress += 1;
            if since_progress >= 15 {
                return finish(best, x, y, iter, last, "no progress in 15 iterations");
            }
        }
        log::trace!("ipm {iter:3} pobj {pobj:+.8e} dobj {dobj:+.8e} pinf {pinf:.1e} dinf {dinf:.1e} gap {gap:.1e}");
        if pinf <= cfg.feas_tol && dinf <= cfg.feas_tol && gap <= cfg.gap_tol {
            return IpmOut { x, y, status: SolveStatus::Optimal, iters: iter, pinf, dinf, gap, detail: "converged".into() };
        }
        // Infeasibility certificates from diverging iterates.
        if dobj > 0.0 {
            let ray: Vec<DMatrix<f64>> = (0..nb).map(|k| &aty[k] + &z[k]).collect();
            if fro(&ray) / dobj < 1e-8 && dobj > 1e6 {
                return IpmOut { x, y, status: SolveStatus::Infeasible, iters: iter, pinf, dinf, gap, detail: "dual ray certifies primal infeasibility".into() };
            }
        }
        if pobj < 0.0 && ax.norm() / (-pobj) < 1e-8 && -pobj > 1e6 {
            return IpmOut { x, y, status: SolveStatus::Unbounded, iters: iter, pinf, dinf, gap, detail: "primal ray certifies dual infeasibility".into() };
        }

        let Some(w) = z.iter().map(inverse_spd).collect::<Option<Vec<_>>>() else {
            return finish(best, x, y, iter, (pinf, dinf, gap), "dual slack lost definiteness");
        };
        let mm = assemble_schur(sdp, &x, &w);
        let maxdiag = (0..m).map(|i| mm[i * m + i]).fold(0.0, f64::max).max(1e-300);
        let chol = {
            let mut reg = 0.0;
            let mut out = None;
            for _ in 0..6 {
                let fm = faer::Mat::<f64>::from_fn(m, m, |i, j| mm[i * m + j] + if i == j { reg } else { 0.0 });
                if let Ok(c) = fm.cholesky(faer::Side::Lower) {
                    out = Some(c);
                    break;
                }
                reg = if reg == 0.0 { 1e-14 * maxdiag } else { reg * 100.0 };
            }
            out
        };
        let Some(chol) = chol else {
            return finish(best, x, y, iter, (pinf, dinf, gap), "Schur complement not positive definite");
        };
        let base = |rhs: &DVector<f64>| -> DVector<f64> {
            let mut col = faer::Mat::<f64>::from_fn(m, 1, |i, _| rhs[i]);
            chol.solve_in_place(col.as_mut());
            DVector::from_fn(m, |i, _| col.read(i, 0))
        };
        // Iterative refinement against the unregularized Schur matrix.
        let solve = |rhs: &DVector<f64>| -> DVector<f64> {
            let mut dy = base(rhs);
            let target = 1e-15 * rhs.norm();
            for _ in 0..3 {
                let r = DVector::from_fn(m, |i, _| rhs[i] - (0..m).map(|j| mm[i * m + j] * dy[j]).sum::<f64>());
                if r.norm() <= target {
                    break;
                }
                dy += base(&r);
            }
            dy
        };

        let xrdw: Vec<DMatrix<f64>> = (0..nb).map(|k| &x[k] * &rd[k] * &w[k]).collect();
        let a_xrdw = sdp.op_nonsym(&xrdw);
        let a_w = sdp.op(&w);

        let direction = |sigma: f64, corr: Option<&Vec<DMatrix<f64>>>| {
            let mut rhs = &sdp.b - &a_w * (sigma * mu) + &a_xrdw;
            if let Some(c) = corr {
                rhs += sdp.op_nonsym(c);
            }
            let dy = solve(&rhs);
            let atdy = sdp.adjoint(&dy);
            let dz: Vec<DMatrix<f64>> = (0..nb).map(|k| &rd[k] - &atdy[k]).collect();
            let dx: Vec<DMatrix<f64>> = (0..nb)
                .map(|k| {
                    let mut d = &w[k] * (sigma * mu) - &x[k] - &x[k] * &dz[k] * &w[k];
                    if let Some(c) = corr {
                        d -= &c[k];
                    }
                    sym(&d)
                })
                .collect();
            (dx, dy, dz)
        };

        // Predictor.
        let (dxp, _dyp, dzp) = direction(0.0, None);
        let (Some(apm), Some(adm)) = (max_step(&x, &dxp), max_step(&z, &dzp)) else {
            return finish(best, x, y, iter, (pinf, dinf, gap), "iterate lost definiteness");
        };
        let ap = 1.0f64.min(apm);
        let ad = 1.0f64.min(adm);
        let mut xa = 0.0;
        for k in 0..nb {
            xa += (&x[k] + &dxp[k] * ap).dot(&(&z[k] + &dzp[k] * ad));
        }
        let mu_aff = xa / ntot;
        let expon = if mu > 1e-6 { (3.0 * ap.min(ad).powi(2)).max(1.0) } else { 3.0 };
        let sigma = (mu_aff / mu).max(0.0).powf(expon).min(1.0);

        // Corrector.
        let corr: Vec<DMatrix<f64>> = (0..nb).map(|k| &dxp[k] * &dzp[k] * &w[k]).collect();
        let (dx, dy, dz) = direction(sigma, Some(&corr));
        let (Some(apm), Some(adm)) = (max_step(&x, &dx), max_step(&z, &dz)) else {
            return finish(best, x, y, iter, (pinf, dinf, gap), "iterate lost definiteness");
        };
        let gamma = 0.9 + 0.09 * ap_prev.min(ad_prev);
        let (Some((xn, ap)), Some((zn, ad))) = (
            backtrack(&x, &dx, 1.0f64.min(gamma * apm)),
            backtrack(&z, &dz, 1.0f64.min(gamma * adm)),
        ) else {
            return finish(best, x, y, iter, (pinf, dinf, gap), "no step keeps the iterate definite");
        };
        x = xn;
        z = zn;
        y += &dy * ad;
        ap_prev = ap;
        ad_prev = ad;
        if ap < 1e-7 && ad < 1e-7 {
            stall += 1;
            if stall >= 3 {
                let (pinf, dinf, gap) = last;
                return finish(best, x, y, iter + 1, (pinf, dinf, gap), "step lengths stalled");
            }
        } else {
            stall = 0;
        }
    }
    let mut out = finish(best, x, y, cfg.max_iters, last, "iteration limit reached");
    out.status = SolveStatus::MaxIters;
    out
}

// ---------------------------------------------------------------------------

/// Solves a conic program. Never panics on numerical trouble; the status and
/// residual fields report what happened.
pub fn solve(prog: &ConicProgram, cfg: &SolverConfig) -> ConicSolution {
    let pre = match presolve(prog) {
        PresolveOutcome::Reduced(p) => p,
        PresolveOutcome::Infeasible(d) => return ConicSolution::empty(prog, SolveStatus::Infeasible, d),
        PresolveOutcome::Unbounded(d) => return ConicSolution::empty(prog, SolveStatus::Unbounded, d),
    };
    let nb = prog.blocks.len();
    let m = pre.reduced.len();
    let sign = match prog.sense {
        Sense::Maximize => -1.0,
        Sense::Minimize => 1.0,
    };

    // Row scaling.
    let row_scale: Vec<f64> = pre
        .reduced
        .iter()
        .map(|r| {
            if !cfg.scaling {
                return 1.0;
            }
            let n2: f64 = r
                .mats
                .iter()
                .map(|((_, i, j), v)| if i == j { v * v } else { 2.0 * v * v })
                .sum();
            1.0 / n2.sqrt().max(1e-300)
        })
        .collect();
    let mut block_rows: Vec<Vec<(usize, Vec<(u32, u32, f64)>)>> = vec![Vec::new(); nb];
    let mut b = DVector::zeros(m);
    for (r, row) in pre.reduced.iter().enumerate() {
        let s = row_scale[r];
        b[r] = row.rhs * s;
        let mut per_block: BTreeMap<usize, Vec<(u32, u32, f64)>> = BTreeMap::new();
        let mut keys: Vec<_> = row.mats.iter().collect();
        keys.sort_by(|a, b| a.0.cmp(b.0));
        for ((blk, i, j), v) in keys {
            let e = per_block.entry(*blk).or_default();
            e.push((*i as u32, *j as u32, v * s));
            if i != j {
                e.push((*j as u32, *i as u32, v * s));
            }
        }
        for (blk, e) in per_block {
            block_rows[blk].push((r, e));
        }
    }
    let mut c: Vec<DMatrix<f64>> = prog.blocks.iter().map(|&n| DMatrix::zeros(n, n)).collect();
    for ((blk, i, j), v) in &pre.objective {
        c[*blk][(*i, *j)] += sign * v;
        if i != j {
            c[*blk][(*j, *i)] += sign * v;
        }
    }
    let bscale = if cfg.scaling { b.norm().max(1.0) } else { 1.0 };
    let cscale = if cfg.scaling { fro(&c).max(1.0) } else { 1.0 };
    b /= bscale;
    for cb in c.iter_mut() {
        *cb /= cscale;
    }
    let sdp = Sdp {
        sizes: prog.blocks.clone(),
        m,
        block_rows,
        c,
        b,
    };
    let out = if m == 0 && fro(&sdp.c) == 0.0 {
        IpmOut {
            x: prog.blocks.iter().map(|&n| DMatrix::zeros(n, n)).collect(),
            y: DVector::zeros(0),
            status: SolveStatus::Optimal,
            iters: 0,
            pinf: 0.0,
            dinf: 0.0,
            gap: 0.0,
            detail: "trivial program".into(),
        }
    } else {
        ipm(&sdp, cfg)
    };

    // Unscale.
    let x: Vec<DMatrix<f64>> = out.x.iter().map(|xb| sym(xb) * bscale).collect();
    let y_red: Vec<f64> = (0..m).map(|r| out.y[r] * cscale * row_scale[r]).collect();

    // Recover free variables from pivot rows.
    let mut free = vec![0.0; prog.num_free()];
    for (j, p) in pre.pivots.iter().enumerate() {
        if let Some(row) = p {
            let mut v = row.rhs;
            for ((blk, i, k), a) in &row.mats {
                let w = if i == k { 1.0 } else { 2.0 };
                v -= w * a * x[*blk][(*i, *k)];
            }
            free[j] = v;
        }
    }
    // Row multipliers of the original program.
    let mut dual = vec![0.0; prog.rows.len()];
    for (r, row) in pre.reduced.iter().enumerate() {
        let wv = sign * y_red[r];
        for (k, t) in &row.origin {
            dual[*k] += wv * t;
        }
    }
    for (j, p) in pre.pivots.iter().enumerate() {
        if let Some(row) = p {
            let wv = prog.free_objective[j];
            for (k, t) in &row.origin {
                dual[*k] += wv * t;
            }
        }
    }
    let mut slack: Vec<DMatrix<f64>> = prog.blocks.iter().map(|&n| DMatrix::zeros(n, n)).collect();
    for (r, row) in prog.rows.iter().enumerate() {
        for e in &row.entries {
            slack[e.block][(e.i, e.j)] += dual[r] * e.value;
            if e.i != e.j {
                slack[e.block][(e.j, e.i)] += dual[r] * e.value;
            }
        }
    }
    for e in &prog.objective_entries {
        slack[e.block][(e.i, e.j)] -= e.value;
        if e.i != e.j {
            slack[e.block][(e.j, e.i)] -= e.value;
        }
    }
    if prog.sense == Sense::Minimize {
        for s in slack.iter_mut() {
            *s *= -1.0;
        }
    }
    let primal_objective = prog.objective_value(&free, &x);
    let dual_objective =
        prog.objective_constant + prog.rows.iter().zip(&dual).map(|(r, z)| r.rhs * z).sum::<f64>();
    ConicSolution {
        status: out.status,
        free,
        blocks: x,
        dual,
        dual_slack: slack,
        primal_objective,
        dual_objective,
        primal_infeasibility: out.pinf,
        dual_infeasibility: out.dinf,
        relative_gap: out.gap,
        iterations: out.iters,
        detail: out.detail,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn min_eig(m: &DMatrix<f64>) -> f64 {
        if m.nrows() == 0 {
            return 0.0;
        }
        nalgebra::SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// max gamma s.t. (w-1)^2 - gamma = [1 w] X [1 w]^T.
    fn sos_square() -> ConicProgram {
        let mut p = ConicProgram::new(Sense::Maximize);
        let g = p.add_free("gamma", 1.0);
        let b = p.add_block(2, "sigma0");
        p.add_row(Row { free: vec![(g, 1.0)], entries: vec![MatEntry::new(b, 0, 0, 1.0)], rhs: 1.0 }).unwrap();
        p.add_row(Row { free: vec![], entries: vec![MatEntry::new(b, 0, 1, 1.0)], rhs: -2.0 }).unwrap();
        p.add_row(Row { free: vec![], entries: vec![MatEntry::new(b, 1, 1, 1.0)], rhs: 1.0 }).unwrap();
        p
    }

    #[test]
    fn sos_bound_of_a_square_is_zero() {
        let p = sos_square();
        let cfg = SolverConfig::default();
        let s = solve(&p, &cfg);
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!(s.primal_objective.abs() < 1e-7, "{}", s.primal_objective);
        assert!((s.primal_objective - s.dual_objective).abs() < 1e-7);
        // moments of the Dirac at w = 1
        assert!((s.dual[0] - 1.0).abs() < 1e-6);
        // singular optimum: moment error scales like the square root of the gap
        assert!((s.dual[1] - 1.0).abs() < 1e-3, "{:?}", s.dual);
        assert!(p.primal_residual(&s.free, &s.blocks) < 1e-6);
        assert!(min_eig(&s.blocks[0]) > -1e-7);
    }

    #[test]
    fn zero_equals_one_is_infeasible() {
        let mut p = ConicProgram::new(Sense::Maximize);
        p.add_block(1, "x");
        p.add_row(Row { free: vec![], entries: vec![], rhs: 1.0 }).unwrap();
        assert_eq!(solve(&p, &SolverConfig::default()).status, SolveStatus::Infeasible);
    }

    #[test]
    fn psd_infeasibility_is_detected() {
        // X11 = -1 with X PSD.
        let mut p = ConicProgram::new(Sense::Minimize);
        let b = p.add_block(2, "x");
        p.add_objective_entry(MatEntry::new(b, 0, 0, 1.0)).unwrap();
        p.add_row(Row { free: vec![], entries: vec![MatEntry::new(b, 0, 0, 1.0)], rhs: -1.0 }).unwrap();
        let s = solve(&p, &SolverConfig::default());
        assert_eq!(s.status, SolveStatus::Infeasible, "{s:?}");
    }

    #[test]
    fn unboundedness_is_detected() {
        // max X22 s.t. X11 = 1.
        let mut p = ConicProgram::new(Sense::Maximize);
        let b = p.add_block(2, "x");
        p.add_objective_entry(MatEntry::new(b, 1, 1, 1.0)).unwrap();
        p.add_row(Row { free: vec![], entries: vec![MatEntry::new(b, 0, 0, 1.0)], rhs: 1.0 }).unwrap();
        let s = solve(&p, &SolverConfig::default());
        assert_eq!(s.status, SolveStatus::Unbounded, "{s:?}");
    }

    #[test]
    fn free_variable_without_rows_is_unbounded() {
        let mut p = ConicProgram::new(Sense::Maximize);
        p.add_free("u", 1.0);
        assert_eq!(solve(&p, &SolverConfig::default()).status, SolveStatus::Unbounded);
    }

    #[test]
    fn small_sdp_matches_eigenvalue() {
        // min <C, X> s.t. tr X = 1 gives lambda_min(C).
        let cm = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]);
        let mut p = ConicProgram::new(Sense::Minimize);
        let b = p.add_block(3, "x");
        for i in 0..3 {
            for j in i..3 {
                if cm[(i, j)] != 0.0 {
                    p.add_objective_entry(MatEntry::new(b, i, j, cm[(i, j)])).unwrap();
                }
            }
        }
        p.add_row(Row {
            free: vec![],
            entries: (0..3).map(|i| MatEntry::new(b, i, i, 1.0)).collect(),
            rhs: 1.0,
        })
        .unwrap();
        let s = solve(&p, &SolverConfig::default());
        assert_eq!(s.status, SolveStatus::Optimal);
        let lmin = 2.0 - 2f64.sqrt();
        assert!((s.primal_objective - lmin).abs() < 1e-7);
        assert!((s.dual_objective - lmin).abs() < 1e-7);
        assert!(min_eig(&s.dual_slack[0]) > -1e-7);
    }

    #[test]
    fn free_inequality_with_infinite_bound_is_skipped() {
        let mut p = sos_square();
        assert!(p.add_free_inequality(&[(0, 1.0)], f64::NEG_INFINITY, "cut").unwrap().is_none());
        assert_eq!(p.rows().len(), 3);
        let r = p.add_free_inequality(&[(0, 1.0)], -1.0, "cut").unwrap();
        assert!(r.is_some());
        let s = solve(&p, &SolverConfig::default());
        assert!(s.primal_objective.abs() < 1e-7);
    }

    #[test]
    fn binding_cut_on_free_variable() {
        // max u s.t. u <= 2 written as -u >= -2, plus u + X = 5.
        let mut p = ConicProgram::new(Sense::Maximize);
        let u = p.add_free("u", 1.0);
        let b = p.add_block(1, "x");
        p.add_row(Row { free: vec![(u, 1.0)], entries: vec![MatEntry::new(b, 0, 0, 1.0)], rhs: 5.0 }).unwrap();
        p.add_free_inequality(&[(u, -1.0)], -2.0, "cut").unwrap();
        let s = solve(&p, &SolverConfig::default());
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.free[0] - 2.0).abs() < 1e-6);
        assert!((s.dual_objective - 2.0).abs() < 1e-6);
        assert!(p.primal_residual(&s.free, &s.blocks) < 1e-6);
    }

    #[test]
    fn stats_of_empty_program_are_zero() {
        let p = ConicProgram::new(Sense::Maximize);
        assert_eq!(program_stats(&p), ProgramStats::default());
    }

    #[test]
    fn text_dump_lists_every_row() {
        let p = sos_square();
        let t = p.to_text();
        assert!(t.contains("blocks 1 2"));
        assert_eq!(t.lines().filter(|l| l.starts_with("rhs ")).count(), 3);
    }

    #[test]
    fn deterministic_objective() {
        let p = sos_square();
        let a = solve(&p, &SolverConfig::default());
        let b = solve(&p, &SolverConfig::default());
        assert_eq!(a.primal_objective.to_bits(), b.primal_objective.to_bits());
        assert_eq!(a.status, b.status);
    }
}
