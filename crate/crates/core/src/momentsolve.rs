//! Moment relaxations of polynomial optimization problems
//! `min f(w) s.t. g(w) >= 0`, flat-truncation checks and extraction of
//! minimizers from a flat moment matrix.
//!
//! The relaxation of order `k` is solved in its SOS form
//! `max gamma s.t. f - gamma in Q<g>_{2k}`; the moment sequence `z` is read
//! off the dual multipliers of the coefficient-matching rows.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::conic::{self, ConicProgram, ConicSolution, Sense, SolveStatus, SolverConfig};
use crate::error::{Error, Result};
use crate::polyalg::{Exponent, MonomialBasis, Polynomial, VariableSpace};
use crate::sosrelax::{degree_d3, qmod_membership, QmodLayout, SemialgebraicSet, SetTag, Truncation};

/// Finitely many moments `z_a`, indexed by exponent.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedMomentSequence {
    space: VariableSpace,
    values: HashMap<Exponent, f64>,
}

impl TruncatedMomentSequence {
    pub fn new(space: VariableSpace, values: impl IntoIterator<Item = (Exponent, f64)>) -> Self {
        Self {
            space,
            values: values.into_iter().collect(),
        }
    }

    /// Moments of `sum_k w_k delta_{p_k}` up to degree `d`.
    pub fn from_atoms(space: VariableSpace, points: &[Vec<f64>], weights: &[f64], d: u32) -> Self {
        let vals = crate::polyalg::exponents_up_to(space.dim(), d)
            .into_iter()
            .map(|e| {
                let v = points.iter().zip(weights).map(|(p, w)| w * e.eval(p)).sum();
                (e, v)
            })
            .collect::<Vec<_>>();
        Self::new(space, vals)
    }

    pub fn space(&self) -> &VariableSpace {
        &self.space
    }

    pub fn get(&self, e: &Exponent) -> Option<f64> {
        self.values.get(e).copied()
    }

    fn require(&self, e: &Exponent) -> Result<f64> {
        self.get(e).ok_or_else(|| Error::DegreeOverflow {
            monomial: e.display(&self.space),
            degree: e.degree(),
            max: self.degree(),
        })
    }

    /// Largest `d` such that every moment of degree `<= d` is present.
    pub fn degree(&self) -> u32 {
        let n = self.space.dim();
        let mut d = 0;
        loop {
            let next = crate::polyalg::exponents_up_to(n, d + 1);
            if next.iter().all(|e| self.values.contains_key(e)) {
                d += 1;
                if d > 64 {
                    return d;
                }
            } else {
                return d;
            }
        }
    }

    /// The Riesz functional `<p, z> = sum_a p_a z_a`.
    pub fn pairing(&self, p: &Polynomial) -> Result<f64> {
        let p = p.transfer(&self.space)?;
        let mut s = 0.0;
        for (e, c) in p.terms() {
            s += c * self.require(e)?;
        }
        Ok(s)
    }

    /// `M_t[i, j] = z_{b_i + b_j}` over `[w]_t`.
    pub fn moment_matrix(&self, t: u32) -> Result<(MonomialBasis, DMatrix<f64>)> {
        let basis = MonomialBasis::full(&self.space, t);
        let n = basis.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = self.require(&basis.get(i).add(basis.get(j)))?;
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Ok((basis, m))
    }

    /// `L_g[i, j] = <g b_i b_j, z>` over `[w]_{t - ceil(deg g / 2)}`.
    pub fn localizing_matrix(&self, g: &Polynomial, t: u32) -> Result<(MonomialBasis, DMatrix<f64>)> {
        let g = g.transfer(&self.space)?;
        let dg = g.degree().div_ceil(2);
        if dg > t {
            return Err(Error::OrderTooSmall(format!("localizing order {t} below ceil(deg g/2) = {dg}")));
        }
        let basis = MonomialBasis::full(&self.space, t - dg);
        let n = basis.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let bij = basis.get(i).add(basis.get(j));
                let mut v = 0.0;
                for (e, c) in g.terms() {
                    v += c * self.require(&bij.add(e))?;
                }
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Ok((basis, m))
    }
}

/// Numerical rank with a threshold relative to the largest eigenvalue.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.nrows() == 0 {
        return 0;
    }
    let ev = nalgebra::SymmetricEigen::new(m.clone()).eigenvalues;
    let lmax = ev.iter().copied().fold(0.0f64, f64::max);
    if lmax <= 0.0 {
        return 0;
    }
    ev.iter().filter(|&&l| l > rel_tol * lmax).count()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PopConfig {
    /// First relaxation order; defaults to `max(1, ceil(d3 / 2))`.
    pub k_start: Option<u32>,
    /// Highest order tried when the relaxation is not certified; `None`
    /// means `k_start + 2`.
    pub max_order: Option<u32>,
    pub rank_tol: f64,
    /// Order gap in the flat-truncation test `rank M_{t-s} = rank M_t`;
    /// defaults to `max(1, ceil(d3 / 2))`.
    pub flat_shift: Option<u32>,
    /// Adds `R - |w|^2 >= 0` to the constraints.
    pub ball: Option<f64>,
    /// Tolerance for accepting extracted points as feasible.
    pub feas_tol: f64,
    pub seed: u64,
    pub truncation: Truncation,
    pub solver: SolverConfig,
}

impl Default for PopConfig {
    fn default() -> Self {
        Self {
            k_start: None,
            max_order: None,
            rank_tol: 1e-6,
            flat_shift: None,
            ball: None,
            feas_tol: 1e-5,
            seed: 7,
            truncation: Truncation::Full,
            solver: SolverConfig::default(),
        }
    }
}

/// Outcome of the flat-truncation scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlatReport {
    /// Smallest `t` satisfying the test, if any.
    pub t: Option<u32>,
    pub shift: u32,
    /// `(t, rank M_{t-shift}, rank M_t)` for each `t` tried.
    pub ranks: Vec<(u32, usize, usize)>,
}

impl FlatReport {
    pub fn is_flat(&self) -> bool {
        self.t.is_some()
    }

    pub fn rank(&self) -> Option<usize> {
        let t = self.t?;
        self.ranks.iter().find(|r| r.0 == t).map(|r| r.2)
    }
}

/// Scans `t` in `[t_min, k]` for `rank M_{t-shift} = rank M_t`.
pub fn flat_truncation(z: &TruncatedMomentSequence, t_min: u32, k: u32, shift: u32, rank_tol: f64) -> Result<FlatReport> {
    let mut ranks = Vec::new();
    let mut found = None;
    for t in t_min.max(shift)..=k {
        let (_, mt) = z.moment_matrix(t)?;
        let (_, ms) = z.moment_matrix(t - shift)?;
        let rt = numerical_rank(&mt, rank_tol);
        let rs = numerical_rank(&ms, rank_tol);
        ranks.push((t, rs, rt));
        if rs == rt && found.is_none() {
            found = Some(t);
        }
    }
    Ok(FlatReport { t: found, shift, ranks })
}

/// Atomic measure recovered from a flat moment matrix.
#[derive(Debug, Clone)]
pub struct Extraction {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    /// Largest moment mismatch of the recovered atoms up to degree `t`.
    pub residual: f64,
}

/// Recovers the atoms of `z` from `M_t`, assuming it has a flat extension of
/// rank `r`.
pub fn extract_minimizers(z: &TruncatedMomentSequence, t: u32, r: usize, seed: u64) -> Result<Extraction> {
    let n = z.space().dim();
    let (basis, m) = z.moment_matrix(t)?;
    if r == 0 || r > basis.len() {
        return Err(Error::Numerical(format!("cannot extract {r} atoms from a moment matrix of size {}", basis.len())));
    }
    let eig = nalgebra::SymmetricEigen::new(m);
    let mut idx: Vec<usize> = (0..basis.len()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut v = DMatrix::zeros(basis.len(), r);
    for (c, &i) in idx.iter().take(r).enumerate() {
        let s = eig.eigenvalues[i].max(0.0).sqrt();
        v.set_column(c, &(eig.eigenvectors.column(i) * s));
    }
    // Greedy pivot rows in graded order, restricted to degree <= t - 1 so
    // that every shifted monomial stays inside the basis.
    let scale = v.norm().max(1e-300);
    let mut piv: Vec<usize> = Vec::new();
    let mut q: Vec<DVector<f64>> = Vec::new();
    for i in 0..basis.len() {
        if piv.len() == r {
            break;
        }
        if basis.get(i).degree() + 1 > t {
            continue;
        }
        let mut row: DVector<f64> = v.row(i).transpose();
        for qv in &q {
            let c = qv.dot(&row);
            row -= qv * c;
        }
        let nr = row.norm();
        if nr > 1e-6 * scale {
            piv.push(i);
            q.push(row / nr);
        }
    }
    if piv.len() < r {
        return Err(Error::Numerical(format!("found {} of {r} independent rows", piv.len())));
    }
    let mut vp = DMatrix::zeros(r, r);
    for (a, &i) in piv.iter().enumerate() {
        vp.set_row(a, &v.row(i));
    }
    let vpinv = vp
        .try_inverse()
        .ok_or_else(|| Error::Numerical("singular pivot block".into()))?;
    let u = &v * vpinv;
    let mut mult = Vec::with_capacity(n);
    for j in 0..n {
        let mut nj = DMatrix::zeros(r, r);
        for (a, &i) in piv.iter().enumerate() {
            let e = basis.get(i).add(&Exponent::unit(n, j));
            let row = basis
                .position(&e)
                .ok_or_else(|| Error::Numerical(format!("shifted monomial {} outside basis", e.display(z.space()))))?;
            nj.set_row(a, &u.row(row));
        }
        mult.push(nj);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
    let cs: f64 = c.iter().sum();
    c.iter_mut().for_each(|x| *x /= cs);
    let mut comb = DMatrix::zeros(r, r);
    for (j, nj) in mult.iter().enumerate() {
        comb += nj * c[j];
    }
    let qmat = nalgebra::Schur::new(comb).unpack().0;
    let mut points = Vec::with_capacity(r);
    for k in 0..r {
        let qk = qmat.column(k);
        points.push(mult.iter().map(|nj| (qk.transpose() * nj * qk)[(0, 0)]).collect::<Vec<f64>>());
    }
    // Masses by least squares on the moments of degree <= t.
    let mb = MonomialBasis::full(z.space(), t);
    let mut a = DMatrix::zeros(mb.len(), r);
    let mut rhs = DVector::zeros(mb.len());
    for (i, e) in mb.exponents().iter().enumerate() {
        rhs[i] = z.require(e)?;
        for (k, p) in points.iter().enumerate() {
            a[(i, k)] = e.eval(p);
        }
    }
    let svd = a.clone().svd(true, true);
    let w = svd
        .solve(&rhs, 1e-12)
        .map_err(|e| Error::Numerical(format!("mass least squares: {e}")))?;
    let residual = (&a * &w - &rhs).amax();
    Ok(Extraction {
        points,
        weights: w.iter().copied().collect(),
        residual,
    })
}

/// A moment relaxation program and its layout.
#[derive(Debug, Clone)]
pub struct MomentRelaxation {
    pub program: ConicProgram,
    pub layout: QmodLayout,
    pub gamma: usize,
    pub constraints: SemialgebraicSet,
}

/// `max gamma s.t. f - gamma in Q<g>_{2k}`, whose dual is the order-`k`
/// moment relaxation of `min f on {g >= 0}`.
pub fn build_moment_relaxation(
    f: &Polynomial,
    g: &SemialgebraicSet,
    k: u32,
    ball: Option<f64>,
    trunc: &Truncation,
) -> Result<MomentRelaxation> {
    let space = g.space().clone();
    let f = f.transfer(&space)?;
    if f.degree() > 2 * k {
        return Err(Error::OrderTooSmall(format!("2k = {} < deg f = {}", 2 * k, f.degree())));
    }
    let mut gens = g.clone();
    if let Some(r) = ball {
        let n = space.dim();
        let mut terms: Vec<(Exponent, f64)> =
            (0..n).map(|i| (Exponent::unit(n, i).add(&Exponent::unit(n, i)), -1.0)).collect();
        terms.push((Exponent::zero(n), r));
        gens.push(&Polynomial::from_terms(space.clone(), terms), SetTag::Ball)?;
    }
    let mut prog = ConicProgram::new(Sense::Maximize);
    let gamma = prog.add_free("gamma", 1.0);
    let one = Polynomial::constant(space.clone(), 1.0);
    let layout = qmod_membership(&mut prog, &f, &[(gamma, one)], &gens, k, trunc)?;
    Ok(MomentRelaxation {
        program: prog,
        layout,
        gamma,
        constraints: gens,
    })
}

impl MomentRelaxation {
    /// Moments from the dual multipliers of a solution.
    pub fn moments(&self, sol: &ConicSolution) -> TruncatedMomentSequence {
        let l = &self.layout;
        TruncatedMomentSequence::new(
            self.constraints.space().clone(),
            l.row_exponents
                .iter()
                .enumerate()
                .map(|(i, e)| (e.clone(), sol.dual[l.first_row + i])),
        )
    }
}

/// Result of [`solve_pop`].
#[derive(Debug, Clone)]
pub struct PopResult {
    /// Lower bound `gamma` from the last relaxation solved.
    pub value: f64,
    pub order: u32,
    pub flat: FlatReport,
    /// The same test with shift `d3` and `t` in `[d3, k]`.
    pub literal_flat: FlatReport,
    /// Feasible minimizers extracted from a flat moment matrix.
    pub minimizers: Vec<Vec<f64>>,
    /// Best feasible point known: an extracted minimizer, else the first
    /// order moments if they are feasible.
    pub candidate: Option<Vec<f64>>,
    /// `f(candidate)`, an upper bound on the minimum.
    pub upper: Option<f64>,
    /// Flat, extracted, and the extracted points attain the bound.
    pub certified: bool,
    pub moments: TruncatedMomentSequence,
    pub status: SolveStatus,
}

/// Solves the moment hierarchy from `k_start` up to `max_order`, stopping at
/// the first certified order.
///
/// An empty feasible set shows up as an unbounded SOS program and is
/// reported as [`Error::EmptyRecourse`] with an empty point; callers fill
/// in the point they were evaluating.
pub fn solve_pop(f: &Polynomial, g: &SemialgebraicSet, cfg: &PopConfig) -> Result<PopResult> {
    let space = g.space().clone();
    let f = f.transfer(&space)?;
    if space.dim() == 0 {
        let v = f.evaluate(&[])?;
        let z = TruncatedMomentSequence::new(space, [(Exponent::zero(0), 1.0)]);
        for h in g.constraints() {
            if h.evaluate(&[])? < -cfg.feas_tol {
                return Err(Error::EmptyRecourse { point: vec![] });
            }
        }
        return Ok(PopResult {
            value: v,
            order: 0,
            flat: FlatReport { t: Some(0), shift: 0, ranks: vec![] },
            literal_flat: FlatReport { t: Some(0), shift: 0, ranks: vec![] },
            minimizers: vec![vec![]],
            candidate: Some(vec![]),
            upper: Some(v),
            certified: true,
            moments: z,
            status: SolveStatus::Optimal,
        });
    }
    let d3 = degree_d3(&f, g).max(1);
    let half = d3.div_ceil(2);
    let k0 = cfg.k_start.unwrap_or(half).max(half);
    let kmax = cfg.max_order.unwrap_or(k0 + 2).max(k0);
    let shift = cfg.flat_shift.unwrap_or(half).max(1);
    let mut last = None;
    for k in k0..=kmax {
        let rel = build_moment_relaxation(&f, g, k, cfg.ball, &cfg.truncation)?;
        let sol = conic::solve(&rel.program, &cfg.solver);
        if sol.status == SolveStatus::Unbounded {
            return Err(Error::EmptyRecourse { point: vec![] });
        }
        if !sol.is_usable(&cfg.solver) {
            // a low order can be infeasible (no certificate of that degree)
            if k < kmax {
                log::debug!("order {k}: {} ({})", sol.status, sol.detail);
                continue;
            }
            if let Some(prev) = last {
                return Ok(prev);
            }
            return Err(sol.require_usable(&cfg.solver).unwrap_err());
        }
        let value = sol.free[rel.gamma];
        let z = rel.moments(&sol);
        let flat = match flat_truncation(&z, half, k, shift, cfg.rank_tol) {
            Ok(fr) => fr,
            Err(_) => FlatReport { t: None, shift, ranks: vec![] },
        };
        let literal_flat = flat_truncation(&z, d3, k, d3, cfg.rank_tol).unwrap_or(FlatReport {
            t: None,
            shift: d3,
            ranks: vec![],
        });
        let mut minimizers = Vec::new();
        if let (Some(t), Some(r)) = (flat.t, flat.rank()) {
            if let Ok(ex) = extract_minimizers(&z, t, r, cfg.seed) {
                for p in ex.points {
                    if g.contains(&p, cfg.feas_tol)? {
                        minimizers.push(p);
                    }
                }
            }
        }
        let mut candidate = None;
        let mut upper = None;
        for p in &minimizers {
            let v = f.evaluate(p)?;
            if upper.is_none_or(|u| v < u) {
                upper = Some(v);
                candidate = Some(p.clone());
            }
        }
        if candidate.is_none() {
            let n = space.dim();
            let m1: Option<Vec<f64>> = (0..n).map(|i| z.get(&Exponent::unit(n, i))).collect();
            if let Some(m1) = m1 {
                if g.contains(&m1, cfg.feas_tol)? {
                    upper = Some(f.evaluate(&m1)?);
                    candidate = Some(m1);
                }
            }
        }
        let scale = 1.0f64.max(value.abs());
        let certified = !minimizers.is_empty() && upper.is_some_and(|u| (u - value).abs() <= 1e-4 * scale);
        let res = PopResult {
            value,
            order: k,
            flat,
            literal_flat,
            minimizers,
            candidate,
            upper,
            certified,
            moments: z,
            status: sol.status,
        };
        if certified {
            return Ok(res);
        }
        log::debug!("order {k} not certified (value {value})");
        last = Some(res);
    }
    Ok(last.expect("at least one order is tried"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyalg::exponents_up_to;
    use proptest::prelude::*;

    fn w2() -> VariableSpace {
        VariableSpace::single("w", 2)
    }

    #[test]
    fn dirac_extraction() {
        let z = TruncatedMomentSequence::from_atoms(w2(), &[vec![0.3, -0.7]], &[1.0], 4);
        let (_, m) = z.moment_matrix(2).unwrap();
        assert_eq!(numerical_rank(&m, 1e-9), 1);
        let fr = flat_truncation(&z, 1, 2, 1, 1e-9).unwrap();
        assert_eq!(fr.t, Some(1));
        let ex = extract_minimizers(&z, 1, 1, 3).unwrap();
        assert!((ex.points[0][0] - 0.3).abs() < 1e-10);
        assert!((ex.points[0][1] + 0.7).abs() < 1e-10);
        assert!((ex.weights[0] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn two_atom_extraction() {
        let pts = vec![vec![1.0, 0.5], vec![-0.5, 2.0]];
        let z = TruncatedMomentSequence::from_atoms(w2(), &pts, &[0.3, 0.7], 6);
        let fr = flat_truncation(&z, 1, 3, 1, 1e-9).unwrap();
        assert_eq!(fr.t, Some(2));
        assert_eq!(fr.rank(), Some(2));
        let ex = extract_minimizers(&z, 2, 2, 11).unwrap();
        for (p, w) in pts.iter().zip([0.3, 0.7]) {
            let k = ex
                .points
                .iter()
                .position(|q| (q[0] - p[0]).abs() < 1e-6 && (q[1] - p[1]).abs() < 1e-6)
                .expect("atom recovered");
            assert!((ex.weights[k] - w).abs() < 1e-6);
        }
    }

    #[test]
    fn univariate_quartic_minimum() {
        // min w^4 - 2 w^2 = -1 at w = +-1
        let s = VariableSpace::single("w", 1);
        let w = Polynomial::var(&s, "w", 0).unwrap();
        let f = &w.pow(4) - &(&w.pow(2) * 2.0);
        // unconstrained: the half-degree shift of the constraints is 1
        let cfg = PopConfig { flat_shift: Some(1), ..PopConfig::default() };
        let r = solve_pop(&f, &SemialgebraicSet::empty(s), &cfg).unwrap();
        assert!((r.value + 1.0).abs() < 1e-6, "{}", r.value);
        assert!(r.certified, "{:?} {:?}", r.flat, r.moments);
        assert_eq!(r.minimizers.len(), 2);
    }

    #[test]
    fn constrained_minimum_on_disk() {
        // min w1 + w2 on the unit disk: -sqrt 2
        let s = w2();
        let a = Polynomial::var(&s, "w", 0).unwrap();
        let b = Polynomial::var(&s, "w", 1).unwrap();
        let g = (&(&a * &a) + &(&b * &b)) * -1.0;
        let g = SemialgebraicSet::new(s.clone(), &[g.add_constant(1.0)], SetTag::Other).unwrap();
        let r = solve_pop(&(&a + &b), &g, &PopConfig::default()).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((r.value + 2f64.sqrt()).abs() < 1e-6);
        assert!(r.certified);
        let p = &r.minimizers[0];
        assert!((p[0] + h).abs() < 1e-4 && (p[1] + h).abs() < 1e-4, "{p:?}");
    }

    #[test]
    fn empty_set_is_reported() {
        let s = VariableSpace::single("w", 1);
        let w = Polynomial::var(&s, "w", 0).unwrap();
        let g = SemialgebraicSet::new(s, &[(&w * &w * -1.0).add_constant(-1.0)], SetTag::Other).unwrap();
        let err = solve_pop(&w, &g, &PopConfig::default()).unwrap_err();
        assert!(matches!(err, Error::EmptyRecourse { .. }), "{err:?}");
    }

    #[test]
    fn lp_in_three_variables() {
        // min w1 + 2 w2 - w3 on w >= 0, w1 + w2 + w3 <= 1, w1 >= 0.2
        let s = VariableSpace::single("w", 3);
        let v: Vec<_> = (0..3).map(|i| Polynomial::var(&s, "w", i).unwrap()).collect();
        let f = &(&v[0] + &(&v[1] * 2.0)) - &v[2];
        let mut gs = v.clone();
        gs.push((&(&(&v[0] + &v[1]) + &v[2]) * -1.0).add_constant(1.0));
        gs.push(v[0].add_constant(-0.2));
        let g = SemialgebraicSet::new(s, &gs, SetTag::Other).unwrap();
        let r = solve_pop(&f, &g, &PopConfig::default()).unwrap();
        assert!((r.value + 0.6).abs() < 1e-6, "{}", r.value);
        let p = &r.minimizers[0];
        assert!((p[0] - 0.2).abs() < 1e-4 && p[1].abs() < 1e-4 && (p[2] - 0.8).abs() < 1e-4, "{p:?}");
        assert!(r.certified, "{:?}", r.flat);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn localizing_identity(
            pts in proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 2), 1..4),
            gc in proptest::collection::vec(-1.0f64..1.0, 6),
            pc in proptest::collection::vec(-1.0f64..1.0, 6),
        ) {
            // <g p^2, z> = p' L_g p for a 2-variable quadratic g, linear p
            let s = w2();
            let w: Vec<f64> = (0..pts.len()).map(|i| 1.0 / (i + 1) as f64).collect();
            let z = TruncatedMomentSequence::from_atoms(s.clone(), &pts, &w, 4);
            let b2 = MonomialBasis::full(&s, 2);
            let g = b2.polynomial(&gc);
            let b1 = MonomialBasis::full(&s, 1);
            let p = b1.polynomial(&pc[..3]);
            let (lb, lm) = z.localizing_matrix(&g, 2).unwrap();
            assert_eq!(lb.len(), 3);
            let pv = DVector::from_column_slice(&pc[..3]);
            let lhs = z.pairing(&(&g * &(&p * &p))).unwrap();
            let rhs = (pv.transpose() * lm * &pv)[(0, 0)];
            prop_assert!((lhs - rhs).abs() < 1e-10);
        }
    }

    #[test]
    fn moment_matrix_of_measure_is_psd() {
        let pts = vec![vec![0.1, 0.2], vec![0.9, -0.4], vec![0.0, 1.0]];
        let z = TruncatedMomentSequence::from_atoms(w2(), &pts, &[0.2, 0.3, 0.5], 4);
        let (_, m) = z.moment_matrix(2).unwrap();
        let ev = nalgebra::SymmetricEigen::new(m).eigenvalues;
        assert!(ev.min() > -1e-12);
        assert_eq!(z.degree(), 4);
        assert!(exponents_up_to(2, 4).iter().all(|e| z.get(e).is_some()));
    }
}
