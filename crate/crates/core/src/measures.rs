//! Probability measures described by their moments.
//!
//! A [`Measure`] lives on a [`VariableSpace`] and answers moment queries
//! `E[w^a]`. Mixtures and products are kept as trees so that moments combine
//! exactly. Measures that can be sampled or discretized also produce
//! [`AtomicRule`]s used for expectations of non-polynomial functions.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polyalg::{exponents_up_to, Exponent, MonomialBasis, Polynomial, VariableSpace};

const WEIGHT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum MeasureKind {
    UniformBox { lower: Vec<f64>, upper: Vec<f64> },
    FinitelyAtomic { points: Vec<Vec<f64>>, weights: Vec<f64> },
    /// `delta_point x inner`; the point covers the blocks not owned by `inner`.
    DiracProduct { point: Vec<f64>, inner: Box<Measure> },
    /// Independent product of two measures on disjoint blocks.
    Product { left: Box<Measure>, right: Box<Measure> },
    /// `alpha * left + (1 - alpha) * right`.
    Mixture { alpha: f64, left: Box<Measure>, right: Box<Measure> },
    MomentList { max_degree: u32, moments: BTreeMap<Exponent, f64> },
    EmpiricalSample { points: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measure {
    space: VariableSpace,
    kind: MeasureKind,
}

/// Weighted point set standing in for a measure in expectations.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicRule {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl AtomicRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Moments of a measure over a monomial basis.
#[derive(Debug, Clone)]
pub struct MomentVector {
    pub basis: MonomialBasis,
    pub values: Vec<f64>,
}

impl MomentVector {
    pub fn get(&self, e: &Exponent) -> Option<f64> {
        self.basis.position(e).map(|i| self.values[i])
    }
}

fn check_point(space: &VariableSpace, p: &[f64]) -> Result<()> {
    if p.len() != space.dim() {
        return Err(Error::DimensionMismatch {
            expected: space.dim(),
            got: p.len(),
        });
    }
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidMeasure("non-finite coordinate".into()));
    }
    Ok(())
}

fn check_weights(w: &[f64]) -> Result<()> {
    if w.is_empty() {
        return Err(Error::InvalidMeasure("no atoms".into()));
    }
    if w.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidMeasure("atom weights must be positive".into()));
    }
    let s: f64 = w.iter().sum();
    if (s - 1.0).abs() > WEIGHT_TOL * w.len().max(1) as f64 {
        return Err(Error::InvalidMeasure(format!("atom weights sum to {s}, not 1")));
    }
    Ok(())
}

/// Splits a space into the blocks owned by `inner` and the rest.
fn complement(space: &VariableSpace, inner: &VariableSpace) -> Result<VariableSpace> {
    for b in inner.blocks() {
        if space.range(&b.name)?.len() != b.dim {
            return Err(Error::SpaceMismatch(format!("block `{}` dimension differs", b.name)));
        }
    }
    VariableSpace::new(
        space
            .blocks()
            .iter()
            .filter(|b| !inner.has_block(&b.name))
            .map(|b| (b.name.clone(), b.dim)),
    )
}

/// Concatenation of two block lists, which must be disjoint.
fn concat(a: &VariableSpace, b: &VariableSpace) -> Result<VariableSpace> {
    VariableSpace::new(
        a.blocks()
            .iter()
            .chain(b.blocks())
            .map(|bl| (bl.name.clone(), bl.dim)),
    )
}

/// Re-indexes an exponent of `from` into `to` (blocks matched by name; every
/// block of `to` must exist in `from`, other blocks of `from` must be zero).
fn project_exp(from: &VariableSpace, to: &VariableSpace, e: &Exponent) -> Result<Exponent> {
    let mut out = Vec::with_capacity(to.dim());
    for b in to.blocks() {
        out.extend_from_slice(&e.0[from.range(&b.name)?]);
    }
    Ok(Exponent(out))
}

fn project_point(from: &VariableSpace, to: &VariableSpace, p: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(to.dim());
    for b in to.blocks() {
        out.extend_from_slice(&p[from.range(&b.name)?]);
    }
    Ok(out)
}

/// `Gamma(k / 2)` for a positive integer `k`.
fn half_gamma(k: u32) -> f64 {
    match k {
        1 => std::f64::consts::PI.sqrt(),
        2 => 1.0,
        _ => {
            let x = k as f64 / 2.0 - 1.0;
            x * half_gamma(k - 2)
        }
    }
}

impl Measure {
    pub fn space(&self) -> &VariableSpace {
        &self.space
    }

    pub fn kind(&self) -> &MeasureKind {
        &self.kind
    }

    pub fn uniform_box(space: VariableSpace, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_point(&space, &lower)?;
        check_point(&space, &upper)?;
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u)) {
            return Err(Error::InvalidMeasure("box needs lower < upper componentwise".into()));
        }
        Ok(Self {
            space,
            kind: MeasureKind::UniformBox { lower, upper },
        })
    }

    pub fn atomic(space: VariableSpace, points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                got: weights.len(),
            });
        }
        for p in &points {
            check_point(&space, p)?;
        }
        check_weights(&weights)?;
        Ok(Self {
            space,
            kind: MeasureKind::FinitelyAtomic { points, weights },
        })
    }

    pub fn dirac(space: VariableSpace, point: Vec<f64>) -> Result<Self> {
        Self::atomic(space, vec![point], vec![1.0])
    }

    /// `delta_point x inner` on `space`; `point` covers the blocks of `space`
    /// that `inner` does not own, in their order within `space`.
    pub fn dirac_product(space: VariableSpace, point: Vec<f64>, inner: Measure) -> Result<Self> {
        let outer = complement(&space, &inner.space)?;
        check_point(&outer, &point)?;
        if outer.dim() + inner.space.dim() != space.dim() {
            return Err(Error::SpaceMismatch("dirac product does not cover the space".into()));
        }
        Ok(Self {
            space,
            kind: MeasureKind::DiracProduct {
                point,
                inner: Box::new(inner),
            },
        })
    }

    /// Independent product; the resulting space is `left` blocks then `right`.
    pub fn product(left: Measure, right: Measure) -> Result<Self> {
        let space = concat(&left.space, &right.space)?;
        Ok(Self {
            space,
            kind: MeasureKind::Product {
                left: Box::new(left),
                right: Box::new(right),
            },
        })
    }

    pub fn mixture(alpha: f64, left: Measure, right: Measure) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidMixtureWeight(alpha));
        }
        if left.space != right.space {
            return Err(Error::SpaceMismatch("mixture components live on different spaces".into()));
        }
        Ok(Self {
            space: left.space.clone(),
            kind: MeasureKind::Mixture {
                alpha,
                left: Box::new(left),
                right: Box::new(right),
            },
        })
    }

    /// Explicit moments up to `max_degree`; every exponent of that degree
    /// range must be present and the zero moment must be 1.
    pub fn moment_list(space: VariableSpace, max_degree: u32, moments: BTreeMap<Exponent, f64>) -> Result<Self> {
        let n = space.dim();
        for e in exponents_up_to(n, max_degree) {
            match moments.get(&e) {
                Some(v) if v.is_finite() => {}
                _ => {
                    return Err(Error::InvalidMeasure(format!(
                        "moment list lacks a finite value for {}",
                        e.display(&space)
                    )))
                }
            }
        }
        let z0 = moments[&Exponent::zero(n)];
        if (z0 - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidMeasure(format!("zero moment is {z0}, not 1")));
        }
        let moments = moments.into_iter().filter(|(e, _)| e.degree() <= max_degree).collect();
        Ok(Self {
            space,
            kind: MeasureKind::MomentList { max_degree, moments },
        })
    }

    pub fn empirical(space: VariableSpace, points: Vec<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidMeasure("empty sample".into()));
        }
        for p in &points {
            check_point(&space, p)?;
        }
        Ok(Self {
            space,
            kind: MeasureKind::EmpiricalSample { points },
        })
    }

    /// Uniform measure on the ball `|w - center| <= radius`, stored as its
    /// closed-form moments up to `max_degree`.
    pub fn uniform_ball(space: VariableSpace, center: &[f64], radius: f64, max_degree: u32) -> Result<Self> {
        check_point(&space, center)?;
        if !(radius > 0.0) {
            return Err(Error::InvalidMeasure("ball radius must be positive".into()));
        }
        let n = space.dim() as u32;
        // Centered: E[u^a] = r^|a| Gamma(n/2+1) prod_i Gamma((a_i+1)/2) / (pi^{n/2} Gamma((|a|+n)/2+1)),
        // zero unless every a_i is even.
        let centered = |a: &[u32]| -> f64 {
            if a.iter().any(|v| v % 2 == 1) {
                return 0.0;
            }
            let s: u32 = a.iter().sum();
            let num: f64 = a.iter().map(|&ai| half_gamma(ai + 1)).product();
            let pi_n = half_gamma(1).powi(n as i32);
            let ratio = half_gamma(n + 2) / half_gamma(s + n + 2);
            radius.powi(s as i32) * num / pi_n * ratio
        };
        let mut moments = BTreeMap::new();
        for e in exponents_up_to(n as usize, max_degree) {
            // expand prod (c_i + u_i)^{e_i}
            let mut total = 0.0;
            let mut idx = vec![0u32; n as usize];
            loop {
                let mut coef = 1.0;
                for i in 0..n as usize {
                    coef *= crate::polyalg::binomial(e.0[i] as usize, idx[i] as usize) as f64
                        * center[i].powi((e.0[i] - idx[i]) as i32);
                }
                if coef != 0.0 {
                    total += coef * centered(&idx);
                }
                let mut k = 0;
                loop {
                    if k == n as usize {
                        break;
                    }
                    if idx[k] < e.0[k] {
                        idx[k] += 1;
                        break;
                    }
                    idx[k] = 0;
                    k += 1;
                }
                if k == n as usize {
                    break;
                }
            }
            moments.insert(e, total);
        }
        Self::moment_list(space, max_degree, moments)
    }

    /// Largest degree for which moments are available (`None` = unbounded).
    pub fn moment_degree(&self) -> Option<u32> {
        match &self.kind {
            MeasureKind::MomentList { max_degree, .. } => Some(*max_degree),
            MeasureKind::DiracProduct { inner, .. } => inner.moment_degree(),
            MeasureKind::Product { left, right } | MeasureKind::Mixture { left, right, .. } => {
                match (left.moment_degree(), right.moment_degree()) {
                    (Some(a), Some(b)) => Some(a.min(b)),
                    (a, b) => a.or(b),
                }
            }
            _ => None,
        }
    }

    /// `E[w^e]` with `e` indexed by this measure's space.
    pub fn moment(&self, e: &Exponent) -> Result<f64> {
        if e.len() != self.space.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.space.dim(),
                got: e.len(),
            });
        }
        Ok(match &self.kind {
            MeasureKind::UniformBox { lower, upper } => e
                .0
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(&a, (&l, &u))| {
                    let k = a as i32 + 1;
                    (u.powi(k) - l.powi(k)) / (k as f64 * (u - l))
                })
                .product(),
            MeasureKind::FinitelyAtomic { points, weights } => {
                points.iter().zip(weights).map(|(p, w)| w * e.eval(p)).sum()
            }
            MeasureKind::EmpiricalSample { points } => {
                points.iter().map(|p| e.eval(p)).sum::<f64>() / points.len() as f64
            }
            MeasureKind::DiracProduct { point, inner } => {
                let outer = complement(&self.space, &inner.space)?;
                let eo = project_exp(&self.space, &outer, e)?;
                let ei = project_exp(&self.space, &inner.space, e)?;
                eo.eval(point) * inner.moment(&ei)?
            }
            MeasureKind::Product { left, right } => {
                let el = project_exp(&self.space, &left.space, e)?;
                let er = project_exp(&self.space, &right.space, e)?;
                left.moment(&el)? * right.moment(&er)?
            }
            MeasureKind::Mixture { alpha, left, right } => alpha * left.moment(e)? + (1.0 - alpha) * right.moment(e)?,
            MeasureKind::MomentList { max_degree, moments } => {
                if e.degree() > *max_degree {
                    return Err(Error::InsufficientMoments {
                        required: e.degree(),
                        available: *max_degree,
                    });
                }
                moments[e]
            }
        })
    }

    pub fn moment_vector(&self, basis: &MonomialBasis) -> Result<MomentVector> {
        let mut values = Vec::with_capacity(basis.len());
        for e in basis.exponents() {
            let e = project_exp(basis.space(), &self.space, e)?;
            values.push(self.moment(&e)?);
        }
        Ok(MomentVector {
            basis: basis.clone(),
            values,
        })
    }

    /// `E[p]` for a polynomial whose blocks all belong to this measure's space.
    pub fn integrate(&self, p: &Polynomial) -> Result<f64> {
        let q = p.transfer(&self.space)?;
        let mut s = 0.0;
        for (e, c) in q.terms() {
            s += c * self.moment(e)?;
        }
        Ok(s)
    }

    /// Integrates out the blocks of this measure: the result lives on the
    /// remaining blocks of `p`'s space.
    pub fn expected_polynomial(&self, p: &Polynomial) -> Result<Polynomial> {
        let pspace = p.space();
        let rest = complement(pspace, &self.space)?;
        let mut acc: BTreeMap<Exponent, f64> = BTreeMap::new();
        for (e, c) in p.terms() {
            let er = project_exp(pspace, &rest, e)?;
            let em = project_exp(pspace, &self.space, e)?;
            *acc.entry(er).or_insert(0.0) += c * self.moment(&em)?;
        }
        Ok(Polynomial::from_terms(rest, acc))
    }

    /// `alpha * self + (1 - alpha) * (delta_x x mu)`, the measure update of the
    /// general algorithm. `self` must live on `x` blocks followed by `mu`'s.
    pub fn mixture_update(&self, alpha: f64, x: &[f64], mu: &Measure) -> Result<Measure> {
        let dp = Measure::dirac_product(self.space.clone(), x.to_vec(), mu.clone())?;
        Measure::mixture(alpha, self.clone(), dp)
    }

    /// `alpha * self + (1 - alpha) * delta_x`.
    pub fn mixture_with_dirac(&self, alpha: f64, x: &[f64]) -> Result<Measure> {
        let d = Measure::dirac(self.space.clone(), x.to_vec())?;
        Measure::mixture(alpha, self.clone(), d)
    }

    /// Whether the measure has finitely many atoms given explicitly.
    pub fn atoms(&self) -> Option<AtomicRule> {
        match &self.kind {
            MeasureKind::FinitelyAtomic { points, weights } => Some(AtomicRule {
                points: points.clone(),
                weights: weights.clone(),
            }),
            MeasureKind::EmpiricalSample { points } => Some(AtomicRule {
                points: points.clone(),
                weights: vec![1.0 / points.len() as f64; points.len()],
            }),
            MeasureKind::DiracProduct { point, inner } => {
                let r = inner.atoms()?;
                let outer = complement(&self.space, &inner.space).ok()?;
                let pts = r
                    .points
                    .iter()
                    .map(|q| self.assemble(&outer, point, &inner.space, q))
                    .collect::<Result<Vec<_>>>()
                    .ok()?;
                Some(AtomicRule { points: pts, weights: r.weights })
            }
            _ => None,
        }
    }

    fn assemble(&self, a: &VariableSpace, pa: &[f64], b: &VariableSpace, pb: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.space.dim()];
        for (sp, pt) in [(a, pa), (b, pb)] {
            for bl in sp.blocks() {
                let src = sp.range(&bl.name)?;
                let dst = self.space.range(&bl.name)?;
                out[dst].copy_from_slice(&pt[src]);
            }
        }
        Ok(out)
    }

    /// Tensor midpoint grid with `n` cells per coordinate on a box. Atomic
    /// measures return their atoms for every `n`.
    pub fn midpoint_grid(&self, n: usize) -> Result<AtomicRule> {
        self.box_grid(n, |l, u, i, n| l + (u - l) * (i as f64 + 0.5) / n as f64)
    }

    /// Tensor grid `l + (u - l) i / n`, `i = 1..n`, per coordinate.
    pub fn endpoint_grid(&self, n: usize) -> Result<AtomicRule> {
        self.box_grid(n, |l, u, i, n| l + (u - l) * (i + 1) as f64 / n as f64)
    }

    fn box_grid(&self, n: usize, node: impl Fn(f64, f64, usize, usize) -> f64) -> Result<AtomicRule> {
        if let (MeasureKind::FinitelyAtomic { .. }, Some(rule)) = (&self.kind, self.atoms()) {
            return Ok(rule);
        }
        let MeasureKind::UniformBox { lower, upper } = &self.kind else {
            return Err(Error::InvalidMeasure("grid rules need a uniform box measure".into()));
        };
        if n == 0 {
            return Err(Error::Config("grid size must be positive".into()));
        }
        let axes: Vec<Vec<f64>> = lower
            .iter()
            .zip(upper)
            .map(|(&l, &u)| (0..n).map(|i| node(l, u, i, n)).collect())
            .collect();
        let w = vec![1.0 / n as f64; n];
        Ok(tensor(&axes, &vec![w; axes.len()]))
    }

    /// Gaussian quadrature with `n` nodes per coordinate, exact for
    /// polynomials of degree `2n - 1` in each coordinate. Boxes use
    /// Gauss-Legendre; one-dimensional moment lists use Golub-Welsch on the
    /// Hankel matrix; products combine by tensoring; atomic measures return
    /// their atoms.
    pub fn gauss(&self, n: usize) -> Result<AtomicRule> {
        if n == 0 {
            return Err(Error::Config("quadrature size must be positive".into()));
        }
        match &self.kind {
            MeasureKind::UniformBox { lower, upper } => {
                let (x, w) = gauss_legendre(n);
                let axes: Vec<Vec<f64>> = lower
                    .iter()
                    .zip(upper)
                    .map(|(&l, &u)| x.iter().map(|t| l + (u - l) * (t + 1.0) / 2.0).collect())
                    .collect();
                let ws: Vec<Vec<f64>> = vec![w.iter().map(|v| v / 2.0).collect(); axes.len()];
                Ok(tensor(&axes, &ws))
            }
            MeasureKind::MomentList { max_degree, .. } => {
                if self.space.dim() != 1 {
                    return Err(Error::InvalidMeasure(
                        "quadrature from moments is only available in one dimension".into(),
                    ));
                }
                let need = 2 * n as u32 - 1;
                if need > *max_degree {
                    return Err(Error::InsufficientMoments {
                        required: need,
                        available: *max_degree,
                    });
                }
                let m: Vec<f64> = (0..=need)
                    .map(|k| self.moment(&Exponent(vec![k])))
                    .collect::<Result<_>>()?;
                let (x, w) = golub_welsch_from_moments(&m, n)?;
                Ok(AtomicRule {
                    points: x.into_iter().map(|v| vec![v]).collect(),
                    weights: w,
                })
            }
            MeasureKind::Product { left, right } => {
                let a = left.gauss(n)?;
                let b = right.gauss(n)?;
                let mut pts = Vec::new();
                let mut ws = Vec::new();
                for (pa, wa) in a.points.iter().zip(&a.weights) {
                    for (pb, wb) in b.points.iter().zip(&b.weights) {
                        pts.push(self.assemble(&left.space, pa, &right.space, pb)?);
                        ws.push(wa * wb);
                    }
                }
                Ok(AtomicRule { points: pts, weights: ws })
            }
            MeasureKind::DiracProduct { point, inner } => {
                let r = inner.gauss(n)?;
                let outer = complement(&self.space, &inner.space)?;
                let pts = r
                    .points
                    .iter()
                    .map(|q| self.assemble(&outer, point, &inner.space, q))
                    .collect::<Result<Vec<_>>>()?;
                Ok(AtomicRule { points: pts, weights: r.weights })
            }
            MeasureKind::Mixture { alpha, left, right } => {
                let a = left.gauss(n)?;
                let b = right.gauss(n)?;
                let mut pts = a.points;
                pts.extend(b.points);
                let mut ws: Vec<f64> = a.weights.iter().map(|w| alpha * w).collect();
                ws.extend(b.weights.iter().map(|w| (1.0 - alpha) * w));
                Ok(AtomicRule { points: pts, weights: ws })
            }
            _ => Ok(self.atoms().expect("atomic kinds")),
        }
    }

    /// Draws `n` independent points. Moment lists cannot be sampled.
    pub fn sample<R: Rng>(&self, rng: &mut R, n: usize) -> Result<Vec<Vec<f64>>> {
        (0..n).map(|_| self.sample_one(rng)).collect()
    }

    fn sample_one<R: Rng>(&self, rng: &mut R) -> Result<Vec<f64>> {
        Ok(match &self.kind {
            MeasureKind::UniformBox { lower, upper } => {
                lower.iter().zip(upper).map(|(&l, &u)| rng.gen_range(l..u)).collect()
            }
            MeasureKind::FinitelyAtomic { points, weights } => {
                let t: f64 = rng.gen();
                let mut acc = 0.0;
                for (p, w) in points.iter().zip(weights) {
                    acc += w;
                    if t < acc {
                        return Ok(p.clone());
                    }
                }
                points.last().cloned().expect("nonempty")
            }
            MeasureKind::EmpiricalSample { points } => points[rng.gen_range(0..points.len())].clone(),
            MeasureKind::DiracProduct { point, inner } => {
                let q = inner.sample_one(rng)?;
                let outer = complement(&self.space, &inner.space)?;
                self.assemble(&outer, point, &inner.space, &q)?
            }
            MeasureKind::Product { left, right } => {
                let a = left.sample_one(rng)?;
                let b = right.sample_one(rng)?;
                self.assemble(&left.space, &a, &right.space, &b)?
            }
            MeasureKind::Mixture { alpha, left, right } => {
                if rng.gen::<f64>() < *alpha {
                    left.sample_one(rng)?
                } else {
                    right.sample_one(rng)?
                }
            }
            MeasureKind::MomentList { .. } => {
                return Err(Error::InvalidMeasure("a moment list cannot be sampled".into()))
            }
        })
    }

    /// Seeded sample-average rule with `n` points.
    pub fn sample_rule(&self, n: usize, seed: u64) -> Result<AtomicRule> {
        if n == 0 {
            return Err(Error::Config("sample size must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points = self.sample(&mut rng, n)?;
        Ok(AtomicRule {
            points,
            weights: vec![1.0 / n as f64; n],
        })
    }

    /// Restricts a point of a larger space to this measure's blocks.
    pub fn project_point(&self, from: &VariableSpace, p: &[f64]) -> Result<Vec<f64>> {
        project_point(from, &self.space, p)
    }
}

fn tensor(axes: &[Vec<f64>], weights: &[Vec<f64>]) -> AtomicRule {
    let mut points = vec![Vec::new()];
    let mut ws = vec![1.0];
    for (ax, w) in axes.iter().zip(weights) {
        let mut np = Vec::with_capacity(points.len() * ax.len());
        let mut nw = Vec::with_capacity(points.len() * ax.len());
        for (p, pw) in points.iter().zip(&ws) {
            for (v, vw) in ax.iter().zip(w) {
                let mut q = p.clone();
                q.push(*v);
                np.push(q);
                nw.push(pw * vw);
            }
        }
        points = np;
        ws = nw;
    }
    AtomicRule { points, weights: ws }
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut j = DMatrix::zeros(n, n);
    for k in 1..n {
        let kf = k as f64;
        let b = kf / (4.0 * kf * kf - 1.0).sqrt();
        j[(k - 1, k)] = b;
        j[(k, k - 1)] = b;
    }
    jacobi_rule(j, 2.0)
}

fn jacobi_rule(j: DMatrix<f64>, mass: f64) -> (Vec<f64>, Vec<f64>) {
    let eig = nalgebra::SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..eig.eigenvalues.len())
        .map(|i| (eig.eigenvalues[i], mass * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Golub-Welsch from raw moments `m_0..m_{2n-1}`.
fn golub_welsch_from_moments(m: &[f64], n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    // Upper Cholesky factor rows 0..n of the (n+1)x(n+1) Hankel matrix; only
    // moments up to 2n-1 enter these rows.
    let mut r = vec![vec![0.0; n + 1]; n];
    for i in 0..n {
        let mut d = m[2 * i];
        for k in 0..i {
            d -= r[k][i] * r[k][i];
        }
        if !(d > 0.0) {
            return Err(Error::Numerical(format!(
                "moment Hankel matrix is not positive definite at order {i}"
            )));
        }
        r[i][i] = d.sqrt();
        for jx in i + 1..=n {
            let mut s = m[i + jx];
            for k in 0..i {
                s -= r[k][i] * r[k][jx];
            }
            r[i][jx] = s / r[i][i];
        }
    }
    let mut j = DMatrix::zeros(n, n);
    for i in 0..n {
        let prev = if i > 0 { r[i - 1][i] / r[i - 1][i - 1] } else { 0.0 };
        j[(i, i)] = r[i][i + 1] / r[i][i] - prev;
        if i + 1 < n {
            let b = r[i + 1][i + 1] / r[i][i];
            j[(i, i + 1)] = b;
            j[(i + 1, i)] = b;
        }
    }
    Ok(jacobi_rule(j, m[0]))
}

/// Rejection sampling of `count` points of a box accepted by `member`,
/// returned as a uniform atomic measure.
pub fn sample_support(
    space: VariableSpace,
    lower: &[f64],
    upper: &[f64],
    member: impl Fn(&[f64]) -> bool,
    count: usize,
    seed: u64,
    max_attempts: usize,
) -> Result<Measure> {
    if count == 0 {
        return Err(Error::Config("sample count must be at least 1".into()));
    }
    let bx = Measure::uniform_box(space.clone(), lower.to_vec(), upper.to_vec())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = Vec::with_capacity(count);
    let mut attempts = 0;
    while pts.len() < count {
        if attempts >= max_attempts {
            if pts.is_empty() {
                return Err(Error::EmptySupportSample { attempts });
            }
            break;
        }
        attempts += 1;
        let p = bx.sample_one(&mut rng)?;
        if member(&p) {
            pts.push(p);
        }
    }
    let w = vec![1.0 / pts.len() as f64; pts.len()];
    Measure::atomic(space, pts, w)
}

// ---------------------------------------------------------------------------
// JSON descriptors.

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentJson {
    pub exp: BTreeMap<String, Vec<u32>>,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MeasureJson {
    UniformBox {
        blocks: Vec<(String, usize)>,
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    UniformBall {
        blocks: Vec<(String, usize)>,
        center: Vec<f64>,
        radius: f64,
        max_degree: u32,
    },
    Atomic {
        blocks: Vec<(String, usize)>,
        points: Vec<Vec<f64>>,
        weights: Vec<f64>,
    },
    DiracProduct {
        blocks: Vec<(String, usize)>,
        point: Vec<f64>,
        inner: Box<MeasureJson>,
    },
    Product {
        left: Box<MeasureJson>,
        right: Box<MeasureJson>,
    },
    Mixture {
        alpha: f64,
        left: Box<MeasureJson>,
        right: Box<MeasureJson>,
    },
    MomentList {
        blocks: Vec<(String, usize)>,
        max_degree: u32,
        moments: Vec<MomentJson>,
    },
    Empirical {
        blocks: Vec<(String, usize)>,
        points: Vec<Vec<f64>>,
    },
}

fn space_of(blocks: &[(String, usize)], pointer: &str) -> Result<VariableSpace> {
    VariableSpace::new(blocks.iter().cloned()).map_err(|e| Error::schema(format!("{pointer}/blocks"), e.to_string()))
}

fn blocks_of(space: &VariableSpace) -> Vec<(String, usize)> {
    space.blocks().iter().map(|b| (b.name.clone(), b.dim)).collect()
}

impl MeasureJson {
    pub fn build(&self, pointer: &str) -> Result<Measure> {
        let wrap = |e: Error| match e {
            Error::Schema { .. } => e,
            other => Error::schema(pointer, other.to_string()),
        };
        match self {
            MeasureJson::UniformBox { blocks, lower, upper } => {
                Measure::uniform_box(space_of(blocks, pointer)?, lower.clone(), upper.clone()).map_err(wrap)
            }
            MeasureJson::UniformBall {
                blocks,
                center,
                radius,
                max_degree,
            } => Measure::uniform_ball(space_of(blocks, pointer)?, center, *radius, *max_degree).map_err(wrap),
            MeasureJson::Atomic { blocks, points, weights } => {
                Measure::atomic(space_of(blocks, pointer)?, points.clone(), weights.clone()).map_err(wrap)
            }
            MeasureJson::DiracProduct { blocks, point, inner } => {
                let inner = inner.build(&format!("{pointer}/inner"))?;
                Measure::dirac_product(space_of(blocks, pointer)?, point.clone(), inner).map_err(wrap)
            }
            MeasureJson::Product { left, right } => Measure::product(
                left.build(&format!("{pointer}/left"))?,
                right.build(&format!("{pointer}/right"))?,
            )
            .map_err(wrap),
            MeasureJson::Mixture { alpha, left, right } => Measure::mixture(
                *alpha,
                left.build(&format!("{pointer}/left"))?,
                right.build(&format!("{pointer}/right"))?,
            )
            .map_err(wrap),
            MeasureJson::MomentList {
                blocks,
                max_degree,
                moments,
            } => {
                let space = space_of(blocks, pointer)?;
                let mut map = BTreeMap::new();
                for (i, m) in moments.iter().enumerate() {
                    let mut e = vec![0u32; space.dim()];
                    for (name, v) in &m.exp {
                        let r = space
                            .range(name)
                            .map_err(|err| Error::schema(format!("{pointer}/moments/{i}/exp"), err.to_string()))?;
                        if v.len() != r.len() {
                            return Err(Error::schema(
                                format!("{pointer}/moments/{i}/exp/{name}"),
                                format!("expected {} entries, got {}", r.len(), v.len()),
                            ));
                        }
                        e[r].copy_from_slice(v);
                    }
                    map.insert(Exponent(e), m.value);
                }
                Measure::moment_list(space, *max_degree, map).map_err(wrap)
            }
            MeasureJson::Empirical { blocks, points } => {
                Measure::empirical(space_of(blocks, pointer)?, points.clone()).map_err(wrap)
            }
        }
    }

    pub fn from_measure(m: &Measure) -> MeasureJson {
        let blocks = blocks_of(&m.space);
        match &m.kind {
            MeasureKind::UniformBox { lower, upper } => MeasureJson::UniformBox {
                blocks,
                lower: lower.clone(),
                upper: upper.clone(),
            },
            MeasureKind::FinitelyAtomic { points, weights } => MeasureJson::Atomic {
                blocks,
                points: points.clone(),
                weights: weights.clone(),
            },
            MeasureKind::DiracProduct { point, inner } => MeasureJson::DiracProduct {
                blocks,
                point: point.clone(),
                inner: Box::new(Self::from_measure(inner)),
            },
            MeasureKind::Product { left, right } => MeasureJson::Product {
                left: Box::new(Self::from_measure(left)),
                right: Box::new(Self::from_measure(right)),
            },
            MeasureKind::Mixture { alpha, left, right } => MeasureJson::Mixture {
                alpha: *alpha,
                left: Box::new(Self::from_measure(left)),
                right: Box::new(Self::from_measure(right)),
            },
            MeasureKind::MomentList { max_degree, moments } => MeasureJson::MomentList {
                blocks,
                max_degree: *max_degree,
                moments: moments
                    .iter()
                    .map(|(e, v)| {
                        let mut exp = BTreeMap::new();
                        for b in m.space.blocks() {
                            let r = m.space.range(&b.name).expect("own block");
                            if e.0[r.clone()].iter().any(|&a| a > 0) {
                                exp.insert(b.name.clone(), e.0[r].to_vec());
                            }
                        }
                        MomentJson { exp, value: *v }
                    })
                    .collect(),
            },
            MeasureKind::EmpiricalSample { points } => MeasureJson::Empirical {
                blocks,
                points: points.clone(),
            },
        }
    }
}

/// Reads sample points from CSV text: one point per line, comma separated.
/// Blank lines and lines starting with `#` are skipped.
pub fn parse_sample_csv(text: &str, dim: usize) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let row: Vec<f64> = t
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::schema(format!("line {}", ln + 1), e.to_string()))?;
        if row.len() != dim {
            return Err(Error::schema(
                format!("line {}", ln + 1),
                format!("expected {dim} values, got {}", row.len()),
            ));
        }
        out.push(row);
    }
    Ok(out)
}
