//! Sparse multivariate polynomials over named variable blocks.
//!
//! Every polynomial lives in a [`VariableSpace`], an ordered list of named
//! blocks (canonically `x`, `y`, `xi`). Exponents are flat vectors over the
//! concatenated blocks, and terms are kept in graded lexicographic order:
//! lower total degree first, then `w1` before `w2` within a degree, which
//! reproduces the usual `[1, w1, .., wn, w1^2, w1 w2, ..]` monomial vector.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::{Add, Mul, Neg, Range, Sub};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficients smaller than this in magnitude are dropped after arithmetic.
pub const DROP_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Block {
    pub name: String,
    pub dim: usize,
}

/// Ordered, named partition of the variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VariableSpace {
    blocks: Arc<[Block]>,
}

impl VariableSpace {
    pub fn new<S: Into<String>>(blocks: impl IntoIterator<Item = (S, usize)>) -> Result<Self> {
        let blocks: Vec<Block> = blocks
            .into_iter()
            .map(|(name, dim)| Block {
                name: name.into(),
                dim,
            })
            .collect();
        for (i, b) in blocks.iter().enumerate() {
            if blocks[..i].iter().any(|o| o.name == b.name) {
                return Err(Error::DuplicateBlock(b.name.clone()));
            }
        }
        Ok(Self {
            blocks: blocks.into(),
        })
    }

    /// The canonical `(x, y, xi)` space of a two-stage problem.
    pub fn two_stage(n1: usize, n2: usize, n0: usize) -> Self {
        Self::new([("x", n1), ("y", n2), ("xi", n0)]).expect("distinct names")
    }

    /// A space with a single block.
    pub fn single(name: &str, dim: usize) -> Self {
        Self::new([(name, dim)]).expect("single block")
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.dim).sum()
    }

    pub fn block_index(&self, name: &str) -> Option<usize> {
        self.blocks.iter().position(|b| b.name == name)
    }

    pub fn has_block(&self, name: &str) -> bool {
        self.block_index(name).is_some()
    }

    /// Flat index range occupied by a block.
    pub fn range(&self, name: &str) -> Result<Range<usize>> {
        let mut off = 0;
        for b in self.blocks.iter() {
            if b.name == name {
                return Ok(off..off + b.dim);
            }
            off += b.dim;
        }
        Err(Error::UnknownBlock(name.to_string()))
    }

    pub fn block_dim(&self, name: &str) -> usize {
        self.range(name).map(|r| r.len()).unwrap_or(0)
    }

    /// Space with `name` removed.
    pub fn without(&self, name: &str) -> Result<Self> {
        if !self.has_block(name) {
            return Err(Error::UnknownBlock(name.to_string()));
        }
        Ok(Self {
            blocks: self.blocks.iter().filter(|b| b.name != name).cloned().collect(),
        })
    }

    /// Sub-space keeping only the named blocks, in this space's order.
    pub fn restrict(&self, names: &[&str]) -> Result<Self> {
        for n in names {
            if !self.has_block(n) {
                return Err(Error::UnknownBlock(n.to_string()));
            }
        }
        Ok(Self {
            blocks: self
                .blocks
                .iter()
                .filter(|b| names.contains(&b.name.as_str()))
                .cloned()
                .collect(),
        })
    }

    /// Human-readable name of flat variable `i`, e.g. `x1`, `xi2`.
    pub fn var_name(&self, i: usize) -> String {
        let mut off = 0;
        for b in self.blocks.iter() {
            if i < off + b.dim {
                return format!("{}{}", b.name, i - off + 1);
            }
            off += b.dim;
        }
        format!("w{}", i + 1)
    }

    /// Concatenates per-block values into a flat point. Missing blocks are an
    /// error; extra names are rejected.
    pub fn point(&self, parts: &[(&str, &[f64])]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        let mut seen = vec![false; self.blocks.len()];
        for (name, vals) in parts {
            let idx = self
                .block_index(name)
                .ok_or_else(|| Error::UnknownBlock(name.to_string()))?;
            let r = self.range(name)?;
            if vals.len() != r.len() {
                return Err(Error::DimensionMismatch {
                    expected: r.len(),
                    got: vals.len(),
                });
            }
            out[r].copy_from_slice(vals);
            seen[idx] = true;
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            if self.blocks[i].dim > 0 {
                return Err(Error::UnknownBlock(format!(
                    "{} (no value supplied)",
                    self.blocks[i].name
                )));
            }
        }
        Ok(out)
    }
}

/// Multi-index over the flat variables of a space.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Exponent(pub Vec<u32>);

impl Exponent {
    pub fn zero(n: usize) -> Self {
        Exponent(vec![0; n])
    }

    pub fn unit(n: usize, i: usize) -> Self {
        let mut e = vec![0; n];
        e[i] = 1;
        Exponent(e)
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&a| a == 0)
    }

    pub fn add(&self, other: &Exponent) -> Exponent {
        Exponent(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// Degree restricted to a flat index range.
    pub fn degree_in(&self, r: Range<usize>) -> u32 {
        self.0[r].iter().sum()
    }

    /// `w^alpha` at a flat point.
    pub fn eval(&self, point: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(point)
            .filter(|(a, _)| **a > 0)
            .map(|(&a, &v)| v.powi(a as i32))
            .product()
    }

    pub fn display(&self, space: &VariableSpace) -> String {
        let parts: Vec<String> = self
            .0
            .iter()
            .enumerate()
            .filter(|(_, a)| **a > 0)
            .map(|(i, &a)| {
                if a == 1 {
                    space.var_name(i)
                } else {
                    format!("{}^{}", space.var_name(i), a)
                }
            })
            .collect();
        if parts.is_empty() {
            "1".to_string()
        } else {
            parts.join("*")
        }
    }
}

impl Ord for Exponent {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for Exponent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// All exponents in `n` variables of total degree exactly `d`, lexicographically
/// descending (so `x1^d` comes first).
fn exponents_of_degree(n: usize, d: u32, out: &mut Vec<Exponent>) {
    fn rec(n: usize, i: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Exponent>) {
        if i + 1 == n {
            cur[i] = left;
            out.push(Exponent(cur.clone()));
            cur[i] = 0;
            return;
        }
        for a in (0..=left).rev() {
            cur[i] = a;
            rec(n, i + 1, left - a, cur, out);
        }
        cur[i] = 0;
    }
    if n == 0 {
        if d == 0 {
            out.push(Exponent(vec![]));
        }
        return;
    }
    let mut cur = vec![0; n];
    rec(n, 0, d, &mut cur, out);
}

/// All exponents in `n` variables with total degree at most `d`, graded-lex.
pub fn exponents_up_to(n: usize, d: u32) -> Vec<Exponent> {
    let mut out = Vec::new();
    for t in 0..=d {
        exponents_of_degree(n, t, &mut out);
    }
    out
}

/// Ordered, duplicate-free list of monomials.
#[derive(Debug, Clone)]
pub struct MonomialBasis {
    space: VariableSpace,
    exps: Vec<Exponent>,
    index: HashMap<Exponent, usize>,
}

impl MonomialBasis {
    pub fn from_exponents(space: VariableSpace, mut exps: Vec<Exponent>) -> Self {
        exps.sort();
        exps.dedup();
        let index = exps.iter().cloned().enumerate().map(|(i, e)| (e, i)).collect();
        Self { space, exps, index }
    }

    /// `[w]_d` over every variable of the space.
    pub fn full(space: &VariableSpace, d: u32) -> Self {
        Self::from_exponents(space.clone(), exponents_up_to(space.dim(), d))
    }

    /// Monomials of total degree at most `d` in the named blocks only.
    pub fn in_blocks(space: &VariableSpace, blocks: &[&str], d: u32) -> Result<Self> {
        let mut active = Vec::new();
        for b in blocks {
            active.extend(space.range(b)?);
        }
        active.sort_unstable();
        let n = space.dim();
        let exps = exponents_up_to(active.len(), d)
            .into_iter()
            .map(|e| {
                let mut full = vec![0; n];
                for (k, &i) in active.iter().enumerate() {
                    full[i] = e.0[k];
                }
                Exponent(full)
            })
            .collect();
        Ok(Self::from_exponents(space.clone(), exps))
    }

    /// Monomials whose partial degree in each listed block is bounded; blocks
    /// not listed do not appear. E.g. `[("x", k1), ("xi", k2)]` gives
    /// `R[x, xi]_{k1,k2}`.
    pub fn bidegree(space: &VariableSpace, bounds: &[(&str, u32)]) -> Result<Self> {
        let mut per_block: Vec<(Range<usize>, Vec<Exponent>)> = Vec::new();
        for (b, d) in bounds {
            let r = space.range(b)?;
            let e = exponents_up_to(r.len(), *d);
            per_block.push((r, e));
        }
        let n = space.dim();
        let mut exps = vec![Exponent::zero(n)];
        for (r, choices) in &per_block {
            let mut next = Vec::with_capacity(exps.len() * choices.len());
            for base in &exps {
                for c in choices {
                    let mut e = base.clone();
                    e.0[r.clone()].copy_from_slice(&c.0);
                    next.push(e);
                }
            }
            exps = next;
        }
        Ok(Self::from_exponents(space.clone(), exps))
    }

    pub fn space(&self) -> &VariableSpace {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    pub fn exponents(&self) -> &[Exponent] {
        &self.exps
    }

    pub fn get(&self, i: usize) -> &Exponent {
        &self.exps[i]
    }

    pub fn position(&self, e: &Exponent) -> Option<usize> {
        self.index.get(e).copied()
    }

    pub fn max_degree(&self) -> u32 {
        self.exps.iter().map(Exponent::degree).max().unwrap_or(0)
    }

    /// Polynomial `sum_i coeffs[i] * w^{exps[i]}`.
    pub fn polynomial(&self, coeffs: &[f64]) -> Polynomial {
        Polynomial::from_terms(
            self.space.clone(),
            self.exps.iter().cloned().zip(coeffs.iter().copied()),
        )
    }
}

/// Sparse real polynomial in canonical form (no stored near-zero coefficients).
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    space: VariableSpace,
    terms: BTreeMap<Exponent, f64>,
}

impl Polynomial {
    pub fn zero(space: VariableSpace) -> Self {
        Self {
            space,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(space: VariableSpace, c: f64) -> Self {
        let n = space.dim();
        Self::monomial(space, Exponent::zero(n), c)
    }

    pub fn monomial(space: VariableSpace, exp: Exponent, c: f64) -> Self {
        assert_eq!(exp.len(), space.dim(), "exponent length must match space");
        let mut p = Self::zero(space);
        if c.abs() >= DROP_TOL {
            p.terms.insert(exp, c);
        }
        p
    }

    /// Variable `block[idx]` (zero-based index inside the block).
    pub fn var(space: &VariableSpace, block: &str, idx: usize) -> Result<Self> {
        let r = space.range(block)?;
        if idx >= r.len() {
            return Err(Error::DimensionMismatch {
                expected: r.len(),
                got: idx + 1,
            });
        }
        Ok(Self::monomial(
            space.clone(),
            Exponent::unit(space.dim(), r.start + idx),
            1.0,
        ))
    }

    /// Builds a polynomial, summing duplicate exponents and dropping tiny terms.
    pub fn from_terms(space: VariableSpace, terms: impl IntoIterator<Item = (Exponent, f64)>) -> Self {
        let n = space.dim();
        let mut map: BTreeMap<Exponent, f64> = BTreeMap::new();
        for (e, c) in terms {
            assert_eq!(e.len(), n, "exponent length must match space");
            *map.entry(e).or_insert(0.0) += c;
        }
        map.retain(|_, c| c.abs() >= DROP_TOL);
        Self { space, terms: map }
    }

    pub fn space(&self) -> &VariableSpace {
        &self.space
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponent, f64)> + '_ {
        self.terms.iter().map(|(e, c)| (e, *c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, e: &Exponent) -> f64 {
        self.terms.get(e).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; the zero polynomial has degree 0.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Exponent::degree).max().unwrap_or(0)
    }

    /// Partial degree in one block (0 if the block is absent).
    pub fn block_degree(&self, block: &str) -> u32 {
        match self.space.range(block) {
            Ok(r) => self
                .terms
                .keys()
                .map(|e| e.degree_in(r.clone()))
                .max()
                .unwrap_or(0),
            Err(_) => 0,
        }
    }

    /// Partial degrees of every block, in space order.
    pub fn partial_degrees(&self) -> Vec<(String, u32)> {
        self.space
            .blocks()
            .iter()
            .map(|b| (b.name.clone(), self.block_degree(&b.name)))
            .collect()
    }

    pub fn evaluate(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.space.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.space.dim(),
                got: point.len(),
            });
        }
        Ok(self.terms.iter().map(|(e, c)| c * e.eval(point)).sum())
    }

    /// Evaluates at a point given block by block.
    pub fn evaluate_blocks(&self, parts: &[(&str, &[f64])]) -> Result<f64> {
        let pt = self.space.point(parts)?;
        self.evaluate(&pt)
    }

    fn check_space(&self, other: &Polynomial) -> Result<()> {
        if self.space != other.space {
            return Err(Error::SpaceMismatch(format!(
                "{:?} vs {:?}",
                self.space.blocks(),
                other.space.blocks()
            )));
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_space(other)?;
        Ok(Self::from_terms(
            self.space.clone(),
            self.terms().chain(other.terms()).map(|(e, c)| (e.clone(), c)),
        ))
    }

    pub fn try_sub(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_space(other)?;
        Ok(Self::from_terms(
            self.space.clone(),
            self.terms()
                .map(|(e, c)| (e.clone(), c))
                .chain(other.terms().map(|(e, c)| (e.clone(), -c))),
        ))
    }

    pub fn try_mul(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_space(other)?;
        let mut out: BTreeMap<Exponent, f64> = BTreeMap::new();
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                *out.entry(a.add(b)).or_insert(0.0) += ca * cb;
            }
        }
        out.retain(|_, c| c.abs() >= DROP_TOL);
        Ok(Self {
            space: self.space.clone(),
            terms: out,
        })
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        Self::from_terms(self.space.clone(), self.terms().map(|(e, c)| (e.clone(), c * s)))
    }

    pub fn add_constant(&self, c: f64) -> Polynomial {
        let n = self.space.dim();
        Self::from_terms(
            self.space.clone(),
            self.terms()
                .map(|(e, v)| (e.clone(), v))
                .chain(std::iter::once((Exponent::zero(n), c))),
        )
    }

    pub fn pow(&self, k: u32) -> Polynomial {
        let mut out = Polynomial::constant(self.space.clone(), 1.0);
        for _ in 0..k {
            out = &out * self;
        }
        out
    }

    /// Fixes a block to numeric values; the result lives on the remaining blocks.
    pub fn substitute_block(&self, block: &str, values: &[f64]) -> Result<Polynomial> {
        let r = self.space.range(block)?;
        if values.len() != r.len() {
            return Err(Error::DimensionMismatch {
                expected: r.len(),
                got: values.len(),
            });
        }
        let space = self.space.without(block)?;
        Ok(Self::from_terms(
            space,
            self.terms.iter().map(|(e, c)| {
                let factor: f64 = e.0[r.clone()]
                    .iter()
                    .zip(values)
                    .map(|(&a, &v)| v.powi(a as i32))
                    .product();
                let mut rest = e.0[..r.start].to_vec();
                rest.extend_from_slice(&e.0[r.end..]);
                (Exponent(rest), c * factor)
            }),
        ))
    }

    /// Re-expresses the polynomial in a larger space that contains every block
    /// of this one (matched by name and dimension).
    pub fn embed(&self, target: &VariableSpace) -> Result<Polynomial> {
        let mut map = Vec::with_capacity(self.space.dim());
        for b in self.space.blocks() {
            let r = target.range(&b.name)?;
            if r.len() != b.dim {
                return Err(Error::SpaceMismatch(format!(
                    "block `{}` has dimension {} here and {} in the target",
                    b.name,
                    b.dim,
                    r.len()
                )));
            }
            map.extend(r);
        }
        let n = target.dim();
        Ok(Self::from_terms(
            target.clone(),
            self.terms.iter().map(|(e, c)| {
                let mut full = vec![0; n];
                for (i, &a) in e.0.iter().enumerate() {
                    full[map[i]] = a;
                }
                (Exponent(full), *c)
            }),
        ))
    }

    /// Projects onto a sub-space. Fails if a dropped block actually occurs.
    pub fn restrict(&self, target: &VariableSpace) -> Result<Polynomial> {
        let mut keep = Vec::new();
        for b in target.blocks() {
            let r = self.space.range(&b.name)?;
            if r.len() != b.dim {
                return Err(Error::SpaceMismatch(format!("block `{}` dimension differs", b.name)));
            }
            keep.extend(r);
        }
        for b in self.space.blocks() {
            if !target.has_block(&b.name) && self.block_degree(&b.name) > 0 {
                return Err(Error::SpaceMismatch(format!(
                    "polynomial depends on block `{}` which the target lacks",
                    b.name
                )));
            }
        }
        Ok(Self::from_terms(
            target.clone(),
            self.terms
                .iter()
                .map(|(e, c)| (Exponent(keep.iter().map(|&i| e.0[i]).collect()), *c)),
        ))
    }

    /// Moves the polynomial into `target`: blocks missing from `target` must
    /// not occur, blocks missing from `self` get zero exponents.
    pub fn transfer(&self, target: &VariableSpace) -> Result<Polynomial> {
        let common: Vec<(String, usize)> = self
            .space
            .blocks()
            .iter()
            .filter(|b| target.has_block(&b.name))
            .map(|b| (b.name.clone(), b.dim))
            .collect();
        let mid = VariableSpace::new(common)?;
        self.restrict(&mid)?.embed(target)
    }

    /// Largest absolute coefficient.
    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Coefficient vector over a basis; terms outside the basis are reported.
    pub fn coefficients_in(&self, basis: &MonomialBasis) -> Result<Vec<f64>> {
        let mut out = vec![0.0; basis.len()];
        for (e, c) in &self.terms {
            match basis.position(e) {
                Some(i) => out[i] = *c,
                None => {
                    return Err(Error::BasisMismatch(format!(
                        "term {} is outside the basis",
                        e.display(&self.space)
                    )))
                }
            }
        }
        Ok(out)
    }

    pub fn to_json_terms(&self) -> Vec<TermJson> {
        self.terms
            .iter()
            .map(|(e, c)| {
                let mut exp = BTreeMap::new();
                let mut off = 0;
                for b in self.space.blocks() {
                    let part = &e.0[off..off + b.dim];
                    if part.iter().any(|&a| a > 0) {
                        exp.insert(b.name.clone(), part.to_vec());
                    }
                    off += b.dim;
                }
                TermJson { coeff: *c, exp }
            })
            .collect()
    }

    /// Decodes the term-list encoding. `pointer` prefixes error locations.
    pub fn from_json_terms(space: &VariableSpace, terms: &[TermJson], pointer: &str) -> Result<Self> {
        let n = space.dim();
        let mut out = Vec::with_capacity(terms.len());
        for (t, term) in terms.iter().enumerate() {
            if !term.coeff.is_finite() {
                return Err(Error::schema(format!("{pointer}/{t}/coeff"), "coefficient is not finite"));
            }
            let mut e = vec![0; n];
            for (name, vals) in &term.exp {
                let r = space.range(name).map_err(|_| {
                    Error::schema(format!("{pointer}/{t}/exp/{name}"), format!("unknown block `{name}`"))
                })?;
                if vals.len() != r.len() {
                    return Err(Error::schema(
                        format!("{pointer}/{t}/exp/{name}"),
                        format!("expected {} exponents, got {}", r.len(), vals.len()),
                    ));
                }
                e[r].copy_from_slice(vals);
            }
            out.push((Exponent(e), term.coeff));
        }
        Ok(Self::from_terms(space.clone(), out))
    }

    /// Writes the term list as pretty JSON.
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_terms()).expect("serializable")
    }
}

/// One term of the JSON encoding: `{"coeff": c, "exp": {"x": [..], "xi": [..]}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermJson {
    pub coeff: f64,
    #[serde(default)]
    pub exp: BTreeMap<String, Vec<u32>>,
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (e, c)) in self.terms.iter().enumerate() {
            let (sign, mag) = if *c < 0.0 { ("-", -c) } else { ("+", *c) };
            if i == 0 {
                if sign == "-" {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            match f.precision() {
                Some(p) => write!(f, "{mag:.p$}")?,
                None => write!(f, "{mag}")?,
            }
            if !e.is_zero() {
                write!(f, "*{}", e.display(&self.space))?;
            }
        }
        Ok(())
    }
}

impl Add<&Polynomial> for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        self.try_add(rhs).expect("polynomial spaces must match")
    }
}

impl Sub<&Polynomial> for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self.try_sub(rhs).expect("polynomial spaces must match")
    }
}

impl Mul<&Polynomial> for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        self.try_mul(rhs).expect("polynomial spaces must match")
    }
}

impl Mul<f64> for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: f64) -> Polynomial {
        self.scale(rhs)
    }
}

impl Mul<f64> for Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: f64) -> Polynomial {
        self.scale(rhs)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

/// `binomial(n, k)` as usize.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xyx() -> (VariableSpace, Polynomial, Polynomial, Polynomial) {
        let s = VariableSpace::two_stage(1, 1, 1);
        let x = Polynomial::var(&s, "x", 0).unwrap();
        let y = Polynomial::var(&s, "y", 0).unwrap();
        let xi = Polynomial::var(&s, "xi", 0).unwrap();
        (s, x, y, xi)
    }

    #[test]
    fn evaluate_examples() {
        let (_, x, y, xi) = xyx();
        let sq = (&(&x + &y) - &xi).pow(2);
        assert_eq!(sq.evaluate(&[1.0, 1.0, 2.0]).unwrap(), 0.0);

        let p = &x.pow(3) - &(&x * &xi.pow(2));
        assert_eq!(p.evaluate(&[1.0, 5.0, 0.0]).unwrap(), 1.0);

        let s = VariableSpace::single("x", 1);
        let x = Polynomial::var(&s, "x", 0).unwrap();
        let f = &(&x.pow(2) * -0.2) - &(&x * 0.01);
        assert!((f.evaluate(&[0.5]).unwrap() + 0.055).abs() < 1e-15);
    }

    #[test]
    fn evaluate_rejects_bad_dimension() {
        let (_, x, _, _) = xyx();
        assert!(matches!(
            x.evaluate(&[1.0]),
            Err(Error::DimensionMismatch { expected: 3, got: 1 })
        ));
    }

    #[test]
    fn arithmetic_examples() {
        let (s, x, y, xi) = xyx();
        let prod = &(&x + &xi) * &(&x - &xi);
        let expect = &x.pow(2) - &xi.pow(2);
        assert_eq!(prod, expect);

        let p = &(&x * 3.0) + &y;
        assert!((&p + &(-&p)).is_zero());

        let sq = (&(&x + &y) - &xi).pow(2);
        let expanded = Polynomial::from_terms(
            s.clone(),
            vec![
                (Exponent(vec![2, 0, 0]), 1.0),
                (Exponent(vec![0, 2, 0]), 1.0),
                (Exponent(vec![0, 0, 2]), 1.0),
                (Exponent(vec![1, 1, 0]), 2.0),
                (Exponent(vec![1, 0, 1]), -2.0),
                (Exponent(vec![0, 1, 1]), -2.0),
            ],
        );
        assert_eq!(sq, expanded);
    }

    #[test]
    fn space_mismatch_is_an_error() {
        let a = Polynomial::constant(VariableSpace::single("x", 1), 1.0);
        let b = Polynomial::constant(VariableSpace::single("x", 2), 1.0);
        assert!(matches!(a.try_add(&b), Err(Error::SpaceMismatch(_))));
    }

    #[test]
    fn substitute_examples() {
        let s = VariableSpace::two_stage(1, 2, 1);
        let x = Polynomial::var(&s, "x", 0).unwrap();
        let y1 = Polynomial::var(&s, "y", 0).unwrap();
        let y2 = Polynomial::var(&s, "y", 1).unwrap();
        let xi = Polynomial::var(&s, "xi", 0).unwrap();
        let f = &(&x.pow(2) * &y1) + &(&(&xi * &x) * &y2);

        let sub = f.substitute_block("xi", &[-0.1]).unwrap();
        let rest = s.without("xi").unwrap();
        let xr = Polynomial::var(&rest, "x", 0).unwrap();
        let y1r = Polynomial::var(&rest, "y", 0).unwrap();
        let y2r = Polynomial::var(&rest, "y", 1).unwrap();
        let expect = &(&xr.pow(2) * &y1r) + &(&(&xr * &y2r) * -0.1);
        assert_eq!(sub.space(), &rest);
        for (e, c) in expect.terms() {
            assert!((sub.coeff(e) - c).abs() < 1e-15);
        }
        assert_eq!(sub.num_terms(), 2);

        let sub0 = f.substitute_block("xi", &[0.0]).unwrap();
        assert_eq!(sub0, &xr.pow(2) * &y1r);
        assert!(matches!(f.substitute_block("z", &[0.0]), Err(Error::UnknownBlock(_))));
    }

    #[test]
    fn substitute_two_blocks_by_hand() {
        // g = xi^2 - (y - x)^2 at (x, xi) = (0, 1) is 1 - y^2.
        let (_, x, y, xi) = xyx();
        let g = &xi.pow(2) - &(&y - &x).pow(2);
        let g = g.substitute_block("x", &[0.0]).unwrap();
        let g = g.substitute_block("xi", &[1.0]).unwrap();
        let ys = VariableSpace::single("y", 1);
        let yv = Polynomial::var(&ys, "y", 0).unwrap();
        let expect = &Polynomial::constant(ys, 1.0) - &yv.pow(2);
        assert_eq!(g, expect);
    }

    #[test]
    fn basis_examples() {
        let s = VariableSpace::single("x", 1);
        let b = MonomialBasis::full(&s, 2);
        assert_eq!(b.exponents(), &[Exponent(vec![0]), Exponent(vec![1]), Exponent(vec![2])]);

        let s3 = VariableSpace::single("w", 3);
        assert_eq!(MonomialBasis::full(&s3, 2).len(), 10);

        let s = VariableSpace::two_stage(1, 0, 1);
        let b = MonomialBasis::bidegree(&s, &[("x", 1), ("xi", 2)]).unwrap();
        assert_eq!(b.len(), 6);
        // graded order: 1, x, xi, x*xi, xi^2, x*xi^2
        let got: Vec<Vec<u32>> = b.exponents().iter().map(|e| e.0.clone()).collect();
        assert_eq!(got, vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![1, 1], vec![0, 2], vec![1, 2]]);
    }

    #[test]
    fn graded_lex_order_matches_monomial_vector() {
        let s = VariableSpace::single("w", 2);
        let b = MonomialBasis::full(&s, 2);
        let got: Vec<Vec<u32>> = b.exponents().iter().map(|e| e.0.clone()).collect();
        assert_eq!(got, vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]);
    }

    #[test]
    fn basis_size_is_binomial() {
        for n in 1..=6 {
            for d in 0..=6u32 {
                let s = VariableSpace::single("w", n);
                assert_eq!(MonomialBasis::full(&s, d).len(), binomial(n + d as usize, d as usize));
            }
        }
    }

    #[test]
    fn partial_degrees() {
        let (_, x, y, xi) = xyx();
        let g = &xi.pow(2) - &(&y - &x).pow(2);
        assert_eq!(g.block_degree("x"), 2);
        assert_eq!(g.block_degree("y"), 2);
        assert_eq!(g.block_degree("xi"), 2);
        let f = &(&(&x + &xi) * &y.pow(3)) - &(&xi * &y.pow(2));
        assert_eq!(f.block_degree("x"), 1);
        assert_eq!(f.degree(), 4);
        let c = Polynomial::constant(x.space().clone(), 3.0);
        assert_eq!(c.block_degree("x"), 0);
    }

    #[test]
    fn json_round_trip_preserves_bits() {
        let (s, x, y, xi) = xyx();
        let p = &(&(&x * 0.1) + &(&y * (1.0 / 3.0))) + &(&xi.pow(2) * -2.718281828459045);
        let text = serde_json::to_string(&p.to_json_terms()).unwrap();
        let terms: Vec<TermJson> = serde_json::from_str(&text).unwrap();
        let q = Polynomial::from_json_terms(&s, &terms, "").unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn json_reports_pointer() {
        let s = VariableSpace::two_stage(1, 1, 1);
        let terms: Vec<TermJson> = serde_json::from_str(r#"[{"coeff":1,"exp":{"y":[1,2]}}]"#).unwrap();
        match Polynomial::from_json_terms(&s, &terms, "/F") {
            Err(Error::Schema { pointer, .. }) => assert_eq!(pointer, "/F/0/exp/y"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn embed_and_restrict() {
        let sx = VariableSpace::new([("x", 1), ("xi", 1)]).unwrap();
        let p = &Polynomial::var(&sx, "x", 0).unwrap() * &Polynomial::var(&sx, "xi", 0).unwrap();
        let full = VariableSpace::two_stage(1, 2, 1);
        let q = p.embed(&full).unwrap();
        assert_eq!(q.evaluate(&[2.0, 9.0, 9.0, 3.0]).unwrap(), 6.0);
        assert_eq!(q.restrict(&sx).unwrap(), p);
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    fn arb_poly(n: usize) -> impl Strategy<Value = Polynomial> {
        prop::collection::vec((prop::collection::vec(0u32..3, n), -5i32..=5), 0..6).prop_map(move |ts| {
            Polynomial::from_terms(
                VariableSpace::single("w", n),
                ts.into_iter().map(|(e, c)| (Exponent(e), c as f64)),
            )
        })
    }

    proptest! {
        #[test]
        fn ring_axioms_on_integer_coefficients(a in arb_poly(3), b in arb_poly(3), c in arb_poly(3)) {
            prop_assert_eq!(&a + &b, &b + &a);
            prop_assert_eq!(&a * &b, &b * &a);
            prop_assert_eq!(&(&a + &b) + &c, &a + &(&b + &c));
            prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
            prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
        }

        #[test]
        fn evaluation_is_multiplicative(a in arb_poly(3), b in arb_poly(3),
                                        v in prop::collection::vec(-1.0f64..1.0, 3)) {
            let lhs = (&a * &b).evaluate(&v).unwrap();
            let rhs = a.evaluate(&v).unwrap() * b.evaluate(&v).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
        }

        #[test]
        fn substitution_commutes_with_evaluation(coeffs in prop::collection::vec(-3.0f64..3.0, 10),
                                                 pt in prop::collection::vec(-1.0f64..1.0, 4)) {
            let s = VariableSpace::two_stage(2, 1, 1);
            let basis = MonomialBasis::full(&s, 2);
            let p = basis.polynomial(&coeffs);
            let sub = p.substitute_block("y", &pt[2..3]).unwrap();
            let direct = p.evaluate(&pt).unwrap();
            let via = sub.evaluate(&[pt[0], pt[1], pt[3]]).unwrap();
            prop_assert!((direct - via).abs() <= 1e-12);
            prop_assert!(sub.degree() <= p.degree());
        }
    }
}
