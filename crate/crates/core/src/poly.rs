//! Multi-index monomials, sparse polynomials over `R^d`, unit directions and
//! orthonormal frame completion.
//!
//! Every moment vector and moment matrix in the crate is indexed by the
//! graded ordering produced by [`enumerate_multi_indices`]: monomials are
//! sorted by total degree, and within a degree by exponent vectors in
//! descending lexicographic order, so `x1` precedes `x2` and `x1^2` precedes
//! `x1 x2`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{dot, norm};

/// Largest monomial basis any routine will build unless told otherwise.
pub const DEFAULT_BASIS_CAP: usize = 20_000;

/// Tolerance on `|‖v‖ - 1|` accepted by [`Direction::new`].
pub const UNIT_TOLERANCE: f64 = 1e-12;

/// Tolerance on `max |B Bᵀ - I|` accepted by [`compose_with_rotation`].
pub const ORTHONORMAL_TOLERANCE: f64 = 1e-10;

/// Exponent vector `α` of the monomial `x^α = ∏ x_j^{α_j}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex(exponents)
    }

    pub fn zero(d: usize) -> Self {
        MultiIndex(vec![0; d])
    }

    pub fn unit(d: usize, j: usize) -> Self {
        let mut e = vec![0; d];
        e[j] = 1;
        MultiIndex(e)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        debug_assert_eq!(self.dim(), other.dim());
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// Evaluates `x^α`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .filter(|(e, _)| **e > 0)
            .map(|(&e, &xi)| xi.powi(e as i32))
            .product()
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// `C(n, k)`, or `None` on overflow.
pub fn binomial(n: usize, k: usize) -> Option<usize> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    usize::try_from(acc).ok()
}

/// Number of monomials of degree at most `k` in `d` variables.
pub fn basis_size(d: usize, k: usize) -> Option<usize> {
    binomial(d.checked_add(k)?, k)
}

pub fn enumerate_multi_indices(d: usize, k: usize) -> Result<Vec<MultiIndex>> {
    enumerate_multi_indices_capped(d, k, DEFAULT_BASIS_CAP)
}

pub fn enumerate_multi_indices_capped(d: usize, k: usize, cap: usize) -> Result<Vec<MultiIndex>> {
    if d == 0 {
        return Err(invalid("d", "dimension must be at least 1"));
    }
    match basis_size(d, k) {
        Some(n) if n <= cap => {}
        _ => return Err(Error::BasisTooLarge { d, k, cap }),
    }
    let mut out = Vec::new();
    let mut scratch = vec![0u32; d];
    for degree in 0..=k as u32 {
        compositions(degree, 0, &mut scratch, &mut out);
    }
    Ok(out)
}

// Writes every exponent vector with the given remaining degree in slots
// `pos..`, largest leading exponent first.
fn compositions(remaining: u32, pos: usize, scratch: &mut [u32], out: &mut Vec<MultiIndex>) {
    if pos + 1 == scratch.len() {
        scratch[pos] = remaining;
        out.push(MultiIndex(scratch.to_vec()));
        return;
    }
    for e in (0..=remaining).rev() {
        scratch[pos] = e;
        compositions(remaining - e, pos + 1, scratch, out);
    }
    scratch[pos] = 0;
}

/// The ordered list of degree-`≤ k` monomials in `d` variables together with
/// a lookup table and a recipe for fast evaluation.
#[derive(Clone, Debug)]
pub struct MonomialBasis {
    dim: usize,
    degree: usize,
    indices: Vec<MultiIndex>,
    position: HashMap<MultiIndex, usize>,
    // indices[i] = indices[parent[i].0] + e_{parent[i].1}, for i > 0
    parent: Vec<(usize, usize)>,
}

impl MonomialBasis {
    pub fn new(d: usize, k: usize) -> Result<Self> {
        Self::with_cap(d, k, DEFAULT_BASIS_CAP)
    }

    pub fn with_cap(d: usize, k: usize, cap: usize) -> Result<Self> {
        let indices = enumerate_multi_indices_capped(d, k, cap)?;
        let position: HashMap<MultiIndex, usize> = indices.iter().enumerate().map(|(i, a)| (a.clone(), i)).collect();
        let parent = indices
            .iter()
            .map(|alpha| {
                let Some(j) = alpha.0.iter().position(|&e| e > 0) else {
                    return (0, 0);
                };
                let mut p = alpha.0.clone();
                p[j] -= 1;
                (position[&MultiIndex(p)], j)
            })
            .collect();
        Ok(MonomialBasis {
            dim: d,
            degree: k,
            indices,
            position,
            parent,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn index_of(&self, alpha: &MultiIndex) -> Option<usize> {
        self.position.get(alpha).copied()
    }

    /// `(parent, coordinate)` such that monomial `i` is monomial `parent`
    /// times `x_coordinate`. Entry 0 (the constant) maps to `(0, 0)`.
    pub fn parent(&self, i: usize) -> (usize, usize) {
        self.parent[i]
    }

    /// Writes `x^α` for every basis element into `out`.
    pub fn evaluate_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(out.len(), self.indices.len());
        out[0] = 1.0;
        for i in 1..self.indices.len() {
            let (p, j) = self.parent[i];
            out[i] = out[p] * x[j];
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.evaluate_into(x, &mut out);
        out
    }
}

/// The vector `x^{⊗k}` of all monomials of degree at most `k` evaluated at `x`.
pub fn monomial_vector(x: &[f64], k: usize) -> Result<Vec<f64>> {
    if let Some(v) = x.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("coordinate {v}")));
    }
    Ok(MonomialBasis::new(x.len(), k)?.evaluate(x))
}

/// Polynomial over `R^d` stored as a map from exponent vector to coefficient.
/// Zero coefficients are never stored.
#[derive(Clone, Debug, PartialEq)]
pub struct SparsePolynomial {
    dim: usize,
    terms: BTreeMap<MultiIndex, f64>,
}

impl SparsePolynomial {
    pub fn zero(dim: usize) -> Self {
        SparsePolynomial {
            dim,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        let mut p = Self::zero(dim);
        p.add_term(MultiIndex::zero(dim), c);
        p
    }

    pub fn monomial(alpha: MultiIndex, coefficient: f64) -> Self {
        let mut p = Self::zero(alpha.dim());
        p.add_term(alpha, coefficient);
        p
    }

    /// The linear form `Σ_j coefficients[j] x_j`.
    pub fn linear(coefficients: &[f64]) -> Self {
        let d = coefficients.len();
        let mut p = Self::zero(d);
        for (j, &c) in coefficients.iter().enumerate() {
            p.add_term(MultiIndex::unit(d, j), c);
        }
        p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(MultiIndex::degree).max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, f64)> {
        self.terms.iter().map(|(a, &c)| (a, c))
    }

    pub fn coefficient(&self, alpha: &MultiIndex) -> f64 {
        self.terms.get(alpha).copied().unwrap_or(0.0)
    }

    pub fn add_term(&mut self, alpha: MultiIndex, c: f64) {
        debug_assert_eq!(alpha.dim(), self.dim);
        if c == 0.0 {
            return;
        }
        let entry = self.terms.entry(alpha).or_insert(0.0);
        *entry += c;
        if *entry == 0.0 {
            self.terms.retain(|_, v| *v != 0.0);
        }
    }

    pub fn add(&self, other: &SparsePolynomial) -> SparsePolynomial {
        let mut out = self.clone();
        for (a, c) in other.terms() {
            out.add_term(a.clone(), c);
        }
        out
    }

    pub fn scale(&self, s: f64) -> SparsePolynomial {
        let mut out = Self::zero(self.dim);
        for (a, c) in self.terms() {
            out.add_term(a.clone(), c * s);
        }
        out
    }

    pub fn mul(&self, other: &SparsePolynomial) -> SparsePolynomial {
        debug_assert_eq!(self.dim, other.dim);
        let mut out = Self::zero(self.dim);
        for (a, ca) in self.terms() {
            for (b, cb) in other.terms() {
                out.add_term(a.add(b), ca * cb);
            }
        }
        out
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms().map(|(a, c)| c * a.eval(x)).sum()
    }

    /// ℓ2 norm of the coefficient vector.
    pub fn coef_norm(&self) -> f64 {
        self.terms().map(|(_, c)| c * c).sum::<f64>().sqrt()
    }
}

/// Returns `q` with `q(x) = p(Bx)`, expanding by repeated sparse
/// multiplication. `b` is given by rows and must be orthonormal.
pub fn compose_with_rotation(p: &SparsePolynomial, b: &[Vec<f64>]) -> Result<SparsePolynomial> {
    let d = p.dim();
    if b.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: b.len(),
        });
    }
    if let Some(row) = b.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: row.len(),
        });
    }
    let deviation = orthonormality_defect(b);
    if !(deviation <= ORTHONORMAL_TOLERANCE) {
        return Err(Error::NotOrthonormal { deviation });
    }
    Ok(substitute_linear(p, b))
}

/// `max |B Bᵀ - I|` over all entries.
pub fn orthonormality_defect(rows: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, ri) in rows.iter().enumerate() {
        for (j, rj) in rows.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            let dev = (dot(ri, rj) - target).abs();
            worst = if dev.is_nan() { f64::NAN } else { worst.max(dev) };
        }
    }
    worst
}

// Substitutes x_j ↦ forms[j]·x into p without any orthonormality check.
pub(crate) fn substitute_linear(p: &SparsePolynomial, forms: &[Vec<f64>]) -> SparsePolynomial {
    let d = p.dim();
    let linear: Vec<SparsePolynomial> = forms.iter().map(|f| SparsePolynomial::linear(f)).collect();
    let mut powers: HashMap<(usize, u32), SparsePolynomial> = HashMap::new();
    let mut out = SparsePolynomial::zero(d);
    for (alpha, c) in p.terms() {
        let mut term = SparsePolynomial::constant(d, c);
        for (j, &e) in alpha.exponents().iter().enumerate() {
            if e == 0 {
                continue;
            }
            let power = power_of(&linear[j], j, e, &mut powers);
            term = term.mul(&power);
        }
        for (a, coef) in term.terms() {
            out.add_term(a.clone(), coef);
        }
    }
    out
}

fn power_of(
    base: &SparsePolynomial,
    j: usize,
    e: u32,
    cache: &mut HashMap<(usize, u32), SparsePolynomial>,
) -> SparsePolynomial {
    if let Some(p) = cache.get(&(j, e)) {
        return p.clone();
    }
    let p = if e == 1 {
        base.clone()
    } else {
        power_of(base, j, e - 1, cache).mul(base)
    };
    cache.insert((j, e), p.clone());
    p
}

/// A unit vector in `R^d`; the normal of the halfspace `sign(v·x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Direction(Vec<f64>);

impl Direction {
    /// Wraps `components`, which must already have unit norm.
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(invalid("direction", "must have at least one component"));
        }
        if components.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("direction component".into()));
        }
        let n = norm(&components);
        if (n - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::NotUnit { norm: n });
        }
        Ok(Direction(components))
    }

    /// Rescales `components` to unit norm.
    pub fn normalized(components: Vec<f64>) -> Result<Self> {
        if components.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("direction component".into()));
        }
        let n = norm(&components);
        if components.is_empty() || n == 0.0 {
            return Err(Error::NotUnit { norm: n });
        }
        Ok(Direction(components.into_iter().map(|c| c / n).collect()))
    }

    /// The coordinate axis `e_j` in `R^d`.
    pub fn axis(d: usize, j: usize) -> Self {
        let mut e = vec![0.0; d];
        e[j] = 1.0;
        Direction(e)
    }

    /// A direction drawn uniformly from the sphere.
    pub fn random<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Self {
        loop {
            let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            if let Ok(v) = Direction::normalized(g) {
                return v;
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        dot(&self.0, x)
    }

    pub fn negated(&self) -> Direction {
        Direction(self.0.iter().map(|c| -c).collect())
    }

    /// The halfspace label `sign(v·x)` with `sign(0) = +1`.
    pub fn classify(&self, x: &[f64]) -> i8 {
        sign(self.dot(x))
    }
}

impl TryFrom<Vec<f64>> for Direction {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Direction::new(v)
    }
}

impl From<Direction> for Vec<f64> {
    fn from(v: Direction) -> Self {
        v.0
    }
}

/// `sign(t)` with the convention `sign(0) = +1`.
pub fn sign(t: f64) -> i8 {
    if t >= 0.0 {
        1
    } else {
        -1
    }
}

/// Orthonormal rows whose first row is `v`.
///
/// The remaining rows come from two-pass Gram–Schmidt over the coordinate
/// axes in index order, skipping the axis of largest `|v_j|` (first one on
/// ties), so the frame is a deterministic function of `v`.
pub fn complete_basis(v: &Direction) -> Vec<Vec<f64>> {
    let d = v.dim();
    let comps = v.as_slice();
    let pivot = comps
        .iter()
        .enumerate()
        .fold(0, |best, (j, c)| if c.abs() > comps[best].abs() { j } else { best });
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(d);
    rows.push(comps.to_vec());
    for j in (0..d).filter(|&j| j != pivot) {
        let mut w = vec![0.0; d];
        w[j] = 1.0;
        for _ in 0..2 {
            for r in &rows {
                let proj = dot(&w, r);
                for (wi, ri) in w.iter_mut().zip(r) {
                    *wi -= proj * ri;
                }
            }
        }
        let n = norm(&w);
        rows.push(w.into_iter().map(|c| c / n).collect());
    }
    rows
}

/// Angle between two unit vectors, in `[0, π]`.
///
/// Computed as `2·atan2(‖u - v‖, ‖u + v‖)`, which equals the arccosine of the
/// clamped dot product but keeps full precision for nearly parallel or
/// antipodal pairs.
pub fn angle_between(u: &Direction, v: &Direction) -> f64 {
    let (mut diff, mut sum) = (0.0, 0.0);
    for (a, b) in u.as_slice().iter().zip(v.as_slice()) {
        diff += (a - b) * (a - b);
        sum += (a + b) * (a + b);
    }
    2.0 * diff.sqrt().atan2(sum.sqrt())
}

/// Angle between a unit direction and an arbitrary nonzero vector.
pub(crate) fn angle_to_point(v: &Direction, x: &[f64]) -> f64 {
    let n = norm(x);
    if n == 0.0 {
        return std::f64::consts::FRAC_PI_2;
    }
    let (mut diff, mut sum) = (0.0, 0.0);
    for (a, b) in v.as_slice().iter().zip(x) {
        let b = b / n;
        diff += (a - b) * (a - b);
        sum += (a + b) * (a + b);
    }
    2.0 * diff.sqrt().atan2(sum.sqrt())
}
