//! Standard-Gaussian moments restricted to slabs `{a <= v·x < b}`.
//!
//! The one-dimensional truncated moments `M_n(a, b) = ∫_a^b z^n φ(z) dz`
//! come from the recurrence
//!
//! ```text
//! M_0 = Φ(b) - Φ(a),   M_1 = φ(a) - φ(b),
//! M_n = (n-1) M_{n-2} + a^{n-1} φ(a) - b^{n-1} φ(b),
//! ```
//!
//! with boundary terms at ±∞ equal to zero. A multivariate strip moment is
//! reduced to these by rotating into a frame whose first axis is `v`: the
//! remaining coordinates are independent standard normals and contribute
//! full-line moments `(m-1)!!`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use libm::erfc;

use crate::error::{invalid, Error, Result};
use crate::linalg::{CompensatedSum, SymMatrix};
use crate::points::PointSet;
use crate::poly::{
    basis_size, complete_basis, compose_with_rotation, Direction, MonomialBasis, MultiIndex, SparsePolynomial,
    DEFAULT_BASIS_CAP,
};

pub fn normal_pdf(z: f64) -> f64 {
    if z.is_infinite() {
        0.0
    } else {
        (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
    }
}

pub fn normal_cdf(z: f64) -> f64 {
    if z == f64::INFINITY {
        1.0
    } else if z == f64::NEG_INFINITY {
        0.0
    } else {
        0.5 * erfc(-z * FRAC_1_SQRT_2)
    }
}

fn upper_tail(z: f64) -> f64 {
    normal_cdf(-z)
}

/// `Φ(b) - Φ(a)`, evaluated on whichever side avoids cancellation.
pub fn normal_mass(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        upper_tail(a) - upper_tail(b)
    } else if b <= 0.0 {
        normal_cdf(b) - normal_cdf(a)
    } else {
        1.0 - normal_cdf(a) - upper_tail(b)
    }
}

/// `E[z^n]` for `z ~ N(0, 1)`: zero for odd `n`, `(n-1)!!` for even `n`.
pub fn gaussian_moment_1d(n: u32) -> f64 {
    if n % 2 == 1 {
        return 0.0;
    }
    if n <= 150 {
        (1..n).step_by(2).map(f64::from).product()
    } else {
        (1..n).step_by(2).map(|m| f64::from(m).ln()).sum::<f64>().exp()
    }
}

// t^m φ(t), zero at infinity.
fn boundary_term(t: f64, m: u32) -> f64 {
    if t.is_infinite() {
        0.0
    } else {
        t.powi(m as i32) * normal_pdf(t)
    }
}

fn check_interval(a: f64, b: f64) -> Result<()> {
    if a.is_nan() || b.is_nan() || !(a < b) {
        return Err(Error::InvalidInterval { a, b });
    }
    Ok(())
}

/// `M_0..=M_{n_max}` for one interval.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedMomentTable {
    a: f64,
    b: f64,
    values: Vec<f64>,
}

impl TruncatedMomentTable {
    pub fn new(a: f64, b: f64, n_max: u32) -> Result<Self> {
        check_interval(a, b)?;
        let mut values = Vec::with_capacity(n_max as usize + 1);
        values.push(normal_mass(a, b));
        if n_max >= 1 {
            values.push(normal_pdf(a) - normal_pdf(b));
        }
        for n in 2..=n_max {
            let prev = values[(n - 2) as usize];
            values.push(f64::from(n - 1) * prev + boundary_term(a, n - 1) - boundary_term(b, n - 1));
        }
        Ok(TruncatedMomentTable { a, b, values })
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn get(&self, n: u32) -> f64 {
        self.values[n as usize]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// `(1/√(2π)) ∫_a^b z^n e^{-z²/2} dz`.
pub fn truncated_moment_1d(n: u32, a: f64, b: f64) -> Result<f64> {
    Ok(TruncatedMomentTable::new(a, b, n)?.get(n))
}

/// The slab `{x : a <= v·x < b}`; either bound may be infinite.
#[derive(Clone, Debug, PartialEq)]
pub struct StripSpec {
    v: Direction,
    a: f64,
    b: f64,
}

impl StripSpec {
    pub fn new(v: Direction, a: f64, b: f64) -> Result<Self> {
        check_interval(a, b)?;
        Ok(StripSpec { v, a, b })
    }

    pub fn direction(&self) -> &Direction {
        &self.v
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.contains_projection(self.v.dot(x))
    }

    pub fn contains_projection(&self, t: f64) -> bool {
        self.a <= t && t < self.b
    }
}

/// Position of a strip within a [`StripPartition`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StripId {
    /// `(-∞, -Kε)`
    LowerTail,
    /// `[iε, (i+1)ε)`
    Interior(i64),
    /// `[Kε, ∞)`
    UpperTail,
}

/// Number of interior strips on each side of the origin:
/// `K = ⌈(2/ε) √(ln(2/ε))⌉`.
pub fn strip_cutoff(eps: f64) -> Result<usize> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid("eps", format!("must lie in (0, 1), got {eps}")));
    }
    Ok(((2.0 / eps) * (2.0 / eps).ln().sqrt()).ceil() as usize)
}

/// Cover of `R^d` by slabs along `v`: the lower tail, `2K` interior strips of
/// width `ε`, then the upper tail.
#[derive(Clone, Debug, PartialEq)]
pub struct StripPartition {
    v: Direction,
    eps: f64,
    cutoff: usize,
}

impl StripPartition {
    pub fn new(v: Direction, eps: f64) -> Result<Self> {
        let cutoff = strip_cutoff(eps)?;
        Self::with_cutoff(v, eps, cutoff)
    }

    pub fn with_cutoff(v: Direction, eps: f64, cutoff: usize) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(invalid("eps", "strip width must be positive"));
        }
        if cutoff == 0 {
            return Err(invalid("cutoff", "need at least one strip per side"));
        }
        Ok(StripPartition { v, eps, cutoff })
    }

    pub fn direction(&self) -> &Direction {
        &self.v
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn len(&self) -> usize {
        2 * self.cutoff + 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn edge(&self, i: i64) -> f64 {
        i as f64 * self.eps
    }

    pub fn id(&self, index: usize) -> StripId {
        let k = self.cutoff as i64;
        match index {
            0 => StripId::LowerTail,
            i if i == self.len() - 1 => StripId::UpperTail,
            i => StripId::Interior(i as i64 - 1 - k),
        }
    }

    pub fn bounds(&self, index: usize) -> (f64, f64) {
        let k = self.cutoff as i64;
        match self.id(index) {
            StripId::LowerTail => (f64::NEG_INFINITY, self.edge(-k)),
            StripId::UpperTail => (self.edge(k), f64::INFINITY),
            StripId::Interior(i) => (self.edge(i), self.edge(i + 1)),
        }
    }

    pub fn spec(&self, index: usize) -> StripSpec {
        let (a, b) = self.bounds(index);
        StripSpec {
            v: self.v.clone(),
            a,
            b,
        }
    }

    /// Index of the strip containing projection `t = v·x`. Consistent with
    /// [`StripPartition::bounds`] at every edge.
    pub fn locate(&self, t: f64) -> usize {
        let k = self.cutoff as i64;
        if t < self.edge(-k) {
            return 0;
        }
        if t >= self.edge(k) {
            return self.len() - 1;
        }
        let mut i = ((t / self.eps).floor() as i64).clamp(-k, k - 1);
        while i > -k && t < self.edge(i) {
            i -= 1;
        }
        while i < k - 1 && t >= self.edge(i + 1) {
            i += 1;
        }
        (i + 1 + k) as usize
    }
}

/// Strip moments of every monomial of degree `<= D` along a fixed direction.
///
/// Stores coefficients `g[α][n]` such that
/// `E_{x~N}[x^α 1{a <= v·x < b}] = Σ_n g[α][n] M_n(a, b)`, so evaluating all
/// moments for a new strip costs one recurrence table plus a short dot
/// product per monomial.
#[derive(Clone, Debug)]
pub struct StripMomentKernel {
    v: Direction,
    basis: MonomialBasis,
    coefficients: Vec<Vec<f64>>,
}

impl StripMomentKernel {
    pub fn new(v: &Direction, degree: usize) -> Result<Self> {
        let d = v.dim();
        let basis = MonomialBasis::new(d, degree)?;
        let vs = v.as_slice();
        let m = basis.len();

        // Given v·x = t, x ~ N(t v, I - v vᵀ), so f_α(t) = E[x^α | t] obeys
        // f_{α+e_j} = t v_j f_α + Σ_i (δ_ij - v_i v_j) α_i f_{α-e_i}.
        let mut coefficients: Vec<Vec<f64>> = Vec::with_capacity(m);
        coefficients.push(vec![1.0]);
        for idx in 1..m {
            let (parent, j) = basis.parent(idx);
            let alpha = &basis.indices()[parent];
            let mut g = vec![0.0; alpha.degree() as usize + 2];
            for (n, c) in coefficients[parent].iter().enumerate() {
                g[n + 1] += vs[j] * c;
            }
            for (i, &e) in alpha.exponents().iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let cov = if i == j { 1.0 } else { 0.0 } - vs[i] * vs[j];
                if cov == 0.0 {
                    continue;
                }
                let mut lower = alpha.exponents().to_vec();
                lower[i] -= 1;
                let li = basis
                    .index_of(&MultiIndex::new(lower))
                    .expect("lower monomial in basis");
                for (n, c) in coefficients[li].iter().enumerate() {
                    g[n] += cov * f64::from(e) * c;
                }
            }
            coefficients.push(g);
        }

        Ok(StripMomentKernel {
            v: v.clone(),
            basis,
            coefficients,
        })
    }

    pub fn direction(&self) -> &Direction {
        &self.v
    }

    pub fn basis(&self) -> &MonomialBasis {
        &self.basis
    }

    pub fn moment(&self, index: usize, table: &TruncatedMomentTable) -> f64 {
        self.coefficients[index]
            .iter()
            .enumerate()
            .map(|(n, g)| g * table.get(n as u32))
            .sum()
    }

    /// Strip moments of every basis monomial for the slab `[a, b)`.
    pub fn moments(&self, a: f64, b: f64) -> Result<Vec<f64>> {
        let table = TruncatedMomentTable::new(a, b, self.basis.degree() as u32)?;
        Ok((0..self.basis.len()).map(|i| self.moment(i, &table)).collect())
    }
}

/// `E_{x~N(0,I)}[x^α 1{a <= v·x < b}]`, by rotating `x^α` into the frame of
/// `v` and integrating coordinate by coordinate.
pub fn gaussian_strip_moment(alpha: &MultiIndex, strip: &StripSpec) -> Result<f64> {
    let d = strip.v.dim();
    if alpha.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: alpha.dim(),
        });
    }
    let degree = alpha.degree() as usize;
    if basis_size(d, degree).is_none_or(|n| n > DEFAULT_BASIS_CAP) {
        return Err(Error::BasisTooLarge {
            d,
            k: degree,
            cap: DEFAULT_BASIS_CAP,
        });
    }
    let frame = complete_basis(&strip.v);
    let transpose: Vec<Vec<f64>> = (0..d).map(|j| frame.iter().map(|r| r[j]).collect()).collect();
    let rotated = compose_with_rotation(&SparsePolynomial::monomial(alpha.clone(), 1.0), &transpose)?;
    let table = TruncatedMomentTable::new(strip.a, strip.b, degree as u32)?;
    let mut sum = CompensatedSum::default();
    for (beta, c) in rotated.terms() {
        let e = beta.exponents();
        let rest: f64 = e[1..].iter().map(|&m| gaussian_moment_1d(m)).product();
        if rest != 0.0 {
            sum.add(c * rest * table.get(e[0]));
        }
    }
    Ok(sum.value())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentProvenance {
    GaussianStrip,
    Empirical,
}

/// Strip-restricted cross-moments `E[x^α x^γ 1_strip]` over the degree-`≤ k`
/// monomial basis.
#[derive(Clone, Debug)]
pub struct MomentMatrix {
    pub degree: usize,
    pub entries: SymMatrix,
    pub provenance: MomentProvenance,
    pub strip: StripSpec,
    /// Per-entry accuracy target (Gaussian provenance only).
    pub entry_accuracy: Option<f64>,
}

/// Index of `α + γ` in the degree-`2k` basis for every pair of degree-`≤ k`
/// monomials.
#[derive(Clone, Debug)]
pub(crate) struct PairIndex {
    pub(crate) order: usize,
    table: Vec<usize>,
}

impl PairIndex {
    pub(crate) fn new(small: &MonomialBasis, large: &MonomialBasis) -> Self {
        let n = small.len();
        let mut table = vec![0; n * n];
        for i in 0..n {
            for j in i..n {
                let sum = small.indices()[i].add(&small.indices()[j]);
                let idx = large.index_of(&sum).expect("pair sum within doubled basis");
                table[i * n + j] = idx;
                table[j * n + i] = idx;
            }
        }
        PairIndex { order: n, table }
    }

    pub(crate) fn get(&self, i: usize, j: usize) -> usize {
        self.table[i * self.order + j]
    }
}

/// Gaussian moment matrices along one direction, reusing a degree-`2k`
/// kernel across strips.
#[derive(Clone, Debug)]
pub struct GaussianMomentEngine {
    kernel: StripMomentKernel,
    basis: MonomialBasis,
    pairs: PairIndex,
}

impl GaussianMomentEngine {
    pub fn new(v: &Direction, k: usize) -> Result<Self> {
        let basis = MonomialBasis::new(v.dim(), k)?;
        let kernel = StripMomentKernel::new(v, 2 * k)?;
        let pairs = PairIndex::new(&basis, kernel.basis());
        Ok(GaussianMomentEngine { kernel, basis, pairs })
    }

    pub fn basis(&self) -> &MonomialBasis {
        &self.basis
    }

    pub fn matrix(&self, a: f64, b: f64) -> Result<SymMatrix> {
        let moments = self.kernel.moments(a, b)?;
        Ok(SymMatrix::from_upper_fn(self.basis.len(), |i, j| {
            moments[self.pairs.get(i, j)]
        }))
    }
}

/// The matrix `W^{a,b}` approximating `E_{x~N}[(x^{⊗k})(x^{⊗k})ᵀ 1_strip]`
/// within spectral distance `β`.
///
/// Entries are closed-form and exact to rounding, which is far below the
/// per-entry budget `β (d+1)^{-k/2}` recorded in `entry_accuracy`.
pub fn gaussian_moment_matrix(strip: &StripSpec, k: usize, beta: f64) -> Result<MomentMatrix> {
    if !(beta > 0.0) {
        return Err(invalid("beta", "spectral accuracy must be positive"));
    }
    let engine = GaussianMomentEngine::new(&strip.v, k)?;
    let entries = engine.matrix(strip.a, strip.b)?;
    let d = strip.v.dim() as f64;
    Ok(MomentMatrix {
        degree: k,
        entries,
        provenance: MomentProvenance::GaussianStrip,
        strip: strip.clone(),
        entry_accuracy: Some(beta * (d + 1.0).powf(-(k as f64) / 2.0)),
    })
}

/// `E_{x~S}[x^α 1_strip]` (divides by `|S|`).
pub fn empirical_strip_moment(s: &PointSet, alpha: &MultiIndex, strip: &StripSpec) -> Result<f64> {
    if s.is_empty() {
        return Err(Error::EmptySet);
    }
    if s.dim() != alpha.dim() || s.dim() != strip.v.dim() {
        return Err(Error::DimensionMismatch {
            expected: strip.v.dim(),
            got: s.dim(),
        });
    }
    let mut sum = CompensatedSum::default();
    for x in s.iter().filter(|x| strip.contains(x)) {
        sum.add(alpha.eval(x));
    }
    Ok(sum.value() / s.len() as f64)
}

/// `(1/U) Σ_{x∈S} (x^{⊗k})(x^{⊗k})ᵀ 1_strip(x)`, with `U >= |S|`.
pub fn empirical_moment_matrix(s: &PointSet, normalizer: f64, strip: &StripSpec, k: usize) -> Result<MomentMatrix> {
    if !(normalizer > 0.0) || normalizer < s.len() as f64 {
        return Err(Error::NormalizerTooSmall {
            u: normalizer,
            n: s.len(),
        });
    }
    if s.dim() != strip.v.dim() {
        return Err(Error::DimensionMismatch {
            expected: strip.v.dim(),
            got: s.dim(),
        });
    }
    let basis = MonomialBasis::new(s.dim(), k)?;
    let entries = accumulate_outer(&basis, s.iter().filter(|x| strip.contains(x)), normalizer);
    Ok(MomentMatrix {
        degree: k,
        entries,
        provenance: MomentProvenance::Empirical,
        strip: strip.clone(),
        entry_accuracy: None,
    })
}

/// `(1/U) Σ m(x) m(x)ᵀ` over the given points, summed in iteration order.
pub(crate) fn accumulate_outer<'a>(
    basis: &MonomialBasis,
    points: impl Iterator<Item = &'a [f64]>,
    normalizer: f64,
) -> SymMatrix {
    let n = basis.len();
    let mut upper = vec![0.0; n * (n + 1) / 2];
    let mut m = vec![0.0; n];
    for x in points {
        basis.evaluate_into(x, &mut m);
        let mut pos = 0;
        for i in 0..n {
            let mi = m[i];
            for mj in &m[i..] {
                upper[pos] += mi * mj;
                pos += 1;
            }
        }
    }
    let mut pos = 0;
    let mut offsets = vec![0; n];
    for (i, o) in offsets.iter_mut().enumerate() {
        *o = pos;
        pos += n - i;
    }
    SymMatrix::from_upper_fn(n, |i, j| upper[offsets[i] + (j - i)] / normalizer)
}
