//! Strip-wise certification testers.
//!
//! Both testers bucket points by `v·x` into the strips of a
//! [`StripPartition`]. The disagreement tester compares every low-degree
//! strip moment of the sample against its Gaussian value; the spectral tester
//! checks that the sample's strip moment matrix, normalized by `U`, is
//! dominated by the Gaussian one plus `ΔI`.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Mutex, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error, Result};
use crate::gauss::{strip_cutoff, GaussianMomentEngine, StripId, StripMomentKernel, StripPartition};
use crate::linalg::{CompensatedSum, SymMatrix};
use crate::points::PointSet;
use crate::poly::{basis_size, Direction, MonomialBasis, MultiIndex, DEFAULT_BASIS_CAP};
use crate::seed::{derive_seed, rng_from_seed};

/// Soundness slack, in units of `ε`, certified by an accepting disagreement
/// test.
pub const DISAGREEMENT_SOUNDNESS: f64 = 2.0;

/// Soundness slack, in units of `ε`, certified by an accepting spectral test.
pub const SPECTRAL_SOUNDNESS: f64 = 2.0;

/// Default absolute constant for the asymptotic threshold formula.
pub const DEFAULT_FORMULA_CONSTANT: f64 = 2.0;

pub const DEFAULT_CALIBRATION_TRIALS: usize = 100;
pub const DEFAULT_CALIBRATION_QUANTILE: f64 = 0.95;

// Points per accumulation block. Fixed so that sums do not depend on the
// thread count.
const CHUNK: usize = 2048;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TesterKind {
    Disagreement,
    Spectral,
}

/// How the rejection threshold `Δ` (and, for the asymptotic formula, the degree
/// `k`) is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ThresholdPolicy {
    /// `k = ⌈C/μ⁴⌉`, `Δ = ε/(CK d^{Ck})` for the disagreement tester and
    /// `k = ⌈C/μ⁵⌉`, `Δ = ε²/(CK d^{Ck})` for the spectral tester.
    Formula {
        c: f64,
    },
    Fixed(f64),
    /// Empirical `quantile` of the test statistic over `trials` Gaussian
    /// datasets of the same size.
    Calibrated {
        trials: usize,
        quantile: f64,
        seed: u64,
    },
}

impl Default for ThresholdPolicy {
    fn default() -> Self {
        ThresholdPolicy::Calibrated {
            trials: DEFAULT_CALIBRATION_TRIALS,
            quantile: DEFAULT_CALIBRATION_QUANTILE,
            seed: 0,
        }
    }
}

impl ThresholdPolicy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ThresholdPolicy::Formula { c } if !(c > 0.0 && c.is_finite()) => {
                Err(invalid("policy", format!("formula constant must be positive, got {c}")))
            }
            ThresholdPolicy::Fixed(delta) if !(delta > 0.0 && delta.is_finite()) => Err(invalid(
                "policy",
                format!("fixed threshold must be positive, got {delta}"),
            )),
            ThresholdPolicy::Calibrated { trials, .. } if trials < 20 => Err(invalid(
                "policy",
                format!("calibration needs at least 20 trials, got {trials}"),
            )),
            ThresholdPolicy::Calibrated { quantile, .. } if !(quantile > 0.5 && quantile < 1.0) => Err(invalid(
                "policy",
                format!("quantile must lie in (0.5, 1), got {quantile}"),
            )),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for ThresholdPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThresholdPolicy::Formula { c } => write!(f, "paper:{c}"),
            ThresholdPolicy::Fixed(delta) => write!(f, "fixed:{delta}"),
            ThresholdPolicy::Calibrated { trials, quantile, seed } => {
                write!(f, "calibrated:{trials}:{quantile}:{seed}")
            }
        }
    }
}

impl FromStr for ThresholdPolicy {
    type Err = Error;

    /// Accepts `paper[:C]`, `fixed:Δ` and `calibrated[:trials:quantile[:seed]]`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |p: &str| -> Result<f64> {
            p.parse::<f64>()
                .map_err(|_| invalid("policy", format!("`{p}` is not a number")))
        };
        let int = |p: &str| -> Result<u64> {
            p.parse::<u64>()
                .map_err(|_| invalid("policy", format!("`{p}` is not a non-negative integer")))
        };
        let policy = match parts.as_slice() {
            ["paper"] => ThresholdPolicy::Formula {
                c: DEFAULT_FORMULA_CONSTANT,
            },
            ["paper", c] => ThresholdPolicy::Formula { c: num(c)? },
            ["fixed", delta] => ThresholdPolicy::Fixed(num(delta)?),
            ["calibrated"] => ThresholdPolicy::default(),
            ["calibrated", trials, quantile] => ThresholdPolicy::Calibrated {
                trials: int(trials)? as usize,
                quantile: num(quantile)?,
                seed: 0,
            },
            ["calibrated", trials, quantile, seed] => ThresholdPolicy::Calibrated {
                trials: int(trials)? as usize,
                quantile: num(quantile)?,
                seed: int(seed)?,
            },
            _ => return Err(invalid("policy", format!("unrecognized policy `{s}`"))),
        };
        policy.validate()?;
        Ok(policy)
    }
}

impl Serialize for ThresholdPolicy {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ThresholdPolicy {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Accuracy parameters shared by both testers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestParams {
    pub eps: f64,
    pub delta: f64,
    pub mu: f64,
    /// Monomial degree. Ignored under [`ThresholdPolicy::Formula`].
    pub k: usize,
}

impl TestParams {
    pub fn new(eps: f64, delta: f64, mu: f64, k: usize) -> Self {
        TestParams { eps, delta, mu, k }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("eps", self.eps), ("delta", self.delta), ("mu", self.mu)] {
            if !(value > 0.0 && value < 1.0) {
                return Err(invalid(name, format!("must lie in (0, 1), got {value}")));
            }
        }
        if self.k == 0 {
            return Err(invalid("k", "degree must be at least 1"));
        }
        Ok(())
    }
}

/// Degree and threshold prescribed by the asymptotic formula.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FormulaParameters {
    pub k: usize,
    pub cutoff: usize,
    /// May underflow to zero; computed in log space.
    pub threshold: f64,
}

pub fn formula_parameters(kind: TesterKind, d: usize, eps: f64, mu: f64, c: f64) -> Result<FormulaParameters> {
    let cutoff = strip_cutoff(eps)?;
    let (k_real, numerator) = match kind {
        TesterKind::Disagreement => (c / mu.powi(4), eps),
        TesterKind::Spectral => (c / mu.powi(5), eps * eps),
    };
    if !k_real.is_finite() || k_real > u32::MAX as f64 {
        return Err(invalid("k", format!("formula degree {k_real} is out of range")));
    }
    let k = k_real.ceil() as usize;
    let log_threshold = numerator.ln() - c.ln() - (cutoff as f64).ln() - c * k as f64 * (d as f64).ln();
    Ok(FormulaParameters {
        k,
        cutoff,
        threshold: log_threshold.exp(),
    })
}

fn check_basis(d: usize, k: usize) -> Result<()> {
    match basis_size(d, k) {
        Some(n) if n <= DEFAULT_BASIS_CAP => Ok(()),
        _ => Err(Error::BasisTooLarge {
            d,
            k,
            cap: DEFAULT_BASIS_CAP,
        }),
    }
}

/// Accept/Reject outcome of a single tester.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestVerdict {
    Accept,
    Reject,
}

impl TestVerdict {
    pub fn is_accept(self) -> bool {
        self == TestVerdict::Accept
    }
}

/// What an accepting tester certifies: for every unit `v'`, the relevant
/// disagreement frequency with `sign(v·x)` lies within
/// `(1 ± μ)∠(v, v')/π ± constant·ε`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoundnessBound {
    pub mu: f64,
    pub eps: f64,
    pub constant: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StripSummary {
    pub strip: StripId,
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    /// Largest `Δ_{i,α}` (disagreement) or `λ_max(A - W)` (spectral).
    pub statistic: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DisagreementReport {
    pub verdict: TestVerdict,
    pub threshold: f64,
    pub policy: ThresholdPolicy,
    pub k: usize,
    pub eps: f64,
    pub mu: f64,
    pub cutoff: usize,
    pub sample_size: usize,
    pub worst_strip: StripId,
    pub worst_alpha: MultiIndex,
    pub worst_statistic: f64,
    pub strips: Vec<StripSummary>,
    /// `Δ_{i,α}` indexed by strip, then by position of `α` in the basis.
    #[serde(skip)]
    pub deltas: Vec<Vec<f64>>,
    pub soundness: Option<SoundnessBound>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectralReport {
    pub verdict: TestVerdict,
    pub threshold: f64,
    pub policy: ThresholdPolicy,
    pub k: usize,
    pub eps: f64,
    pub mu: f64,
    pub cutoff: usize,
    pub normalizer: f64,
    pub sample_size: usize,
    pub worst_strip: StripId,
    pub worst_statistic: f64,
    pub strips: Vec<StripSummary>,
    pub soundness: Option<SoundnessBound>,
}

// Per-strip point counts and sums of every basis monomial, flattened as
// [strip * basis_len + alpha].
fn strip_monomial_sums(s: &PointSet, partition: &StripPartition, basis: &MonomialBasis) -> (Vec<usize>, Vec<f64>) {
    let d = s.dim();
    let strips = partition.len();
    let m = basis.len();
    let v = partition.direction();
    let partials: Vec<(Vec<usize>, Vec<f64>)> = s
        .as_flat()
        .par_chunks(CHUNK * d)
        .map(|block| {
            let mut counts = vec![0usize; strips];
            let mut sums = vec![0.0; strips * m];
            let mut mono = vec![0.0; m];
            for x in block.chunks_exact(d) {
                let i = partition.locate(v.dot(x));
                counts[i] += 1;
                basis.evaluate_into(x, &mut mono);
                for (acc, val) in sums[i * m..(i + 1) * m].iter_mut().zip(&mono) {
                    *acc += val;
                }
            }
            (counts, sums)
        })
        .collect();
    let mut counts = vec![0usize; strips];
    let mut acc = vec![CompensatedSum::default(); strips * m];
    for (c, s) in &partials {
        for (total, part) in counts.iter_mut().zip(c) {
            *total += part;
        }
        for (total, part) in acc.iter_mut().zip(s) {
            total.add(*part);
        }
    }
    (counts, acc.iter().map(CompensatedSum::value).collect())
}

struct DisagreementStatistics {
    counts: Vec<usize>,
    deltas: Vec<Vec<f64>>,
}

fn disagreement_statistics(
    s: &PointSet,
    partition: &StripPartition,
    k: usize,
) -> Result<(DisagreementStatistics, MonomialBasis)> {
    let kernel = StripMomentKernel::new(partition.direction(), k)?;
    let basis = kernel.basis().clone();
    let (counts, sums) = strip_monomial_sums(s, partition, &basis);
    let n = s.len() as f64;
    let m = basis.len();
    let deltas = (0..partition.len())
        .map(|i| {
            let (a, b) = partition.bounds(i);
            let gaussian = kernel.moments(a, b)?;
            Ok(gaussian
                .iter()
                .zip(&sums[i * m..(i + 1) * m])
                .map(|(g, e)| (e / n - g).abs())
                .collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok((DisagreementStatistics { counts, deltas }, basis))
}

fn max_statistic(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

/// Moment-matching test on every strip along `v`: rejects if some
/// `Δ_{i,α} = |E_S[x^α 1_i] - E_N[x^α 1_i]|` exceeds the threshold.
pub fn disagreement_test(
    s: &PointSet,
    v: &Direction,
    params: &TestParams,
    policy: &ThresholdPolicy,
) -> Result<DisagreementReport> {
    params.validate()?;
    policy.validate()?;
    if s.is_empty() {
        return Err(Error::EmptySet);
    }
    if s.dim() != v.dim() {
        return Err(Error::DimensionMismatch {
            expected: v.dim(),
            got: s.dim(),
        });
    }
    let d = s.dim();
    let (k, threshold) = match *policy {
        ThresholdPolicy::Formula { c } => {
            let p = formula_parameters(TesterKind::Disagreement, d, params.eps, params.mu, c)?;
            (p.k, p.threshold)
        }
        ThresholdPolicy::Fixed(delta) => (params.k, delta),
        ThresholdPolicy::Calibrated { trials, quantile, seed } => {
            let req = CalibrationRequest {
                kind: TesterKind::Disagreement,
                d,
                n: s.len(),
                normalizer: s.len() as f64,
                eps: params.eps,
                k: params.k,
                trials,
                quantile,
                seed,
            };
            (params.k, calibrate_threshold(&req)?)
        }
    };
    check_basis(d, k)?;
    let partition = StripPartition::new(v.clone(), params.eps)?;
    let (stats, basis) = disagreement_statistics(s, &partition, k)?;

    let (mut worst_strip, mut worst_alpha, mut worst) = (0, 0, f64::NEG_INFINITY);
    for (i, row) in stats.deltas.iter().enumerate() {
        for (a, &delta) in row.iter().enumerate() {
            if delta > worst {
                (worst_strip, worst_alpha, worst) = (i, a, delta);
            }
        }
    }
    let verdict = if worst <= threshold {
        TestVerdict::Accept
    } else {
        TestVerdict::Reject
    };
    let strips = summarize(
        &partition,
        &stats.counts,
        stats.deltas.iter().map(|row| max_statistic(row.iter().copied())),
    );
    Ok(DisagreementReport {
        verdict,
        threshold,
        policy: *policy,
        k,
        eps: params.eps,
        mu: params.mu,
        cutoff: partition.cutoff(),
        sample_size: s.len(),
        worst_strip: partition.id(worst_strip),
        worst_alpha: basis.indices()[worst_alpha].clone(),
        worst_statistic: worst,
        strips,
        deltas: stats.deltas,
        soundness: verdict.is_accept().then_some(SoundnessBound {
            mu: params.mu,
            eps: params.eps,
            constant: DISAGREEMENT_SOUNDNESS,
        }),
    })
}

fn summarize(partition: &StripPartition, counts: &[usize], statistics: impl Iterator<Item = f64>) -> Vec<StripSummary> {
    statistics
        .enumerate()
        .map(|(i, statistic)| {
            let (lower, upper) = partition.bounds(i);
            StripSummary {
                strip: partition.id(i),
                lower,
                upper,
                count: counts[i],
                statistic,
            }
        })
        .collect()
}

// Per-strip upper triangles of Σ m(x) m(x)ᵀ; strips without points stay None.
fn strip_outer_sums(
    s: &PointSet,
    partition: &StripPartition,
    basis: &MonomialBasis,
) -> (Vec<usize>, Vec<Option<Vec<f64>>>) {
    let d = s.dim();
    let strips = partition.len();
    let m = basis.len();
    let tri = m * (m + 1) / 2;
    let v = partition.direction();
    type Partial = (Vec<usize>, Vec<Option<Vec<f64>>>);
    let partials: Vec<Partial> = s
        .as_flat()
        .par_chunks(CHUNK * d)
        .map(|block| {
            let mut counts = vec![0usize; strips];
            let mut sums: Vec<Option<Vec<f64>>> = vec![None; strips];
            let mut mono = vec![0.0; m];
            for x in block.chunks_exact(d) {
                let i = partition.locate(v.dot(x));
                counts[i] += 1;
                basis.evaluate_into(x, &mut mono);
                let acc = sums[i].get_or_insert_with(|| vec![0.0; tri]);
                let mut pos = 0;
                for a in 0..m {
                    let ma = mono[a];
                    for mb in &mono[a..] {
                        acc[pos] += ma * mb;
                        pos += 1;
                    }
                }
            }
            (counts, sums)
        })
        .collect();
    let mut counts = vec![0usize; strips];
    let mut acc: Vec<Option<Vec<CompensatedSum>>> = vec![None; strips];
    for (c, sums) in &partials {
        for (total, part) in counts.iter_mut().zip(c) {
            *total += part;
        }
        for (slot, part) in acc.iter_mut().zip(sums) {
            if let Some(part) = part {
                let slot = slot.get_or_insert_with(|| vec![CompensatedSum::default(); tri]);
                for (t, p) in slot.iter_mut().zip(part) {
                    t.add(*p);
                }
            }
        }
    }
    let sums = acc
        .into_iter()
        .map(|slot| slot.map(|s| s.iter().map(CompensatedSum::value).collect()))
        .collect();
    (counts, sums)
}

fn upper_to_matrix(order: usize, upper: &[f64], scale: f64) -> SymMatrix {
    let mut offsets = Vec::with_capacity(order);
    let mut pos = 0;
    for i in 0..order {
        offsets.push(pos);
        pos += order - i;
    }
    SymMatrix::from_upper_fn(order, |i, j| upper[offsets[i] + (j - i)] * scale)
}

fn eigen_tolerance(m: &SymMatrix) -> f64 {
    1e-12 * m.frobenius_norm().max(1.0)
}

// (counts, λ_max(A_i - W_i) per strip)
fn spectral_statistics(
    s: &PointSet,
    normalizer: f64,
    partition: &StripPartition,
    k: usize,
) -> Result<(Vec<usize>, Vec<f64>)> {
    let engine = GaussianMomentEngine::new(partition.direction(), k)?;
    let basis = engine.basis();
    let (counts, sums) = strip_outer_sums(s, partition, basis);
    let m = basis.len();
    let lambdas = (0..partition.len())
        .into_par_iter()
        .map(|i| {
            let (a, b) = partition.bounds(i);
            let w = engine.matrix(a, b)?;
            let diff = match &sums[i] {
                Some(upper) => upper_to_matrix(m, upper, 1.0 / normalizer).sub(&w),
                None => SymMatrix::zeros(m).sub(&w),
            };
            diff.max_eigenvalue(eigen_tolerance(&diff))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok((counts, lambdas))
}

/// PSD-domination test on every strip along `v`: rejects if some strip has
/// `λ_max((1/U) Σ_{x∈S} m(x)m(x)ᵀ 1_i(x) - W_i) > Δ`.
///
/// Every summand is PSD, so removing points can only lower each statistic and
/// an accepted set stays accepted under any deletion with the same `U`.
pub fn spectral_test(
    s: &PointSet,
    normalizer: f64,
    v: &Direction,
    params: &TestParams,
    policy: &ThresholdPolicy,
) -> Result<SpectralReport> {
    params.validate()?;
    policy.validate()?;
    if !(normalizer > 0.0 && normalizer.is_finite()) || normalizer < s.len() as f64 {
        return Err(Error::NormalizerTooSmall {
            u: normalizer,
            n: s.len(),
        });
    }
    if s.dim() != v.dim() {
        return Err(Error::DimensionMismatch {
            expected: v.dim(),
            got: s.dim(),
        });
    }
    let d = s.dim();
    let (k, threshold) = match *policy {
        ThresholdPolicy::Formula { c } => {
            let p = formula_parameters(TesterKind::Spectral, d, params.eps, params.mu, c)?;
            (p.k, p.threshold)
        }
        ThresholdPolicy::Fixed(delta) => (params.k, delta),
        ThresholdPolicy::Calibrated { trials, quantile, seed } => {
            let req = CalibrationRequest {
                kind: TesterKind::Spectral,
                d,
                n: normalizer.floor() as usize,
                normalizer,
                eps: params.eps,
                k: params.k,
                trials,
                quantile,
                seed,
            };
            (params.k, calibrate_threshold(&req)?)
        }
    };
    check_basis(d, 2 * k)?;
    let partition = StripPartition::new(v.clone(), params.eps)?;
    let (counts, lambdas) = spectral_statistics(s, normalizer, &partition, k)?;
    let (mut worst_strip, mut worst) = (0, f64::NEG_INFINITY);
    for (i, &l) in lambdas.iter().enumerate() {
        if l > worst {
            (worst_strip, worst) = (i, l);
        }
    }
    let verdict = if worst <= threshold {
        TestVerdict::Accept
    } else {
        TestVerdict::Reject
    };
    Ok(SpectralReport {
        verdict,
        threshold,
        policy: *policy,
        k,
        eps: params.eps,
        mu: params.mu,
        cutoff: partition.cutoff(),
        normalizer,
        sample_size: s.len(),
        worst_strip: partition.id(worst_strip),
        worst_statistic: worst,
        strips: summarize(&partition, &counts, lambdas.into_iter()),
        soundness: verdict.is_accept().then_some(SoundnessBound {
            mu: params.mu,
            eps: params.eps,
            constant: SPECTRAL_SOUNDNESS,
        }),
    })
}

/// Everything that determines a calibrated threshold.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CalibrationRequest {
    pub kind: TesterKind,
    pub d: usize,
    /// Size of each simulated Gaussian dataset.
    pub n: usize,
    /// `U` for the spectral statistic; ignored by the disagreement statistic.
    pub normalizer: f64,
    pub eps: f64,
    pub k: usize,
    pub trials: usize,
    pub quantile: f64,
    pub seed: u64,
}

impl CalibrationRequest {
    fn validate(&self) -> Result<()> {
        ThresholdPolicy::Calibrated {
            trials: self.trials,
            quantile: self.quantile,
            seed: self.seed,
        }
        .validate()?;
        if self.n == 0 {
            return Err(invalid("n", "calibration needs non-empty datasets"));
        }
        if self.kind == TesterKind::Spectral && !(self.normalizer >= self.n as f64) {
            return Err(Error::NormalizerTooSmall {
                u: self.normalizer,
                n: self.n,
            });
        }
        strip_cutoff(self.eps)?;
        check_basis(self.d, self.k)?;
        Ok(())
    }

    fn key(&self) -> (TesterKind, usize, usize, u64, u64, usize, usize, u64, u64) {
        (
            self.kind,
            self.d,
            self.n,
            self.normalizer.to_bits(),
            self.eps.to_bits(),
            self.k,
            self.trials,
            self.quantile.to_bits(),
            self.seed,
        )
    }
}

/// The test statistic on each of `trials` simulated Gaussian datasets, in
/// trial order. Each trial uses its own random direction.
pub fn calibration_statistics(req: &CalibrationRequest) -> Result<Vec<f64>> {
    req.validate()?;
    (0..req.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_from_seed(derive_seed(req.seed, t as u64));
            let v = Direction::random(req.d, &mut rng);
            let s = PointSet::standard_gaussian(req.d, req.n, &mut rng)?;
            let partition = StripPartition::new(v, req.eps)?;
            match req.kind {
                TesterKind::Disagreement => {
                    let (stats, _) = disagreement_statistics(&s, &partition, req.k)?;
                    Ok(max_statistic(stats.deltas.iter().flatten().copied()))
                }
                TesterKind::Spectral => {
                    let (_, lambdas) = spectral_statistics(&s, req.normalizer, &partition, req.k)?;
                    Ok(max_statistic(lambdas))
                }
            }
        })
        .collect()
}

/// Order statistic `⌈q·n⌉` (1-based) of `values`.
pub fn empirical_quantile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

type CacheKey = (TesterKind, usize, usize, u64, u64, usize, usize, u64, u64);

fn cache() -> &'static Mutex<HashMap<CacheKey, f64>> {
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, f64>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// The `quantile` of [`calibration_statistics`]. Results are memoized per
/// request for the lifetime of the process.
pub fn calibrate_threshold(req: &CalibrationRequest) -> Result<f64> {
    req.validate()?;
    let key = req.key();
    if let Some(&cached) = cache().lock().expect("calibration cache").get(&key) {
        return Ok(cached);
    }
    let threshold = empirical_quantile(&calibration_statistics(req)?, req.quantile);
    cache().lock().expect("calibration cache").insert(key, threshold);
    Ok(threshold)
}
