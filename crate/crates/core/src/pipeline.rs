//! End-to-end tester-learners, error bookkeeping, the brute-force optimum,
//! and the learnability-to-distinguishing reduction.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{invalid, Error, Result};
use crate::learners::{learn, LearnedDirection, LearnerConfig, LearnerKind};
use crate::linalg::dot;
use crate::oracles::{in_margin_cone, margin_cone_width, LabeledDataset};
use crate::poly::{angle_between, sign, Direction};
use crate::seed::{derive_seed, rng_from_seed};
use crate::testers::{
    disagreement_test, spectral_test, DisagreementReport, SpectralReport, TestParams, ThresholdPolicy,
    DISAGREEMENT_SOUNDNESS, SPECTRAL_SOUNDNESS,
};

/// `μ` used by every tester invocation of the Massart pipeline.
pub const MASSART_MU: f64 = 0.1;
pub const DEFAULT_MIN_SAMPLES: usize = 1000;
/// Largest tolerated fraction of mislabeled points when `c` is not given.
pub const DEFAULT_FALSE_FRACTION: f64 = 0.4;
/// Near-margin mislabeled points may number at most this many `εN`.
pub const NEAR_MARGIN_FACTOR: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    LearnerDegenerate,
    Disagreement,
    FalseFraction,
    NearMargin,
    Spectral,
}

/// Which checks run. Disabled checks are skipped, never failed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSwitches {
    pub disagreement: bool,
    pub false_fraction: bool,
    pub near_margin: bool,
    pub spectral: bool,
}

impl Default for StageSwitches {
    fn default() -> Self {
        StageSwitches {
            disagreement: true,
            false_fraction: true,
            near_margin: true,
            spectral: true,
        }
    }
}

impl StageSwitches {
    fn all(&self) -> bool {
        self.disagreement && self.false_fraction && self.near_margin && self.spectral
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassartConfig {
    pub eps: f64,
    pub delta: f64,
    pub policy: ThresholdPolicy,
    pub learner: LearnerConfig,
    pub k_dis: usize,
    pub k_spec: usize,
    /// When set, the mislabeled-fraction cap and `U/N` become `1/2 - c/2`;
    /// otherwise both are 2/5.
    pub c: Option<f64>,
    pub min_samples: usize,
    pub stages: StageSwitches,
    /// Derive the learner seed from the data instead of `learner.seed`.
    pub seed_from_data: bool,
}

impl Default for MassartConfig {
    fn default() -> Self {
        MassartConfig {
            eps: 0.1,
            delta: 0.05,
            policy: ThresholdPolicy::default(),
            learner: LearnerConfig::default(),
            k_dis: 3,
            k_spec: 3,
            c: None,
            min_samples: DEFAULT_MIN_SAMPLES,
            stages: StageSwitches::default(),
            seed_from_data: false,
        }
    }
}

impl MassartConfig {
    pub fn false_fraction_cap(&self) -> f64 {
        self.c.map_or(DEFAULT_FALSE_FRACTION, |c| 0.5 - c / 2.0)
    }

    pub fn validate(&self) -> Result<()> {
        validate_common(self.eps, self.delta, &self.policy, &self.learner)?;
        if let Some(c) = self.c {
            if !(c > 0.0 && c < 0.5) {
                return Err(invalid("c", format!("must lie in (0, 1/2), got {c}")));
            }
        }
        if self.k_dis == 0 || self.k_spec == 0 {
            return Err(invalid("k", "tester degrees must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RcnConfig {
    pub eps: f64,
    pub delta: f64,
    pub policy: ThresholdPolicy,
    pub learner: LearnerConfig,
    pub k_dis: usize,
    /// Noise margin: the mislabeled fraction may be at most `1/2 - c/2`.
    /// `c = 0` is the sanity mode that tolerates coin-flip labels.
    pub c: f64,
    pub mu: f64,
    /// Allowed excess of the equatorial-band mass over its Gaussian value;
    /// defaults to `ε`.
    pub near_slack: Option<f64>,
    pub min_samples: usize,
    pub stages: StageSwitches,
    pub seed_from_data: bool,
}

impl Default for RcnConfig {
    fn default() -> Self {
        RcnConfig {
            eps: 0.1,
            delta: 0.05,
            policy: ThresholdPolicy::default(),
            learner: LearnerConfig {
                kind: LearnerKind::Chow,
                ..LearnerConfig::default()
            },
            k_dis: 3,
            c: 1.0 / 6.0,
            mu: MASSART_MU,
            near_slack: None,
            min_samples: DEFAULT_MIN_SAMPLES,
            stages: StageSwitches::default(),
            seed_from_data: false,
        }
    }
}

impl RcnConfig {
    pub fn validate(&self) -> Result<()> {
        validate_common(self.eps, self.delta, &self.policy, &self.learner)?;
        if !(0.0..0.5).contains(&self.c) {
            return Err(invalid("c", format!("must lie in [0, 1/2), got {}", self.c)));
        }
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return Err(invalid("mu", format!("must lie in (0, 1), got {}", self.mu)));
        }
        if let Some(s) = self.near_slack {
            if !(s >= 0.0) {
                return Err(invalid("near_slack", "must be non-negative"));
            }
        }
        if self.k_dis == 0 {
            return Err(invalid("k", "tester degree must be at least 1"));
        }
        Ok(())
    }
}

fn validate_common(eps: f64, delta: f64, policy: &ThresholdPolicy, learner: &LearnerConfig) -> Result<()> {
    for (name, value) in [("eps", eps), ("delta", delta)] {
        if !(value > 0.0 && value < 1.0) {
            return Err(invalid(name, format!("must lie in (0, 1), got {value}")));
        }
    }
    policy.validate()?;
    learner.validate()
}

fn check_dataset(s: &LabeledDataset, min_samples: usize) -> Result<()> {
    if s.dim() < 2 {
        return Err(invalid("d", "the pipeline needs d >= 2"));
    }
    if s.len() < min_samples.max(1) {
        return Err(invalid(
            "n",
            format!("need at least {min_samples} examples, got {}", s.len()),
        ));
    }
    Ok(())
}

/// Target angular accuracy for the learner: `ε^{3/2}/(100√(d-1))`.
pub fn learner_accuracy(eps: f64, d: usize) -> f64 {
    eps.powf(1.5) / (100.0 * ((d as f64) - 1.0).sqrt())
}

/// One executed check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub passed: bool,
    pub statistic: f64,
    pub threshold: f64,
}

/// What an Accept certifies: `err(v) ≤ err(v') + c_cert·ε` for every unit
/// `v'`, given the tester soundness constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub mu: f64,
    pub eps: f64,
    pub c_dis: f64,
    pub c_spec: Option<f64>,
    pub c_cert: f64,
    /// Coefficient of `∠(v, v')/π` left over in the bound; a negative value is
    /// charged to `c_cert`.
    pub kappa: f64,
    pub empirical_error: f64,
    /// False if some check was disabled, in which case the bound is not
    /// backed by every test.
    pub complete: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Outcome {
    Accept {
        direction: Direction,
        certificate: Certificate,
    },
    Reject {
        stage: Stage,
    },
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct PipelineDiagnostics {
    pub n: usize,
    pub d: usize,
    pub eps_prime: f64,
    pub cone_width: f64,
    pub learner: Option<LearnedDirection>,
    pub disagreement: Option<DisagreementReport>,
    /// Second disagreement test, on the mislabeled points (RCN pipeline).
    pub false_disagreement: Option<DisagreementReport>,
    pub false_count: Option<usize>,
    pub near_count: Option<usize>,
    pub far_count: Option<usize>,
    pub spectral: Option<SpectralReport>,
    pub stages: Vec<StageRecord>,
    /// Set when a module error forced the rejection.
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Verdict {
    #[serde(flatten)]
    pub outcome: Outcome,
    pub diagnostics: PipelineDiagnostics,
}

impl Verdict {
    pub fn is_accept(&self) -> bool {
        matches!(self.outcome, Outcome::Accept { .. })
    }

    pub fn stage(&self) -> Option<Stage> {
        match self.outcome {
            Outcome::Reject { stage } => Some(stage),
            Outcome::Accept { .. } => None,
        }
    }

    pub fn direction(&self) -> Option<&Direction> {
        match &self.outcome {
            Outcome::Accept { direction, .. } => Some(direction),
            Outcome::Reject { .. } => None,
        }
    }

    pub fn certificate(&self) -> Option<&Certificate> {
        match &self.outcome {
            Outcome::Accept { certificate, .. } => Some(certificate),
            Outcome::Reject { .. } => None,
        }
    }
}

struct Run {
    diagnostics: PipelineDiagnostics,
}

impl Run {
    fn reject(mut self, stage: Stage, error: Option<Error>) -> Verdict {
        self.diagnostics.error = error.map(|e| e.to_string());
        Verdict {
            outcome: Outcome::Reject { stage },
            diagnostics: self.diagnostics,
        }
    }

    fn record(&mut self, stage: Stage, statistic: f64, threshold: f64) -> bool {
        let passed = statistic <= threshold;
        self.diagnostics.stages.push(StageRecord {
            stage,
            passed,
            statistic,
            threshold,
        });
        passed
    }
}

fn data_seed(s: &LabeledDataset) -> u64 {
    s.points()
        .as_flat()
        .iter()
        .take(16)
        .fold(0x5EED, |acc, c| derive_seed(acc, c.to_bits()))
}

fn learn_step(
    s: &LabeledDataset,
    learner: &LearnerConfig,
    eps_prime: f64,
    seed_from_data: bool,
) -> Result<LearnedDirection> {
    let mut cfg = *learner;
    if seed_from_data {
        cfg.seed = data_seed(s);
    }
    learn(s, &cfg, Some(eps_prime))
}

/// Runs the Massart tester-learner: learn `v`, test the marginal, bound the
/// mislabeled fraction, bound the near-margin mislabeled points, and test the
/// remaining mislabeled points spectrally with `U = (2/5)N`.
pub fn run_massart_pipeline(s: &LabeledDataset, cfg: &MassartConfig) -> Result<Verdict> {
    cfg.validate()?;
    check_dataset(s, cfg.min_samples)?;
    let (n, d) = (s.len(), s.dim());
    let eps = cfg.eps;
    let eps_prime = learner_accuracy(eps, d);
    let cone = margin_cone_width(eps, d);
    let mut run = Run {
        diagnostics: PipelineDiagnostics {
            n,
            d,
            eps_prime,
            cone_width: cone,
            ..PipelineDiagnostics::default()
        },
    };

    let learned = match learn_step(s, &cfg.learner, eps_prime, cfg.seed_from_data) {
        Ok(l) => l,
        Err(e) => return Ok(run.reject(Stage::LearnerDegenerate, Some(e))),
    };
    let degenerate = learned.diagnostics.degenerate;
    let v = learned.v.clone();
    let chow_norm = learned.diagnostics.chow_norm;
    run.diagnostics.learner = Some(learned);
    if degenerate {
        run.record(Stage::LearnerDegenerate, -chow_norm, -crate::learners::DEGENERATE_NORM);
        return Ok(run.reject(Stage::LearnerDegenerate, None));
    }

    let params = TestParams::new(eps, cfg.delta, MASSART_MU, cfg.k_dis);
    if cfg.stages.disagreement {
        match disagreement_test(s.points(), &v, &params, &cfg.policy) {
            Ok(report) => {
                let ok = run.record(Stage::Disagreement, report.worst_statistic, report.threshold);
                run.diagnostics.disagreement = Some(report);
                if !ok {
                    return Ok(run.reject(Stage::Disagreement, None));
                }
            }
            Err(e) => return Ok(run.reject(Stage::Disagreement, Some(e))),
        }
    }

    let mistakes = s.mistakes(&v);
    run.diagnostics.false_count = Some(mistakes.len());
    let cap = cfg.false_fraction_cap();
    if cfg.stages.false_fraction {
        let fraction = mistakes.len() as f64 / n as f64;
        if !run.record(Stage::FalseFraction, fraction, cap) {
            return Ok(run.reject(Stage::FalseFraction, None));
        }
    }

    let (near, far): (Vec<usize>, Vec<usize>) = mistakes.iter().partition(|&&i| in_margin_cone(&v, s.point(i), cone));
    run.diagnostics.near_count = Some(near.len());
    run.diagnostics.far_count = Some(far.len());
    if cfg.stages.near_margin {
        let limit = NEAR_MARGIN_FACTOR * eps * n as f64;
        if !run.record(Stage::NearMargin, near.len() as f64, limit) {
            return Ok(run.reject(Stage::NearMargin, None));
        }
    }

    let normalizer = cap * n as f64;
    if cfg.stages.spectral {
        let far_points = s.points().subset(far.iter().copied());
        let spec_params = TestParams::new(eps, cfg.delta, MASSART_MU, cfg.k_spec);
        match spectral_test(&far_points, normalizer, &v, &spec_params, &cfg.policy) {
            Ok(report) => {
                let ok = run.record(Stage::Spectral, report.worst_statistic, report.threshold);
                run.diagnostics.spectral = Some(report);
                if !ok {
                    return Ok(run.reject(Stage::Spectral, None));
                }
            }
            Err(e) => return Ok(run.reject(Stage::Spectral, Some(e))),
        }
    }

    let u_ratio = normalizer / n as f64;
    let kappa = (1.0 - MASSART_MU) - 2.0 * u_ratio * (1.0 + MASSART_MU);
    let c_cert = DISAGREEMENT_SOUNDNESS
        + 2.0 * near.len() as f64 / (eps * n as f64)
        + 2.0 * u_ratio * SPECTRAL_SOUNDNESS
        + (-kappa).max(0.0) / eps;
    let certificate = Certificate {
        mu: MASSART_MU,
        eps,
        c_dis: DISAGREEMENT_SOUNDNESS,
        c_spec: Some(SPECTRAL_SOUNDNESS),
        c_cert,
        kappa,
        empirical_error: mistakes.len() as f64 / n as f64,
        complete: cfg.stages.all(),
    };
    Ok(Verdict {
        outcome: Outcome::Accept {
            direction: v,
            certificate,
        },
        diagnostics: run.diagnostics,
    })
}

/// Gaussian probability of the equatorial band `|∠(x, v) - π/2| ≤ width`,
/// i.e. `(v·x)²/‖x‖² ≤ sin²(width)`, which is `Beta(1/2, (d-1)/2)`.
pub fn gaussian_band_mass(width: f64, d: usize) -> f64 {
    if width >= PI / 2.0 {
        return 1.0;
    }
    let s = width.sin();
    beta_reg(0.5, (d as f64 - 1.0) / 2.0, (s * s).min(1.0))
}

/// Runs the RCN tester-learner: learn `v`, test the marginal, bound the
/// mislabeled fraction by `1/2 - c/2`, test the mislabeled points' marginal
/// (weighted by their share of the sample), and compare the mass of the equatorial band of angular half-width `ε'd`
/// with its Gaussian value.
pub fn run_rcn_pipeline(s: &LabeledDataset, cfg: &RcnConfig) -> Result<Verdict> {
    cfg.validate()?;
    check_dataset(s, cfg.min_samples)?;
    let (n, d) = (s.len(), s.dim());
    let eps = cfg.eps;
    let eps_prime = learner_accuracy(eps, d);
    let band = eps_prime * d as f64;
    let mut run = Run {
        diagnostics: PipelineDiagnostics {
            n,
            d,
            eps_prime,
            cone_width: band,
            ..PipelineDiagnostics::default()
        },
    };

    let learned = match learn_step(s, &cfg.learner, eps_prime, cfg.seed_from_data) {
        Ok(l) => l,
        Err(e) => return Ok(run.reject(Stage::LearnerDegenerate, Some(e))),
    };
    let degenerate = learned.diagnostics.degenerate;
    let v = learned.v.clone();
    let chow_norm = learned.diagnostics.chow_norm;
    run.diagnostics.learner = Some(learned);
    if degenerate {
        run.record(Stage::LearnerDegenerate, -chow_norm, -crate::learners::DEGENERATE_NORM);
        return Ok(run.reject(Stage::LearnerDegenerate, None));
    }

    let params = TestParams::new(eps, cfg.delta, cfg.mu, cfg.k_dis);
    if cfg.stages.disagreement {
        match disagreement_test(s.points(), &v, &params, &cfg.policy) {
            Ok(report) => {
                let ok = run.record(Stage::Disagreement, report.worst_statistic, report.threshold);
                run.diagnostics.disagreement = Some(report);
                if !ok {
                    return Ok(run.reject(Stage::Disagreement, None));
                }
            }
            Err(e) => return Ok(run.reject(Stage::Disagreement, Some(e))),
        }
    }

    let mistakes = s.mistakes(&v);
    run.diagnostics.false_count = Some(mistakes.len());
    let cap = 0.5 - cfg.c / 2.0;
    let fraction = mistakes.len() as f64 / n as f64;
    if cfg.stages.false_fraction && !run.record(Stage::FalseFraction, fraction, cap) {
        return Ok(run.reject(Stage::FalseFraction, None));
    }

    // The mislabeled points are tested in units of the full sample: their
    // strip deviations are weighted by |S_False|/N and held to the threshold
    // of the first test. A handful of mislabeled points near the boundary
    // (clean data) then passes, while a large non-Gaussian S_False does not.
    let full_threshold = run.diagnostics.disagreement.as_ref().map(|r| r.threshold);
    if let (Some(threshold), false) = (full_threshold, mistakes.is_empty()) {
        let false_points = s.points().subset(mistakes.iter().copied());
        match disagreement_test(&false_points, &v, &params, &ThresholdPolicy::Fixed(threshold)) {
            Ok(report) => {
                let ok = run.record(Stage::Disagreement, fraction * report.worst_statistic, threshold);
                run.diagnostics.false_disagreement = Some(report);
                if !ok {
                    return Ok(run.reject(Stage::Disagreement, None));
                }
            }
            Err(e) => return Ok(run.reject(Stage::Disagreement, Some(e))),
        }
    }

    let in_band = s.points().iter().filter(|x| in_margin_cone(&v, x, band)).count();
    run.diagnostics.near_count = Some(in_band);
    if cfg.stages.near_margin {
        let limit = gaussian_band_mass(band, d) + cfg.near_slack.unwrap_or(eps);
        if !run.record(Stage::NearMargin, in_band as f64 / n as f64, limit) {
            return Ok(run.reject(Stage::NearMargin, None));
        }
    }

    let kappa = (1.0 - cfg.mu) - 2.0 * fraction * (1.0 + cfg.mu);
    let c_cert = 3.0 * DISAGREEMENT_SOUNDNESS + (-kappa).max(0.0) / eps;
    let certificate = Certificate {
        mu: cfg.mu,
        eps,
        c_dis: DISAGREEMENT_SOUNDNESS,
        c_spec: None,
        c_cert,
        kappa,
        empirical_error: fraction,
        complete: cfg.stages.disagreement && cfg.stages.false_fraction && cfg.stages.near_margin,
    };
    Ok(Verdict {
        outcome: Outcome::Accept {
            direction: v,
            certificate,
        },
        diagnostics: run.diagnostics,
    })
}

/// Counting identities relating the errors of `v` and a reference `v_ref`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorLedger {
    pub n: usize,
    pub err_v: f64,
    pub err_ref: f64,
    pub mistakes_v: usize,
    pub mistakes_ref: usize,
    /// `|S_False|`, the points `v` mislabels.
    pub s_false: usize,
    /// Mislabeled by `v` but not by `v_ref`.
    pub s_b: usize,
    /// Mislabeled by `v_ref` but not by `v`.
    pub s_g: usize,
    pub s_false_far: usize,
    pub s_false_near: usize,
    /// `Pr_S[sign(v·x) ≠ sign(v_ref·x)]`.
    pub disagreement: f64,
    /// `2(|S_False|/N)·Pr_{S_False}[disagree] - Pr_S[disagree]`, an upper
    /// bound on `err_v - err_ref`.
    pub eq5_bound: f64,
}

impl ErrorLedger {
    /// `mistakes_v = mistakes_ref + |S_b| - |S_g|` and
    /// `|S_False| = |S_False^far| + |S_False^near|`, in integers.
    pub fn identity_holds(&self) -> bool {
        self.mistakes_v + self.s_g == self.mistakes_ref + self.s_b
            && self.s_false == self.s_false_far + self.s_false_near
            && self.s_false == self.mistakes_v
    }
}

/// Fills the [`ErrorLedger`] by direct counting; the near/far split uses the
/// cone of half-width `ε^{3/2}/√(d-1)`.
pub fn error_decomposition(s: &LabeledDataset, v: &Direction, v_ref: &Direction, eps: f64) -> Result<ErrorLedger> {
    if v.dim() != s.dim() || v_ref.dim() != s.dim() {
        return Err(Error::DimensionMismatch {
            expected: s.dim(),
            got: if v.dim() != s.dim() { v.dim() } else { v_ref.dim() },
        });
    }
    let cone = if s.dim() >= 2 {
        margin_cone_width(eps, s.dim())
    } else {
        0.0
    };
    let mut ledger = ErrorLedger {
        n: s.len(),
        err_v: 0.0,
        err_ref: 0.0,
        mistakes_v: 0,
        mistakes_ref: 0,
        s_false: 0,
        s_b: 0,
        s_g: 0,
        s_false_far: 0,
        s_false_near: 0,
        disagreement: 0.0,
        eq5_bound: 0.0,
    };
    let (mut disagree_all, mut disagree_false) = (0usize, 0usize);
    for (x, y) in s.iter() {
        let hv = v.classify(x);
        let hr = v_ref.classify(x);
        let wrong_v = hv != y;
        let wrong_r = hr != y;
        ledger.mistakes_v += usize::from(wrong_v);
        ledger.mistakes_ref += usize::from(wrong_r);
        ledger.s_b += usize::from(wrong_v && !wrong_r);
        ledger.s_g += usize::from(wrong_r && !wrong_v);
        disagree_all += usize::from(hv != hr);
        if wrong_v {
            disagree_false += usize::from(hv != hr);
            if s.dim() >= 2 && in_margin_cone(v, x, cone) {
                ledger.s_false_near += 1;
            } else {
                ledger.s_false_far += 1;
            }
        }
    }
    ledger.s_false = ledger.mistakes_v;
    if ledger.n > 0 {
        let n = ledger.n as f64;
        ledger.err_v = ledger.mistakes_v as f64 / n;
        ledger.err_ref = ledger.mistakes_ref as f64 / n;
        ledger.disagreement = disagree_all as f64 / n;
        let in_false = if ledger.s_false > 0 {
            disagree_false as f64 / ledger.s_false as f64
        } else {
            0.0
        };
        ledger.eq5_bound = 2.0 * (ledger.s_false as f64 / n) * in_false - ledger.disagreement;
    }
    Ok(ledger)
}

/// Minimum empirical 0-1 error over origin-centred halfspaces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub opt: f64,
    pub mistakes: usize,
    pub argmin: Direction,
    /// False when the value is only an upper bound (d > 2).
    pub exact: bool,
}

fn mistakes_of(s: &LabeledDataset, w: &[f64]) -> usize {
    s.iter().filter(|(x, y)| sign(dot(w, x)) != *y).count()
}

fn best_candidate(s: &LabeledDataset, candidates: &[Vec<f64>]) -> (usize, usize) {
    candidates
        .par_iter()
        .enumerate()
        .map(|(i, w)| (mistakes_of(s, w), i))
        .min()
        .expect("at least one candidate")
}

/// Exact in `d = 2`: every point `x` splits the circle of directions at the
/// two normals `±(-x₂, x₁)/‖x‖`; the error is constant on each open arc, so
/// evaluating every normal and every arc midpoint covers all sign patterns.
/// In higher dimension, the best of `resolution` random directions refined by
/// coordinate search; flagged inexact.
pub fn opt_bruteforce(s: &LabeledDataset, resolution: usize, seed: u64) -> Result<OptResult> {
    if s.is_empty() {
        return Err(Error::EmptySet);
    }
    let d = s.dim();
    if d == 1 {
        let cands = vec![vec![1.0], vec![-1.0]];
        let (m, i) = best_candidate(s, &cands);
        return Ok(OptResult {
            opt: m as f64 / s.len() as f64,
            mistakes: m,
            argmin: Direction::new(cands[i].clone())?,
            exact: true,
        });
    }
    if d == 2 {
        let mut angles = Vec::with_capacity(2 * s.len() + 2);
        let mut cands: Vec<Vec<f64>> = Vec::with_capacity(4 * s.len() + 4);
        for x in s.points().iter() {
            let r = x[0].hypot(x[1]);
            if r == 0.0 {
                continue;
            }
            let n = [-x[1] / r, x[0] / r];
            for w in [n, [-n[0], -n[1]]] {
                angles.push(w[1].atan2(w[0]));
                cands.push(w.to_vec());
            }
        }
        angles.sort_by(f64::total_cmp);
        angles.dedup();
        if angles.is_empty() {
            angles.push(0.0);
        }
        for (i, &a) in angles.iter().enumerate() {
            let b = if i + 1 < angles.len() {
                angles[i + 1]
            } else {
                angles[0] + 2.0 * PI
            };
            let mid = 0.5 * (a + b);
            cands.push(vec![mid.cos(), mid.sin()]);
        }
        let (m, i) = best_candidate(s, &cands);
        return Ok(OptResult {
            opt: m as f64 / s.len() as f64,
            mistakes: m,
            argmin: Direction::normalized(cands[i].clone())?,
            exact: true,
        });
    }
    let mut rng = rng_from_seed(seed);
    let mut cands: Vec<Vec<f64>> = (0..resolution.max(1))
        .map(|_| Direction::random(d, &mut rng).as_slice().to_vec())
        .collect();
    for j in 0..d {
        let mut e = vec![0.0; d];
        e[j] = 1.0;
        cands.push(e.clone());
        e[j] = -1.0;
        cands.push(e);
    }
    let (mut best_m, i) = best_candidate(s, &cands);
    let mut best = cands[i].clone();
    let mut h = 0.25;
    while h > 1e-4 {
        let mut improved = false;
        for j in 0..d {
            for step in [h, -h] {
                let mut w = best.clone();
                w[j] += step;
                let Ok(dir) = Direction::normalized(w) else { continue };
                let m = mistakes_of(s, dir.as_slice());
                if m < best_m {
                    best_m = m;
                    best = dir.as_slice().to_vec();
                    improved = true;
                }
            }
        }
        if !improved {
            h /= 2.0;
        }
    }
    Ok(OptResult {
        opt: best_m as f64 / s.len() as f64,
        mistakes: best_m,
        argmin: Direction::normalized(best)?,
        exact: false,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "pipeline", rename_all = "kebab-case")]
pub enum PipelineChoice {
    Massart(MassartConfig),
    Rcn(RcnConfig),
}

impl PipelineChoice {
    pub fn run(&self, s: &LabeledDataset) -> Result<Verdict> {
        match self {
            PipelineChoice::Massart(cfg) => run_massart_pipeline(s, cfg),
            PipelineChoice::Rcn(cfg) => run_rcn_pipeline(s, cfg),
        }
    }

    fn with_eps(&self, eps: f64) -> PipelineChoice {
        match self {
            PipelineChoice::Massart(cfg) => PipelineChoice::Massart(MassartConfig { eps, ..cfg.clone() }),
            PipelineChoice::Rcn(cfg) => PipelineChoice::Rcn(RcnConfig { eps, ..cfg.clone() }),
        }
    }
}

/// Fraction of the data given to the tester-learner; the rest estimates the
/// error of an accepted hypothesis.
pub const DISTINGUISHER_TRAIN_FRACTION: f64 = 0.8;

#[derive(Clone, Debug, Serialize)]
pub struct DistinguisherOutcome {
    pub bit: u8,
    pub heldout_error: Option<f64>,
    pub verdict: Verdict,
}

/// Outputs 1 iff the tester-learner accepts and its hypothesis has held-out
/// error at least `1/2 - τ`: labels that look like coin flips to an
/// accepting learner.
pub fn distinguisher(s: &LabeledDataset, eps: f64, tau: f64, choice: &PipelineChoice) -> Result<DistinguisherOutcome> {
    if !(tau > 0.0 && tau < 0.125) {
        return Err(invalid("tau", format!("must lie in (0, 1/8), got {tau}")));
    }
    if !(eps > 0.0 && eps < 0.25) {
        return Err(invalid("eps", format!("must lie in (0, 1/4), got {eps}")));
    }
    let (train, heldout) = s.split(DISTINGUISHER_TRAIN_FRACTION);
    if heldout.is_empty() {
        return Err(invalid("n", "no held-out examples left"));
    }
    let verdict = choice.with_eps(eps).run(&train)?;
    let Some(v) = verdict.direction() else {
        return Ok(DistinguisherOutcome {
            bit: 0,
            heldout_error: None,
            verdict,
        });
    };
    let err = heldout.error_of(v);
    Ok(DistinguisherOutcome {
        bit: u8::from(err >= 0.5 - tau),
        heldout_error: Some(err),
        verdict,
    })
}

/// Angle between a verdict's direction and `v_star`, if it accepted.
pub fn accepted_angle(verdict: &Verdict, v_star: &Direction) -> Option<f64> {
    verdict.direction().map(|v| angle_between(v, v_star))
}
