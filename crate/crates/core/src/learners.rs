//! Direction learners: the Chow-parameter estimate and projected SGD on the
//! LeakyReLU surrogate.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{dot, norm, CompensatedSum};
use crate::oracles::LabeledDataset;
use crate::poly::{sign, Direction};
use crate::seed::rng_from_seed;

/// Below this norm the Chow vector carries no usable signal.
pub const DEGENERATE_NORM: f64 = 1e-8;

const CHUNK: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LearnerKind {
    Chow,
    LeakyReluSgd,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub kind: LearnerKind,
    /// Upper bound on the flip rate; also the LeakyReLU slope `λ`.
    pub eta0: f64,
    /// Step size at iteration `t` is `step0/√(t+1)`.
    pub step0: f64,
    pub iteration_cap: usize,
    pub batch_size: usize,
    /// The 0-1 error of the iterate (and its negation) is evaluated every
    /// `log_every` steps.
    pub log_every: usize,
    pub seed: u64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            kind: LearnerKind::LeakyReluSgd,
            eta0: 1.0 / 3.0,
            step0: 0.05,
            iteration_cap: 2000,
            batch_size: 64,
            log_every: 100,
            seed: 0,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.eta0) {
            return Err(invalid("eta0", format!("must lie in [0, 1/2), got {}", self.eta0)));
        }
        if !(self.step0 > 0.0 && self.step0.is_finite()) {
            return Err(invalid("step0", "must be positive"));
        }
        if self.iteration_cap == 0 {
            return Err(invalid("iteration_cap", "must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch_size", "must be at least 1"));
        }
        if self.log_every == 0 {
            return Err(invalid("log_every", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerDiagnostics {
    pub kind: LearnerKind,
    /// Surrogate loss at the returned direction (`None` for Chow).
    pub final_loss: Option<f64>,
    pub iterations: usize,
    /// Iterations suggested by the accuracy target, before capping.
    pub iteration_budget: Option<usize>,
    pub cap_reached: bool,
    pub empirical_error: f64,
    pub chow_norm: f64,
    /// The Chow vector vanished; the direction fell back to `e_1`.
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnedDirection {
    pub v: Direction,
    pub diagnostics: LearnerDiagnostics,
}

fn chow_vector(s: &LabeledDataset) -> Vec<f64> {
    let d = s.dim();
    let flat = s.points().as_flat();
    let partials: Vec<Vec<f64>> = flat
        .par_chunks(CHUNK * d)
        .zip(s.labels().par_chunks(CHUNK))
        .map(|(block, labels)| {
            let mut acc = vec![0.0; d];
            for (x, &y) in block.chunks_exact(d).zip(labels) {
                for (a, xi) in acc.iter_mut().zip(x) {
                    *a += f64::from(y) * xi;
                }
            }
            acc
        })
        .collect();
    let mut sums = vec![CompensatedSum::default(); d];
    for p in &partials {
        for (s, v) in sums.iter_mut().zip(p) {
            s.add(*v);
        }
    }
    let n = s.len() as f64;
    sums.iter().map(|s| s.value() / n).collect()
}

fn parallel_error(s: &LabeledDataset, w: &[f64]) -> f64 {
    let d = s.dim();
    let wrong: usize = s
        .points()
        .as_flat()
        .par_chunks(CHUNK * d)
        .zip(s.labels().par_chunks(CHUNK))
        .map(|(block, labels)| {
            block
                .chunks_exact(d)
                .zip(labels)
                .filter(|(x, &y)| sign(dot(w, x)) != y)
                .count()
        })
        .sum();
    wrong as f64 / s.len() as f64
}

/// `normalize(Σ y_i x_i / N)`; falls back to `e_1` and flags the result when
/// the mean has norm below [`DEGENERATE_NORM`].
pub fn chow_direction(s: &LabeledDataset) -> Result<LearnedDirection> {
    if s.is_empty() {
        return Err(Error::EmptySet);
    }
    let mean = chow_vector(s);
    let chow_norm = norm(&mean);
    let degenerate = !(chow_norm >= DEGENERATE_NORM);
    let v = if degenerate {
        Direction::axis(s.dim(), 0)
    } else {
        Direction::normalized(mean)?
    };
    let empirical_error = parallel_error(s, v.as_slice());
    Ok(LearnedDirection {
        v,
        diagnostics: LearnerDiagnostics {
            kind: LearnerKind::Chow,
            final_loss: None,
            iterations: 0,
            iteration_budget: None,
            cap_reached: false,
            empirical_error,
            chow_norm,
            degenerate,
        },
    })
}

/// `ℓ_λ(t) = (1-λ)max(t, 0) + λ min(t, 0)`.
pub fn leaky_relu(t: f64, lambda: f64) -> f64 {
    if t >= 0.0 {
        (1.0 - lambda) * t
    } else {
        lambda * t
    }
}

// Right derivative of ℓ_λ.
fn leaky_relu_slope(t: f64, lambda: f64) -> f64 {
    if t >= 0.0 {
        1.0 - lambda
    } else {
        lambda
    }
}

/// `L(w) = mean ℓ_λ(-y w·x)` over the dataset.
pub fn surrogate_loss(s: &LabeledDataset, w: &[f64], lambda: f64) -> f64 {
    let mut acc = CompensatedSum::default();
    for (x, y) in s.iter() {
        let t = -f64::from(y) * dot(w, x);
        acc.add(leaky_relu(t, lambda));
    }
    acc.value() / s.len() as f64
}

/// Subgradient of [`surrogate_loss`], using the right derivative at the kink.
pub fn surrogate_gradient(s: &LabeledDataset, w: &[f64], lambda: f64) -> Vec<f64> {
    let mut g = vec![0.0; w.len()];
    for (x, y) in s.iter() {
        accumulate_gradient(&mut g, w, x, y, lambda);
    }
    let n = s.len() as f64;
    g.iter_mut().for_each(|gi| *gi /= n);
    g
}

fn accumulate_gradient(g: &mut [f64], w: &[f64], x: &[f64], y: i8, lambda: f64) {
    let yf = f64::from(y);
    let slope = leaky_relu_slope(-yf * dot(w, x), lambda);
    for (gi, xi) in g.iter_mut().zip(x) {
        *gi -= slope * yf * xi;
    }
}

/// Iterations suggested for angular accuracy `eps_prime`: `⌈50/ε'²⌉`.
pub fn iteration_budget(eps_prime: f64) -> usize {
    let it = (50.0 / (eps_prime * eps_prime)).ceil();
    if it.is_finite() && it < usize::MAX as f64 {
        it as usize
    } else {
        usize::MAX
    }
}

/// Projected SGD on the unit sphere for the LeakyReLU surrogate with
/// `λ = η₀`, started at the Chow direction. Returns whichever logged iterate,
/// or its negation, has the lowest 0-1 error on the data.
pub fn massart_learn(s: &LabeledDataset, cfg: &LearnerConfig, eps_prime: Option<f64>) -> Result<LearnedDirection> {
    cfg.validate()?;
    if cfg.kind != LearnerKind::LeakyReluSgd {
        return Err(invalid("kind", "massart_learn runs the leaky-relu-sgd learner"));
    }
    let init = chow_direction(s)?;
    let budget = eps_prime.map(iteration_budget);
    let iterations = budget.map_or(cfg.iteration_cap, |b| b.min(cfg.iteration_cap));
    let cap_reached = budget.is_some_and(|b| b > cfg.iteration_cap);

    let lambda = cfg.eta0;
    let n = s.len();
    let mut rng = rng_from_seed(cfg.seed);
    let mut w = init.v.as_slice().to_vec();
    let mut best = w.clone();
    let mut best_error = init.diagnostics.empirical_error;
    let consider = |w: &[f64], best: &mut Vec<f64>, best_error: &mut f64| {
        let e = parallel_error(s, w);
        let (cand, err) = if 1.0 - e < e {
            let neg: Vec<f64> = w.iter().map(|c| -c).collect();
            let e_neg = parallel_error(s, &neg);
            (neg, e_neg)
        } else {
            (w.to_vec(), e)
        };
        if err < *best_error {
            *best = cand;
            *best_error = err;
        }
    };
    consider(&w.clone(), &mut best, &mut best_error);
    let mut g = vec![0.0; w.len()];
    for t in 0..iterations {
        g.iter_mut().for_each(|gi| *gi = 0.0);
        for _ in 0..cfg.batch_size {
            let i = rng.random_range(0..n);
            accumulate_gradient(&mut g, &w, s.point(i), s.label(i), lambda);
        }
        let step = cfg.step0 / ((t + 1) as f64).sqrt() / cfg.batch_size as f64;
        for (wi, gi) in w.iter_mut().zip(&g) {
            *wi -= step * gi;
        }
        let nw = norm(&w);
        if nw > 0.0 && nw.is_finite() {
            w.iter_mut().for_each(|wi| *wi /= nw);
        }
        if (t + 1) % cfg.log_every == 0 || t + 1 == iterations {
            consider(&w.clone(), &mut best, &mut best_error);
        }
    }
    let v = Direction::normalized(best)?;
    let final_loss = surrogate_loss(s, v.as_slice(), lambda);
    Ok(LearnedDirection {
        v,
        diagnostics: LearnerDiagnostics {
            kind: LearnerKind::LeakyReluSgd,
            final_loss: Some(final_loss),
            iterations,
            iteration_budget: budget,
            cap_reached,
            empirical_error: best_error,
            chow_norm: init.diagnostics.chow_norm,
            degenerate: init.diagnostics.degenerate,
        },
    })
}

/// Runs the learner selected by `cfg.kind`.
pub fn learn(s: &LabeledDataset, cfg: &LearnerConfig, eps_prime: Option<f64>) -> Result<LearnedDirection> {
    match cfg.kind {
        LearnerKind::Chow => chow_direction(s),
        LearnerKind::LeakyReluSgd => massart_learn(s, cfg, eps_prime),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::{sample_dataset, MarginalSpec, MassartProfile, NoiseSpec};
    use crate::points::PointSet;
    use crate::poly::angle_between;

    #[test]
    fn chow_two_points() {
        let pts = PointSet::from_rows(2, &[vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        let s = LabeledDataset::new(pts, vec![1, -1]).unwrap();
        let r = chow_direction(&s).unwrap();
        assert_eq!(r.v, Direction::axis(2, 0));
        assert!(!r.diagnostics.degenerate);
        assert_eq!(r.diagnostics.empirical_error, 0.0);
    }

    #[test]
    fn chow_degenerate_falls_back() {
        let pts = PointSet::from_rows(2, &[vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap();
        let s = LabeledDataset::new(pts, vec![1, -1]).unwrap();
        let r = chow_direction(&s).unwrap();
        assert!(r.diagnostics.degenerate);
        assert_eq!(r.v, Direction::axis(2, 0));
        let sgd = massart_learn(&s, &LearnerConfig::default(), None).unwrap();
        assert!(sgd.diagnostics.degenerate);
    }

    #[test]
    fn chow_coin_flips_carry_no_signal() {
        let v = Direction::axis(5, 0);
        let s = sample_dataset(&MarginalSpec::Gaussian, &v, &NoiseSpec::StrongRcnHalf, 100_000, 1).unwrap();
        let r = chow_direction(&s).unwrap();
        assert!(r.diagnostics.degenerate || r.diagnostics.chow_norm <= 0.02);
    }

    #[test]
    fn chow_recovers_rcn_direction() {
        let v = Direction::axis(10, 0);
        let s = sample_dataset(&MarginalSpec::Gaussian, &v, &NoiseSpec::Rcn(0.2), 200_000, 2).unwrap();
        let r = chow_direction(&s).unwrap();
        assert!(angle_between(&r.v, &v) <= 0.05);
    }

    #[test]
    fn chow_label_flip_antisymmetry() {
        let v = Direction::normalized(vec![1.0, 2.0, -1.0]).unwrap();
        let s = sample_dataset(&MarginalSpec::Gaussian, &v, &NoiseSpec::Rcn(0.1), 5000, 3).unwrap();
        let a = chow_direction(&s).unwrap().v;
        let b = chow_direction(&s.with_labels_negated()).unwrap().v;
        assert_eq!(a.negated(), b);
    }

    #[test]
    fn sgd_is_deterministic_and_unit() {
        let v = Direction::axis(3, 1);
        let noise = NoiseSpec::Massart(MassartProfile::MarginBand { eta: 0.3, width: 0.5 });
        let s = sample_dataset(&MarginalSpec::Gaussian, &v, &noise, 20_000, 4).unwrap();
        let cfg = LearnerConfig {
            seed: 5,
            ..LearnerConfig::default()
        };
        let a = massart_learn(&s, &cfg, Some(0.01)).unwrap();
        let b = massart_learn(&s, &cfg, Some(0.01)).unwrap();
        assert_eq!(a, b);
        assert!((norm(a.v.as_slice()) - 1.0).abs() < 1e-12);
        assert_eq!(a.diagnostics.iteration_budget, Some(500_000));
        assert!(a.diagnostics.cap_reached);
        assert_eq!(a.diagnostics.iterations, cfg.iteration_cap);
    }

    #[test]
    fn sgd_never_worse_than_chow() {
        let v = Direction::axis(5, 0);
        let noise = NoiseSpec::Massart(MassartProfile::MarginBand { eta: 0.3, width: 0.5 });
        for seed in 0..3 {
            let s = sample_dataset(&MarginalSpec::Gaussian, &v, &noise, 50_000, 10 + seed).unwrap();
            let chow = chow_direction(&s).unwrap();
            let sgd = massart_learn(
                &s,
                &LearnerConfig {
                    seed,
                    ..LearnerConfig::default()
                },
                None,
            )
            .unwrap();
            assert!(sgd.diagnostics.empirical_error <= chow.diagnostics.empirical_error);
            assert_eq!(sgd.diagnostics.empirical_error, s.error_of(&sgd.v));
        }
    }

    #[test]
    fn constant_labels_give_at_most_half_error() {
        let mut rng = rng_from_seed(6);
        let pts = PointSet::standard_gaussian(3, 1000, &mut rng).unwrap();
        let s = LabeledDataset::new(pts, vec![1; 1000]).unwrap();
        let r = massart_learn(&s, &LearnerConfig::default(), None).unwrap();
        assert!(s.error_of(&r.v) <= 0.5);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let v = Direction::axis(3, 0);
        let s = sample_dataset(&MarginalSpec::Gaussian, &v, &NoiseSpec::Rcn(0.2), 200, 7).unwrap();
        let mut rng = rng_from_seed(8);
        let lambda = 0.2;
        let mut checked = 0;
        while checked < 50 {
            let w: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let h = 1e-6;
            let near_kink = s.iter().any(|(x, _)| dot(&w, x).abs() < 10.0 * h * norm(x));
            if near_kink {
                continue;
            }
            let g = surrogate_gradient(&s, &w, lambda);
            for j in 0..3 {
                let mut up = w.clone();
                let mut down = w.clone();
                up[j] += h;
                down[j] -= h;
                let fd = (surrogate_loss(&s, &up, lambda) - surrogate_loss(&s, &down, lambda)) / (2.0 * h);
                assert!((fd - g[j]).abs() <= 1e-5 * g[j].abs().max(1e-3), "fd {fd} vs {}", g[j]);
            }
            checked += 1;
        }
    }

    #[test]
    fn leaky_relu_shape() {
        assert_eq!(leaky_relu(2.0, 0.25), 1.5);
        assert_eq!(leaky_relu(-2.0, 0.25), -0.5);
        assert_eq!(leaky_relu_slope(0.0, 0.25), 0.75);
    }

    #[test]
    fn config_validation() {
        let bad = [
            LearnerConfig {
                eta0: 0.5,
                ..LearnerConfig::default()
            },
            LearnerConfig {
                iteration_cap: 0,
                ..LearnerConfig::default()
            },
            LearnerConfig {
                batch_size: 0,
                ..LearnerConfig::default()
            },
        ];
        let pts = PointSet::from_rows(1, &[vec![1.0]]).unwrap();
        let s = LabeledDataset::new(pts, vec![1]).unwrap();
        for cfg in bad {
            assert!(massart_learn(&s, &cfg, None).is_err());
        }
        let chow_cfg = LearnerConfig {
            kind: LearnerKind::Chow,
            ..LearnerConfig::default()
        };
        assert!(massart_learn(&s, &chow_cfg, None).is_err());
        assert_eq!(learn(&s, &chow_cfg, None).unwrap().diagnostics.kind, LearnerKind::Chow);
    }
}
