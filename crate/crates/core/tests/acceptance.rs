//! Acceptance criteria, one PASS/FAIL line each. Runs every criterion even
//! after a failure and exits non-zero if any failed.

mod common;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use noise_audit::gauss::{gaussian_strip_moment, StripMomentKernel, StripSpec};
use noise_audit::oracles::{
    adversarial_margin_cluster, sample_dataset, LabeledDataset, MarginalSpec, MassartProfile, NoiseSpec,
};
use noise_audit::pipeline::{
    distinguisher, error_decomposition, opt_bruteforce, run_massart_pipeline, run_rcn_pipeline, MassartConfig,
    PipelineChoice, RcnConfig, Stage, Verdict,
};
use noise_audit::points::PointSet;
use noise_audit::poly::{Direction, MultiIndex};
use noise_audit::seed::{derive_seed, rng_from_seed};
use noise_audit::testers::{
    calibration_statistics, disagreement_test, spectral_test, CalibrationRequest, TestParams, TesterKind,
    ThresholdPolicy,
};
use rand::Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn calibrated(quantile: f64, seed: u64) -> ThresholdPolicy {
    ThresholdPolicy::Calibrated {
        trials: 100,
        quantile,
        seed,
    }
}

fn disagreement_frequency(points: &PointSet, v: &[f64], w: &[f64]) -> f64 {
    let d = points.dim();
    let count: usize = points
        .as_flat()
        .par_chunks(d * 4096)
        .map(|block| {
            block
                .chunks_exact(d)
                .filter(|x| {
                    let a: f64 = x.iter().zip(v).map(|(p, q)| p * q).sum();
                    let b: f64 = x.iter().zip(w).map(|(p, q)| p * q).sum();
                    (a >= 0.0) != (b >= 0.0)
                })
                .count()
        })
        .sum();
    count as f64 / points.len() as f64
}

fn random_unit_orthogonal<R: Rng>(u: &[f64], rng: &mut R) -> Vec<f64> {
    let w = Direction::random(u.len(), rng);
    let c: f64 = w.as_slice().iter().zip(u).map(|(a, b)| a * b).sum();
    let r: Vec<f64> = w.as_slice().iter().zip(u).map(|(a, b)| a - c * b).collect();
    let n = r.iter().map(|x| x * x).sum::<f64>().sqrt();
    r.into_iter().map(|x| x / n).collect()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for (di, d) in [2usize, 5, 10].into_iter().enumerate() {
        let mut rng = rng_from_seed(derive_seed(101, di as u64));
        let points = PointSet::standard_gaussian(d, 1_000_000, &mut rng).unwrap();
        for _ in 0..50 {
            let u = Direction::random(d, &mut rng);
            let w = random_unit_orthogonal(u.as_slice(), &mut rng);
            let theta = rng.random_range(0.0..std::f64::consts::PI);
            let v: Vec<f64> = u
                .as_slice()
                .iter()
                .zip(&w)
                .map(|(a, b)| theta.cos() * a + theta.sin() * b)
                .collect();
            let freq = disagreement_frequency(&points, u.as_slice(), &v);
            let expected = common::angle(u.as_slice(), &v) / std::f64::consts::PI;
            worst = worst.max((freq - expected).abs());
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 0.005 && elapsed <= Duration::from_secs(120),
        format!(
            "max |freq - angle/pi| = {worst:.5} over 150 pairs (tol 0.005), {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn random_alpha<R: Rng>(d: usize, max_degree: u32, rng: &mut R) -> MultiIndex {
    let degree = rng.random_range(0..=max_degree);
    let mut e = vec![0u32; d];
    for _ in 0..degree {
        e[rng.random_range(0..d)] += 1;
    }
    MultiIndex::new(e)
}

fn random_strip<R: Rng>(d: usize, rng: &mut R) -> StripSpec {
    let v = Direction::random(d, rng);
    let (a, b) = match rng.random_range(0..4) {
        0 => (f64::NEG_INFINITY, rng.random_range(-4.0..4.0)),
        1 => (rng.random_range(-4.0..4.0), f64::INFINITY),
        _ => {
            let a = rng.random_range(-4.0..4.0);
            (a, a + rng.random_range(0.01..2.0))
        }
    };
    StripSpec::new(v, a, b).unwrap()
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = rng_from_seed(202);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let d = rng.random_range(1..=3);
        let alpha = random_alpha(d, 6, &mut rng);
        let strip = random_strip(d, &mut rng);
        let (a, b) = strip.bounds();
        let reference = common::strip_moment_quadrature(alpha.exponents(), strip.direction().as_slice(), a, b);
        let composed = gaussian_strip_moment(&alpha, &strip).unwrap();
        let kernel = StripMomentKernel::new(strip.direction(), alpha.degree() as usize).unwrap();
        let idx = kernel.basis().index_of(&alpha).unwrap();
        let fast = kernel.moments(a, b).unwrap()[idx];
        worst = worst.max((composed - reference).abs()).max((fast - reference).abs());
    }

    // Monte Carlo at d = 3, streamed in fixed blocks.
    let cases: Vec<(MultiIndex, StripSpec)> = (0..20)
        .map(|_| (random_alpha(3, 6, &mut rng), random_strip(3, &mut rng)))
        .collect();
    let blocks = 100usize;
    let per_block = 100_000usize;
    let sums = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = rng_from_seed(derive_seed(203, b as u64));
            let pts = PointSet::standard_gaussian(3, per_block, &mut rng).unwrap();
            let mut acc = vec![(0.0f64, 0.0f64); cases.len()];
            for x in pts.iter() {
                for (c, (alpha, strip)) in cases.iter().enumerate() {
                    if strip.contains(x) {
                        let m = common::monomial(alpha.exponents(), x);
                        acc[c].0 += m;
                        acc[c].1 += m * m;
                    }
                }
            }
            acc
        })
        .reduce(
            || vec![(0.0, 0.0); cases.len()],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    x.0 += y.0;
                    x.1 += y.1;
                }
                a
            },
        );
    let n = (blocks * per_block) as f64;
    let mut worst_z = 0.0f64;
    for ((alpha, strip), (s, s2)) in cases.iter().zip(sums) {
        let mean = s / n;
        let se = ((s2 / n - mean * mean).max(0.0) / n).sqrt();
        let exact = gaussian_strip_moment(alpha, strip).unwrap();
        let z = if se > 0.0 {
            (mean - exact).abs() / se
        } else {
            (mean - exact).abs() * f64::INFINITY
        };
        worst_z = worst_z.max(if z.is_nan() { 0.0 } else { z });
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-10 && worst_z <= 4.0 && elapsed <= Duration::from_secs(300),
        format!(
            "max quadrature gap {worst:.2e} on 500 cases (tol 1e-10); max MC z = {worst_z:.2} on 20 cases at 1e7 samples (tol 4); {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let eps = 0.1;
    let params = TestParams::new(eps, 0.05, 0.1, 3);
    let policy = calibrated(0.95, 303);
    let marginals = [
        MarginalSpec::Gaussian,
        MarginalSpec::Gaussian,
        MarginalSpec::StudentT(30.0),
        MarginalSpec::GaussianMixture(0.1),
    ];
    let grid: Vec<Vec<f64>> = (0..720)
        .map(|j| {
            let a = j as f64 * std::f64::consts::PI / 360.0;
            vec![a.cos(), a.sin()]
        })
        .collect();
    let (mut accepted, mut tried, mut violations) = (0usize, 0usize, 0usize);
    let mut worst_c = 0.0f64;
    while accepted < 100 && tried < 400 {
        let seed = derive_seed(304, tried as u64);
        let marginal = marginals[tried % marginals.len()];
        tried += 1;
        let mut rng = rng_from_seed(seed);
        let v = Direction::random(2, &mut rng);
        let s = sample_dataset(&marginal, &v, &NoiseSpec::Clean, 20_000, seed).unwrap();
        let report = disagreement_test(s.points(), &v, &params, &policy).unwrap();
        if !report.verdict.is_accept() {
            continue;
        }
        accepted += 1;
        let bound = report.soundness.expect("accepting report carries a bound");
        worst_c = worst_c.max(bound.constant);
        let slack = bound.constant * bound.eps;
        violations += grid
            .par_iter()
            .filter(|w| {
                let freq = disagreement_frequency(s.points(), v.as_slice(), w);
                let t = common::angle(v.as_slice(), w) / std::f64::consts::PI;
                freq < (1.0 - bound.mu) * t - slack || freq > (1.0 + bound.mu) * t + slack
            })
            .count();
    }
    let elapsed = start.elapsed();
    outcome(
        accepted == 100 && violations == 0 && worst_c <= 10.0 && elapsed <= Duration::from_secs(600),
        format!(
            "{accepted} accepted of {tried} instances, {violations} violations over 720 directions each, C_cert = {worst_c}, {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_4() -> Outcome {
    let (d, n0, u) = (3usize, 4000usize, 5000.0);
    let params = TestParams::new(0.1, 0.05, 0.1, 2);
    let policy = calibrated(0.95, 404);
    let (mut accepted, mut tried, mut violations, mut checks) = (0usize, 0usize, 0usize, 0usize);
    while accepted < 50 && tried < 200 {
        let seed = derive_seed(405, tried as u64);
        tried += 1;
        let mut rng = rng_from_seed(seed);
        let v = Direction::random(d, &mut rng);
        let pts = PointSet::standard_gaussian(d, n0, &mut rng).unwrap();
        let base = spectral_test(&pts, u, &v, &params, &policy).unwrap();
        if !base.verdict.is_accept() {
            continue;
        }
        accepted += 1;
        for _ in 0..10 {
            let keep: f64 = rng.random_range(0.05..1.0);
            let idx: Vec<usize> = (0..n0).filter(|_| rng.random::<f64>() < keep).collect();
            if idx.is_empty() {
                continue;
            }
            checks += 1;
            let sub = spectral_test(&pts.subset(idx), u, &v, &params, &policy).unwrap();
            if !sub.verdict.is_accept() {
                violations += 1;
            }
        }
    }
    outcome(
        accepted == 50 && violations == 0,
        format!("{accepted} accepted instances, {checks} subsets, {violations} lost Accept"),
    )
}

fn stage_histogram<'a>(verdicts: impl Iterator<Item = &'a Verdict>) -> String {
    let mut h: BTreeMap<String, usize> = BTreeMap::new();
    for v in verdicts {
        let key = match v.stage() {
            None => "accept".to_string(),
            Some(s) => serde_json::to_value(s).unwrap().as_str().unwrap().to_string(),
        };
        *h.entry(key).or_default() += 1;
    }
    format!("{h:?}")
}

fn massart_cfg(eps: f64, quantile: f64, seed: u64) -> MassartConfig {
    MassartConfig {
        eps,
        policy: calibrated(quantile, seed),
        k_dis: 3,
        k_spec: 2,
        ..MassartConfig::default()
    }
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let cfg = massart_cfg(0.1, 0.95, 505);
    let noise = NoiseSpec::Massart(MassartProfile::MarginBand { eta: 0.3, width: 0.5 });
    let mut verdicts = Vec::new();
    let mut worst_angle = 0.0f64;
    for seed in 0..20u64 {
        let seed = derive_seed(506, seed);
        let v_star = Direction::random(5, &mut rng_from_seed(seed));
        let s = sample_dataset(&MarginalSpec::Gaussian, &v_star, &noise, 100_000, seed).unwrap();
        let verdict = run_massart_pipeline(&s, &cfg).unwrap();
        if let Some(v) = verdict.direction() {
            worst_angle = worst_angle.max(common::angle(v.as_slice(), v_star.as_slice()));
        }
        verdicts.push(verdict);
    }
    let accepted = verdicts.iter().filter(|v| v.is_accept()).count();
    let elapsed = start.elapsed();
    outcome(
        accepted >= 16 && worst_angle <= 0.1 && elapsed <= Duration::from_secs(1800),
        format!(
            "{accepted}/20 accepted (need 16), max angle on Accept {worst_angle:.4} (tol 0.1), stages {}, {:.1}s",
            stage_histogram(verdicts.iter()),
            elapsed.as_secs_f64()
        ),
    )
}

fn fuzz_dataset(i: usize) -> LabeledDataset {
    let n = 3000;
    let seed = derive_seed(601, i as u64);
    let mut rng = rng_from_seed(seed);
    let v = Direction::random(2, &mut rng);
    let gauss = MarginalSpec::Gaussian;
    match i % 10 {
        0 => sample_dataset(&gauss, &v, &NoiseSpec::Clean, n, seed).unwrap(),
        1 => sample_dataset(&gauss, &v, &NoiseSpec::Rcn(0.2), n, seed).unwrap(),
        2 => sample_dataset(
            &gauss,
            &v,
            &NoiseSpec::Massart(MassartProfile::MarginBand { eta: 0.3, width: 0.5 }),
            n,
            seed,
        )
        .unwrap(),
        3 => sample_dataset(
            &gauss,
            &v,
            &NoiseSpec::Massart(MassartProfile::MarginSigmoid { eta: 0.4, scale: 0.3 }),
            n,
            seed,
        )
        .unwrap(),
        4 => adversarial_margin_cluster(&v, n, rng.random_range(0.01..0.3), 0.1, seed).unwrap(),
        5 => sample_dataset(&MarginalSpec::UniformCube, &v, &NoiseSpec::Rcn(0.1), n, seed).unwrap(),
        6 => sample_dataset(&MarginalSpec::StudentT(3.0), &v, &NoiseSpec::Clean, n, seed).unwrap(),
        7 => sample_dataset(&MarginalSpec::GaussianMixture(1.0), &v, &NoiseSpec::Rcn(0.1), n, seed).unwrap(),
        8 => sample_dataset(&gauss, &v, &NoiseSpec::StrongRcnHalf, n, seed).unwrap(),
        _ => {
            // Gaussian points labeled by two different halfspaces on two halves.
            let w = Direction::random(2, &mut rng);
            let s = sample_dataset(&gauss, &v, &NoiseSpec::Clean, n, seed).unwrap();
            let labels = s
                .iter()
                .enumerate()
                .map(|(j, (x, y))| if j % 2 == 0 { y } else { w.classify(x) })
                .collect();
            LabeledDataset::new(s.points().clone(), labels).unwrap()
        }
    }
}

fn criterion_6() -> Outcome {
    let eps = 0.1;
    let cfg = massart_cfg(eps, 0.95, 606);
    let (mut accepted, mut violations) = (0usize, 0usize);
    let mut worst_gap = f64::NEG_INFINITY;
    let mut verdicts = Vec::new();
    for i in 0..200 {
        let s = fuzz_dataset(i);
        let verdict = run_massart_pipeline(&s, &cfg).unwrap();
        if let (Some(v), Some(cert)) = (verdict.direction(), verdict.certificate()) {
            accepted += 1;
            let opt = opt_bruteforce(&s, 0, 0).unwrap();
            let gap = s.error_of(v) - opt.opt - cert.c_cert * eps;
            worst_gap = worst_gap.max(gap);
            if gap > 0.0 {
                violations += 1;
            }
        }
        verdicts.push(verdict);
    }
    outcome(
        violations == 0,
        format!(
            "{accepted}/200 accepted, {violations} violations of err <= opt + C_cert*eps (worst slack {worst_gap:.4}), stages {}",
            stage_histogram(verdicts.iter())
        ),
    )
}

fn criterion_7() -> Outcome {
    let (d, n) = (5usize, 100_000usize);
    let run = |make: &dyn Fn(u64) -> LabeledDataset, cfg: &MassartConfig| -> Vec<Verdict> {
        (0..20u64)
            .map(|t| run_massart_pipeline(&make(t), cfg).unwrap())
            .collect()
    };
    let stage_count = |vs: &[Verdict], stage: Stage| vs.iter().filter(|v| v.stage() == Some(stage)).count();

    let coin = run(
        &|t| {
            let seed = derive_seed(701, t);
            let v = Direction::random(d, &mut rng_from_seed(seed));
            sample_dataset(&MarginalSpec::Gaussian, &v, &NoiseSpec::StrongRcnHalf, n, seed).unwrap()
        },
        &massart_cfg(0.1, 0.99, 702),
    );
    let cluster = run(
        &|t| {
            let seed = derive_seed(703, t);
            let v = Direction::random(d, &mut rng_from_seed(seed));
            adversarial_margin_cluster(&v, n, 0.3, 0.05, seed).unwrap()
        },
        &massart_cfg(0.05, 0.95, 704),
    );
    let heavy = run(
        &|t| {
            let seed = derive_seed(705, t);
            let v = Direction::random(d, &mut rng_from_seed(seed));
            sample_dataset(&MarginalSpec::StudentT(3.0), &v, &NoiseSpec::Clean, n, seed).unwrap()
        },
        &massart_cfg(0.1, 0.95, 706),
    );
    let (a, b, c) = (
        stage_count(&coin, Stage::FalseFraction),
        stage_count(&cluster, Stage::NearMargin),
        stage_count(&heavy, Stage::Disagreement),
    );
    let parts = [
        (
            a >= 19,
            format!(
                "coin-flip at false-fraction {a}/20 (need 19) {}",
                stage_histogram(coin.iter())
            ),
        ),
        (
            b == 20,
            format!(
                "margin-cluster at near-margin {b}/20 (need 20) {}",
                stage_histogram(cluster.iter())
            ),
        ),
        (
            c >= 18,
            format!(
                "student-t(3) at disagreement {c}/20 (need 18) {}",
                stage_histogram(heavy.iter())
            ),
        ),
    ];
    let detail = parts
        .iter()
        .map(|(ok, s)| format!("[{}] {s}", if *ok { "ok" } else { "FAIL" }))
        .collect::<Vec<_>>()
        .join("; ");
    outcome(parts.iter().all(|p| p.0), detail)
}

fn criterion_8() -> Outcome {
    let (d, n, tau, eps) = (5usize, 50_000usize, 0.05, 0.1);
    let choice = PipelineChoice::Rcn(RcnConfig {
        c: 0.0,
        policy: calibrated(0.95, 801),
        ..RcnConfig::default()
    });
    let arm = |noise: NoiseSpec, base: u64| -> (usize, Vec<Verdict>) {
        let mut ones = 0;
        let mut verdicts = Vec::new();
        for t in 0..60u64 {
            let seed = derive_seed(base, t);
            let v = Direction::random(d, &mut rng_from_seed(seed));
            let s = sample_dataset(&MarginalSpec::Gaussian, &v, &noise, n, seed).unwrap();
            let out = distinguisher(&s, eps, tau, &choice).unwrap();
            ones += out.bit as usize;
            verdicts.push(out.verdict);
        }
        (ones, verdicts)
    };
    let (null_ones, null_v) = arm(NoiseSpec::StrongRcnHalf, 802);
    let (alt_ones, alt_v) = arm(NoiseSpec::Clean, 803);
    let advantage = (null_ones as f64 - alt_ones as f64).abs() / 60.0;
    outcome(
        advantage >= 1.0 / 3.0,
        format!(
            "P1(null) = {null_ones}/60 {}, P1(alt) = {alt_ones}/60 {}, advantage {advantage:.3} (need 1/3)",
            stage_histogram(null_v.iter()),
            stage_histogram(alt_v.iter())
        ),
    )
}

fn criterion_9() -> Outcome {
    let mut rng = rng_from_seed(901);
    let mut violations = 0;
    for t in 0..1000u64 {
        let d = rng.random_range(2..=6);
        let n = rng.random_range(1..=300);
        let v_star = Direction::random(d, &mut rng);
        let noise = [NoiseSpec::Clean, NoiseSpec::Rcn(0.3), NoiseSpec::StrongRcnHalf][t as usize % 3];
        let mut s = sample_dataset(&MarginalSpec::Gaussian, &v_star, &noise, n, derive_seed(902, t)).unwrap();
        if t % 7 == 0 {
            // points on coordinate hyperplanes exercise the sign(0) convention
            let rows: Vec<Vec<f64>> = s
                .points()
                .iter()
                .map(|x| {
                    x.iter()
                        .enumerate()
                        .map(|(i, &c)| if i == 0 { 0.0 } else { c })
                        .collect()
                })
                .collect();
            s = LabeledDataset::new(PointSet::from_rows(d, &rows).unwrap(), s.labels().to_vec()).unwrap();
        }
        let v = if t % 5 == 0 {
            Direction::axis(d, 0)
        } else {
            Direction::random(d, &mut rng)
        };
        let v_ref = Direction::random(d, &mut rng);
        let ledger = error_decomposition(&s, &v, &v_ref, 0.1).unwrap();
        let direct_v = s.iter().filter(|(x, y)| v.classify(x) != *y).count();
        let direct_ref = s.iter().filter(|(x, y)| v_ref.classify(x) != *y).count();
        let ok = ledger.identity_holds()
            && ledger.mistakes_v == direct_v
            && ledger.mistakes_ref == direct_ref
            && (direct_v + ledger.s_g) == (direct_ref + ledger.s_b);
        violations += usize::from(!ok);
    }
    outcome(violations == 0, format!("{violations} violations on 1000 triples"))
}

fn hash_json<T: serde::Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).unwrap();
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn criterion_10() -> Outcome {
    let v = Direction::normalized(vec![1.0, -0.5, 0.25]).unwrap();
    let noise = NoiseSpec::Massart(MassartProfile::MarginBand { eta: 0.3, width: 0.5 });
    let req = CalibrationRequest {
        kind: TesterKind::Spectral,
        d: 3,
        n: 4000,
        normalizer: 4000.0,
        eps: 0.1,
        k: 2,
        trials: 30,
        quantile: 0.95,
        seed: 1001,
    };
    let run = || {
        let s = sample_dataset(&MarginalSpec::Gaussian, &v, &noise, 20_000, 1002).unwrap();
        let massart = run_massart_pipeline(&s, &massart_cfg(0.1, 0.95, 1003)).unwrap();
        let rcn = run_rcn_pipeline(
            &s,
            &RcnConfig {
                policy: calibrated(0.95, 1004),
                ..RcnConfig::default()
            },
        )
        .unwrap();
        let stats: Vec<u64> = calibration_statistics(&req)
            .unwrap()
            .iter()
            .map(|x| x.to_bits())
            .collect();
        [
            hash_json(&s.to_csv()),
            hash_json(&massart),
            hash_json(&rcn),
            hash_json(&stats),
        ]
    };
    let hashes: Vec<[String; 4]> = [1usize, 4, 1, 3]
        .iter()
        .map(|&threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(run)
        })
        .collect();
    let same = hashes.iter().all(|h| h == &hashes[0]);
    outcome(
        same,
        format!(
            "verdict hashes under 1, 4, 1, 3 threads identical: {same} ({})",
            &hashes[0][1][..16]
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("1 disagreement probability equals angle/pi", criterion_1),
        ("2 strip moments match quadrature and Monte Carlo", criterion_2),
        ("3 disagreement tester soundness sweep", criterion_3),
        ("4 spectral monotonicity under removal", criterion_4),
        ("5 Massart pipeline completeness", criterion_5),
        ("6 pipeline soundness fuzz", criterion_6),
        ("7 targeted rejections", criterion_7),
        ("8 distinguisher advantage", criterion_8),
        ("9 error ledger identity", criterion_9),
        ("10 determinism across thread counts", criterion_10),
    ];
    let only: Option<String> = std::env::args().nth(1).filter(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (name, f) in criteria {
        if only.as_deref().is_some_and(|o| !name.starts_with(&format!("{o} "))) {
            continue;
        }
        let start = Instant::now();
        let out = f();
        let tag = if out.pass { "PASS" } else { "FAIL" };
        println!(
            "{tag} criterion {name}: {} [{:.1}s]",
            out.detail,
            start.elapsed().as_secs_f64()
        );
        failed += usize::from(!out.pass);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
