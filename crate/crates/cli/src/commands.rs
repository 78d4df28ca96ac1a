use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use noise_audit::learners::{learn as run_learner, LearnedDirection};
use noise_audit::oracles::{adversarial_margin_cluster, sample_dataset, LabeledDataset};
use noise_audit::pipeline::{learner_accuracy, Verdict};
use noise_audit::poly::{angle_between, Direction};
use noise_audit::seed::{derive_seed, rng_from_seed};
use noise_audit::testers::{
    calibrate_threshold, disagreement_test, empirical_quantile, spectral_test, CalibrationRequest, TestParams,
    TesterKind, ThresholdPolicy,
};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::{apply_file, grid_points, GridAxis, Io, Params, RunConfig};
use crate::{CliError, Flags};

pub enum Status {
    Accept,
    Reject,
}

/// Stream for the hidden target direction, so that it never shares draws
/// with the sample itself.
const V_STAR_STREAM: u64 = 0x7617;

/// Default spectral normalizer as a fraction of `N`.
const DEFAULT_U_FRACTION: f64 = 0.4;

fn resolve(flags: &Flags) -> Result<RunConfig, CliError> {
    let mut params = Params::default();
    let mut io = Io::default();
    if let Some(path) = &flags.config {
        apply_file(&mut params, &mut io, path)?;
    }
    for (key, value) in flags.overrides() {
        params.set(key, value)?;
    }
    params.validate()?;
    for (slot, flag) in [
        (&mut io.input, &flags.input),
        (&mut io.out, &flags.out),
        (&mut io.report, &flags.report),
    ] {
        if flag.is_some() {
            slot.clone_from(flag);
        }
    }
    Ok(RunConfig { params, io })
}

fn require<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
    path.as_deref()
        .ok_or_else(|| CliError::Config(format!("--{flag} is required")))
}

fn emit<T: Serialize>(report: &T, path: Option<&Path>) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(report).map_err(|e| CliError::Io(e.to_string()))? + "\n";
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load(cfg: &RunConfig) -> Result<LabeledDataset, CliError> {
    let path = require(&cfg.io.input, "in")?;
    let s = LabeledDataset::read_csv(path)?;
    Ok(s)
}

fn target_direction(p: &Params) -> Direction {
    Direction::random(p.d, &mut rng_from_seed(derive_seed(p.seed, V_STAR_STREAM)))
}

/// The dataset described by `p`, with its target direction.
fn synthesize(p: &Params) -> Result<(LabeledDataset, Direction), CliError> {
    let v_star = target_direction(p);
    let s = match p.rho {
        Some(rho) => adversarial_margin_cluster(&v_star, p.n, rho, p.eps, p.seed)?,
        None => sample_dataset(&p.marginal, &v_star, &p.noise, p.n, p.seed)?,
    };
    Ok((s, v_star))
}

fn sidecar(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".provenance.json");
    PathBuf::from(name)
}

pub fn generate(flags: &Flags) -> Result<Status, CliError> {
    let cfg = resolve(flags)?;
    let out = require(&cfg.io.out, "out")?;
    let (s, v_star) = synthesize(&cfg.params)?;
    s.write_csv(out)?;
    s.write_provenance(&sidecar(out))?;
    emit(
        &json!({
            "command": "generate",
            "config": cfg,
            "config_hash": cfg.params.hash(),
            "rows": s.len(),
            "v_star": v_star,
            "flip_rate": s.error_of(&v_star),
        }),
        cfg.io.report.as_deref(),
    )?;
    Ok(Status::Accept)
}

fn learner_target(d: usize, eps: f64) -> Option<f64> {
    (d >= 2).then(|| learner_accuracy(eps, d))
}

fn learn_direction(cfg: &RunConfig, s: &LabeledDataset) -> Result<LearnedDirection, CliError> {
    Ok(run_learner(
        s,
        &cfg.params.learner_config(),
        learner_target(s.dim(), cfg.params.eps),
    )?)
}

pub fn learn(flags: &Flags) -> Result<Status, CliError> {
    let cfg = resolve(flags)?;
    let s = load(&cfg)?;
    let learned = learn_direction(&cfg, &s)?;
    emit(
        &json!({
            "command": "learn",
            "config": cfg,
            "config_hash": cfg.params.hash(),
            "learned": learned,
        }),
        cfg.io.report.as_deref(),
    )?;
    Ok(Status::Accept)
}

fn parse_direction(raw: &str, d: usize) -> Result<Direction, CliError> {
    let comps: Vec<f64> = raw
        .split(',')
        .map(|c| c.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Config(format!("direction {raw:?}: {e}")))?;
    if comps.len() != d {
        return Err(CliError::Config(format!(
            "direction has {} components, data has d = {d}",
            comps.len()
        )));
    }
    Ok(Direction::normalized(comps)?)
}

/// Disagreement tester on all points, or spectral tester on the points the
/// direction mislabels (normalizer `U`, default `(2/5)N`).
pub fn test(flags: &Flags) -> Result<Status, CliError> {
    let cfg = resolve(flags)?;
    let p = &cfg.params;
    let s = load(&cfg)?;
    let v = match &flags.direction {
        Some(raw) => parse_direction(raw, s.dim())?,
        None => learn_direction(&cfg, &s)?.v,
    };
    let mu = 0.1;
    let (accept, report) = match p.tester {
        TesterKind::Disagreement => {
            let r = disagreement_test(s.points(), &v, &TestParams::new(p.eps, p.delta, mu, p.k_dis), &p.policy)?;
            (r.verdict.is_accept(), serde_json::to_value(&r))
        }
        TesterKind::Spectral => {
            let u = p.normalizer.unwrap_or(DEFAULT_U_FRACTION * s.len() as f64);
            let mistakes = s.points().subset(s.mistakes(&v));
            let r = spectral_test(
                &mistakes,
                u,
                &v,
                &TestParams::new(p.eps, p.delta, mu, p.k_spec),
                &p.policy,
            )?;
            (r.verdict.is_accept(), serde_json::to_value(&r))
        }
    };
    let report = report.map_err(|e| CliError::Io(e.to_string()))?;
    emit(
        &json!({
            "command": "test",
            "config": cfg,
            "config_hash": p.hash(),
            "direction": v,
            "report": report,
        }),
        cfg.io.report.as_deref(),
    )?;
    Ok(if accept { Status::Accept } else { Status::Reject })
}

pub fn pipeline(flags: &Flags) -> Result<Status, CliError> {
    let cfg = resolve(flags)?;
    let s = load(&cfg)?;
    let start = Instant::now();
    let verdict = cfg.params.pipeline_choice().run(&s)?;
    let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    let accept = verdict.is_accept();
    emit(
        &json!({
            "command": "pipeline",
            "config": cfg,
            "config_hash": cfg.params.hash(),
            "verdict": verdict,
            "elapsed_ms": elapsed_ms,
        }),
        cfg.io.report.as_deref(),
    )?;
    Ok(if accept { Status::Accept } else { Status::Reject })
}

pub fn calibrate(flags: &Flags) -> Result<Status, CliError> {
    let cfg = resolve(flags)?;
    let p = &cfg.params;
    let ThresholdPolicy::Calibrated { trials, quantile, seed } = p.policy else {
        return Err(CliError::Config("calibrate needs a calibrated policy".into()));
    };
    let (k, normalizer) = match p.tester {
        TesterKind::Disagreement => (p.k_dis, p.n as f64),
        TesterKind::Spectral => (p.k_spec, p.normalizer.unwrap_or(p.n as f64)),
    };
    let req = CalibrationRequest {
        kind: p.tester,
        d: p.d,
        n: p.n,
        normalizer,
        eps: p.eps,
        k,
        trials,
        quantile,
        seed,
    };
    let threshold = calibrate_threshold(&req)?;
    emit(
        &json!({
            "command": "calibrate",
            "config": cfg,
            "config_hash": p.hash(),
            "tester": p.tester,
            "k": k,
            "normalizer": normalizer,
            "threshold": threshold,
        }),
        cfg.io.report.as_deref(),
    )?;
    Ok(Status::Accept)
}

#[derive(Serialize)]
struct Record {
    grid_index: usize,
    config_hash: String,
    seed: u64,
    outcome: &'static str,
    stage: Option<String>,
    /// Angle between the accepted direction and the target.
    angle: Option<f64>,
    error: Option<f64>,
    target_error: f64,
    excess_error: Option<f64>,
    elapsed_ms: f64,
}

#[derive(Serialize)]
struct Aggregate {
    grid_index: usize,
    overrides: BTreeMap<String, String>,
    config_hash: String,
    runs: usize,
    accepted: usize,
    accept_rate: f64,
    excess_error_median: Option<f64>,
    excess_error_q90: Option<f64>,
}

fn stage_name(verdict: &Verdict) -> Option<String> {
    verdict
        .stage()
        .and_then(|s| serde_json::to_value(s).ok())
        .and_then(|v| v.as_str().map(String::from))
}

fn run_trial(grid_index: usize, params: &Params) -> Result<Record, CliError> {
    let start = Instant::now();
    let (s, v_star) = synthesize(params)?;
    let verdict = params.pipeline_choice().run(&s)?;
    let target_error = s.error_of(&v_star);
    let error = verdict.direction().map(|v| s.error_of(v));
    Ok(Record {
        grid_index,
        config_hash: params.hash(),
        seed: params.seed,
        outcome: if verdict.is_accept() { "accept" } else { "reject" },
        stage: stage_name(&verdict),
        angle: verdict.direction().map(|v| angle_between(v, &v_star)),
        error,
        target_error,
        excess_error: error.map(|e| e - target_error),
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

fn csv_field(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x}"))
}

pub fn experiment(flags: &Flags) -> Result<Status, CliError> {
    let cfg = resolve(flags)?;
    if cfg.params.trials == 0 {
        return Err(CliError::Config("trials must be at least 1".into()));
    }
    let axes: Vec<GridAxis> = flags.grid.iter().map(|g| g.parse()).collect::<Result<_, _>>()?;
    let points = grid_points(&axes);
    let mut grid_params = Vec::with_capacity(points.len());
    for overrides in &points {
        let mut p = cfg.params.clone();
        for (k, v) in overrides {
            p.set(k, v)?;
        }
        p.validate()?;
        grid_params.push(p);
    }
    let jobs: Vec<(usize, Params)> = grid_params
        .iter()
        .enumerate()
        .flat_map(|(g, p)| {
            (0..p.trials as u64).map(move |t| {
                let mut q = p.clone();
                q.seed = p.seed.wrapping_add(t);
                (g, q)
            })
        })
        .collect();
    let records: Vec<Record> = jobs
        .par_iter()
        .map(|(g, p)| run_trial(*g, p))
        .collect::<Result<_, _>>()?;

    let aggregates: Vec<Aggregate> = grid_params
        .iter()
        .enumerate()
        .map(|(g, p)| {
            let mine: Vec<&Record> = records.iter().filter(|r| r.grid_index == g).collect();
            let accepted = mine.iter().filter(|r| r.outcome == "accept").count();
            let excess: Vec<f64> = mine.iter().filter_map(|r| r.excess_error).collect();
            let q = |level: f64| (!excess.is_empty()).then(|| empirical_quantile(&excess, level));
            Aggregate {
                grid_index: g,
                overrides: points[g].iter().cloned().collect(),
                config_hash: p.hash(),
                runs: mine.len(),
                accepted,
                accept_rate: if mine.is_empty() {
                    0.0
                } else {
                    accepted as f64 / mine.len() as f64
                },
                excess_error_median: q(0.5),
                excess_error_q90: q(0.9),
            }
        })
        .collect();

    if let Some(out) = &cfg.io.out {
        let mut csv = String::from("grid_index,seed,outcome,stage,angle,error,target_error,excess_error,elapsed_ms\n");
        for r in &records {
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{},{:.3}\n",
                r.grid_index,
                r.seed,
                r.outcome,
                r.stage.as_deref().unwrap_or(""),
                csv_field(r.angle),
                csv_field(r.error),
                r.target_error,
                csv_field(r.excess_error),
                r.elapsed_ms
            ));
        }
        fs::write(out, csv).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    }
    emit(
        &json!({
            "command": "experiment",
            "config": cfg,
            "config_hash": cfg.params.hash(),
            "grid": flags.grid,
            "records": records,
            "aggregates": aggregates,
        }),
        cfg.io.report.as_deref(),
    )?;
    Ok(Status::Accept)
}
