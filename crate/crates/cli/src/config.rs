//! Run configuration: defaults, `key = value` files, and flag overrides.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use noise_audit::learners::{LearnerConfig, LearnerKind};
use noise_audit::oracles::{MarginalSpec, NoiseSpec};
use noise_audit::pipeline::{MassartConfig, PipelineChoice, RcnConfig, DEFAULT_MIN_SAMPLES};
use noise_audit::testers::{TesterKind, ThresholdPolicy};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PipelineKind {
    Massart,
    Rcn,
}

/// Everything that affects results. Hashed into reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub d: usize,
    pub n: usize,
    pub eps: f64,
    pub delta: f64,
    pub c: Option<f64>,
    pub k_dis: usize,
    pub k_spec: usize,
    pub seed: u64,
    pub policy: ThresholdPolicy,
    pub noise: NoiseSpec,
    pub marginal: MarginalSpec,
    /// When set, `generate` plants this fraction of near-margin mislabeled
    /// points instead of sampling the noise oracle.
    pub rho: Option<f64>,
    pub pipeline: PipelineKind,
    /// Defaults to SGD for the Massart pipeline and Chow for RCN.
    pub learner: Option<LearnerKind>,
    pub min_samples: usize,
    pub trials: usize,
    pub tester: TesterKind,
    /// `U` for the spectral tester; defaults to `(2/5)N`.
    pub normalizer: Option<f64>,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            d: 5,
            n: 10_000,
            eps: 0.1,
            delta: 0.05,
            c: None,
            k_dis: 3,
            k_spec: 3,
            seed: 0,
            policy: ThresholdPolicy::default(),
            noise: NoiseSpec::Clean,
            marginal: MarginalSpec::Gaussian,
            rho: None,
            pipeline: PipelineKind::Massart,
            learner: None,
            min_samples: DEFAULT_MIN_SAMPLES,
            trials: 20,
            tester: TesterKind::Disagreement,
            normalizer: None,
        }
    }
}

pub const KEYS: &[&str] = &[
    "d",
    "n",
    "eps",
    "delta",
    "c",
    "k_dis",
    "k_spec",
    "seed",
    "policy",
    "noise",
    "marginal",
    "rho",
    "pipeline",
    "learner",
    "min_samples",
    "trials",
    "tester",
    "normalizer",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| CliError::Config(format!("{key} = {value:?}: {e}")))
}

fn optional<T: FromStr>(key: &str, value: &str) -> Result<Option<T>, CliError>
where
    T::Err: fmt::Display,
{
    match value.trim() {
        "" | "none" | "default" => Ok(None),
        v => parse(key, v).map(Some),
    }
}

fn normalize_key(key: &str) -> String {
    key.trim().replace('-', "_")
}

impl Params {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let key = normalize_key(key);
        match key.as_str() {
            "d" => self.d = parse(&key, value)?,
            "n" => self.n = parse(&key, value)?,
            "eps" => self.eps = parse(&key, value)?,
            "delta" => self.delta = parse(&key, value)?,
            "c" => self.c = optional(&key, value)?,
            "k_dis" => self.k_dis = parse(&key, value)?,
            "k_spec" => self.k_spec = parse(&key, value)?,
            "seed" => self.seed = parse(&key, value)?,
            "policy" => self.policy = parse(&key, value)?,
            "noise" => self.noise = parse(&key, value)?,
            "marginal" => self.marginal = parse(&key, value)?,
            "rho" => self.rho = optional(&key, value)?,
            "pipeline" => {
                self.pipeline = match value.trim() {
                    "massart" => PipelineKind::Massart,
                    "rcn" => PipelineKind::Rcn,
                    other => {
                        return Err(CliError::Config(format!(
                            "pipeline = {other:?}: expected massart or rcn"
                        )))
                    }
                }
            }
            "learner" => {
                self.learner = match value.trim() {
                    "" | "default" => None,
                    "chow" => Some(LearnerKind::Chow),
                    "sgd" | "leaky-relu-sgd" => Some(LearnerKind::LeakyReluSgd),
                    other => return Err(CliError::Config(format!("learner = {other:?}: expected chow or sgd"))),
                }
            }
            "min_samples" => self.min_samples = parse(&key, value)?,
            "trials" => self.trials = parse(&key, value)?,
            "tester" => {
                self.tester = match value.trim() {
                    "disagreement" => TesterKind::Disagreement,
                    "spectral" => TesterKind::Spectral,
                    other => {
                        return Err(CliError::Config(format!(
                            "tester = {other:?}: expected disagreement or spectral"
                        )))
                    }
                }
            }
            "normalizer" => self.normalizer = optional(&key, value)?,
            _ => return Err(CliError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.d == 0 {
            return Err(CliError::Config("d must be at least 1".into()));
        }
        if self.n == 0 {
            return Err(CliError::Config("n must be at least 1".into()));
        }
        if let Some(rho) = self.rho {
            if !(0.0..1.0).contains(&rho) {
                return Err(CliError::Config(format!("rho must lie in [0, 1), got {rho}")));
            }
        }
        self.noise.validate()?;
        self.marginal.validate()?;
        match self.pipeline_choice() {
            PipelineChoice::Massart(cfg) => cfg.validate()?,
            PipelineChoice::Rcn(cfg) => cfg.validate()?,
        }
        Ok(())
    }

    pub fn learner_config(&self) -> LearnerConfig {
        let kind = self.learner.unwrap_or(match self.pipeline {
            PipelineKind::Massart => LearnerKind::LeakyReluSgd,
            PipelineKind::Rcn => LearnerKind::Chow,
        });
        LearnerConfig {
            kind,
            seed: self.seed,
            ..LearnerConfig::default()
        }
    }

    pub fn pipeline_choice(&self) -> PipelineChoice {
        match self.pipeline {
            PipelineKind::Massart => PipelineChoice::Massart(MassartConfig {
                eps: self.eps,
                delta: self.delta,
                policy: self.policy,
                learner: self.learner_config(),
                k_dis: self.k_dis,
                k_spec: self.k_spec,
                c: self.c,
                min_samples: self.min_samples,
                ..MassartConfig::default()
            }),
            PipelineKind::Rcn => {
                let defaults = RcnConfig::default();
                PipelineChoice::Rcn(RcnConfig {
                    eps: self.eps,
                    delta: self.delta,
                    policy: self.policy,
                    learner: self.learner_config(),
                    k_dis: self.k_dis,
                    c: self.c.unwrap_or(defaults.c),
                    min_samples: self.min_samples,
                    ..defaults
                })
            }
        }
    }

    /// SHA-256 of the canonical JSON of these parameters.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("parameters serialize");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// File locations; not part of the hash.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Io {
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub params: Params,
    #[serde(flatten)]
    pub io: Io,
}

/// Applies a `key = value` file, or the `config` object of an earlier JSON
/// report, on top of `params`.
/// Reports restore the input path but never the output paths, so a rerun
/// cannot overwrite the original artifacts.
pub fn apply_file(params: &mut Params, io: &mut Io, path: &Path) -> Result<(), CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    if text.trim_start().starts_with('{') {
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let config = value
            .get("config")
            .ok_or_else(|| CliError::Config(format!("{}: report has no config object", path.display())))?;
        let restored: RunConfig =
            serde_json::from_value(config.clone()).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        *params = restored.params;
        io.input = restored.io.input;
        return Ok(());
    }
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("{} line {}: expected key = value", path.display(), i + 1)))?;
        let file = Some(PathBuf::from(value.trim()));
        match key.trim() {
            "in" | "input" => io.input = file,
            "out" => io.out = file,
            "report" => io.report = file,
            _ => params
                .set(key, value)
                .map_err(|e| CliError::Config(format!("{} line {}: {e}", path.display(), i + 1)))?,
        }
    }
    Ok(())
}

/// One axis of an experiment grid: `key=v1,v2,...`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridAxis {
    pub key: String,
    pub values: Vec<String>,
}

impl FromStr for GridAxis {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let (key, values) = s
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("grid axis {s:?}: expected key=v1,v2,...")))?;
        let key = normalize_key(key);
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::Config(format!("grid axis: unknown key {key:?}")));
        }
        let values = values
            .split(',')
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .map(String::from)
            .collect();
        Ok(GridAxis { key, values })
    }
}

/// Cartesian product of the axes, first axis slowest. No axes gives a
/// single empty override set; an axis without values gives none at all.
pub fn grid_points(axes: &[GridAxis]) -> Vec<Vec<(String, String)>> {
    let mut points = vec![Vec::new()];
    for axis in axes {
        points = points
            .into_iter()
            .flat_map(|prefix| {
                axis.values.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push((axis.key.clone(), v.clone()));
                    p
                })
            })
            .collect();
    }
    points
}
