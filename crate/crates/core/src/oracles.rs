//! Labeled example oracles: marginals, label-noise models, adversarial
//! departures, and the CSV dataset format.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error, Result};
use crate::linalg::norm;
use crate::points::PointSet;
use crate::poly::{angle_to_point, sign, Direction};
use crate::seed::rng_from_seed;

/// Shape of an x-dependent Massart flip rate, as a function of the margin
/// `t = v*·x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MassartProfile {
    Constant(f64),
    /// `η(x) = η₀ · 1{|t| < width}`.
    MarginBand {
        eta: f64,
        width: f64,
    },
    /// `η(x) = 2η₀ / (1 + e^{|t|/scale})`, equal to `η₀` on the boundary.
    MarginSigmoid {
        eta: f64,
        scale: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NoiseSpec {
    Clean,
    Rcn(f64),
    /// Labels are independent fair coins.
    StrongRcnHalf,
    Massart(MassartProfile),
}

impl NoiseSpec {
    /// Probability that the clean label of a point with margin `t` is flipped.
    pub fn flip_probability(&self, t: f64) -> f64 {
        match *self {
            NoiseSpec::Clean => 0.0,
            NoiseSpec::Rcn(eta) => eta,
            NoiseSpec::StrongRcnHalf => 0.5,
            NoiseSpec::Massart(MassartProfile::Constant(eta)) => eta,
            NoiseSpec::Massart(MassartProfile::MarginBand { eta, width }) => {
                if t.abs() < width {
                    eta
                } else {
                    0.0
                }
            }
            NoiseSpec::Massart(MassartProfile::MarginSigmoid { eta, scale }) => {
                2.0 * eta / (1.0 + (t.abs() / scale).exp())
            }
        }
    }

    /// `sup_x η(x)`.
    pub fn noise_rate(&self) -> f64 {
        match *self {
            NoiseSpec::Clean => 0.0,
            NoiseSpec::StrongRcnHalf => 0.5,
            NoiseSpec::Rcn(eta)
            | NoiseSpec::Massart(MassartProfile::Constant(eta))
            | NoiseSpec::Massart(MassartProfile::MarginBand { eta, .. })
            | NoiseSpec::Massart(MassartProfile::MarginSigmoid { eta, .. }) => eta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let eta = self.noise_rate();
        if !(0.0..=0.5).contains(&eta) {
            return Err(invalid("noise", format!("rate must lie in [0, 1/2], got {eta}")));
        }
        match *self {
            NoiseSpec::Massart(MassartProfile::MarginBand { width, .. }) if !(width > 0.0 && width.is_finite()) => {
                Err(invalid("noise", format!("band width must be positive, got {width}")))
            }
            NoiseSpec::Massart(MassartProfile::MarginSigmoid { scale, .. }) if !(scale > 0.0 && scale.is_finite()) => {
                Err(invalid("noise", format!("sigmoid scale must be positive, got {scale}")))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for NoiseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseSpec::Clean => write!(f, "clean"),
            NoiseSpec::Rcn(eta) => write!(f, "rcn:{eta}"),
            NoiseSpec::StrongRcnHalf => write!(f, "strong-rcn-half"),
            NoiseSpec::Massart(MassartProfile::Constant(eta)) => write!(f, "massart:constant:{eta}"),
            NoiseSpec::Massart(MassartProfile::MarginBand { eta, width }) => {
                write!(f, "massart:margin-band:{eta}:{width}")
            }
            NoiseSpec::Massart(MassartProfile::MarginSigmoid { eta, scale }) => {
                write!(f, "massart:margin-sigmoid:{eta}:{scale}")
            }
        }
    }
}

fn parse_number(name: &'static str, s: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| invalid(name, format!("`{s}` is not a number")))
}

impl FromStr for NoiseSpec {
    type Err = Error;

    /// `clean`, `rcn:η`, `strong-rcn-half`, `massart:constant:η`,
    /// `massart:margin-band:η:w` or `massart:margin-sigmoid:η:s`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let n = |p: &str| parse_number("noise", p);
        let spec = match parts.as_slice() {
            ["clean"] => NoiseSpec::Clean,
            ["rcn", eta] => NoiseSpec::Rcn(n(eta)?),
            ["strong-rcn-half"] => NoiseSpec::StrongRcnHalf,
            ["massart", "constant", eta] => NoiseSpec::Massart(MassartProfile::Constant(n(eta)?)),
            ["massart", "margin-band", eta, width] => NoiseSpec::Massart(MassartProfile::MarginBand {
                eta: n(eta)?,
                width: n(width)?,
            }),
            ["massart", "margin-sigmoid", eta, scale] => NoiseSpec::Massart(MassartProfile::MarginSigmoid {
                eta: n(eta)?,
                scale: n(scale)?,
            }),
            _ => return Err(invalid("noise", format!("unrecognized noise spec `{s}`"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Distribution of the features. Every non-Gaussian kind has zero mean and
/// identity covariance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MarginalSpec {
    Gaussian,
    /// Independent uniform coordinates on `[-√3, √3]`.
    UniformCube,
    /// Independent Student-t coordinates with `ν > 2` degrees of freedom,
    /// scaled by `√((ν-2)/ν)`.
    StudentT(f64),
    /// Equal mixture of two Gaussians centred at `±offset·1/√d`, rescaled along
    /// that axis to unit variance.
    GaussianMixture(f64),
}

impl MarginalSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            MarginalSpec::StudentT(nu) if !(nu > 2.0 && nu.is_finite()) => {
                Err(invalid("marginal", format!("student-t needs ν > 2, got {nu}")))
            }
            MarginalSpec::GaussianMixture(o) if !o.is_finite() => {
                Err(invalid("marginal", "mixture offset must be finite"))
            }
            _ => Ok(()),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, d: usize, rng: &mut R) -> Vec<f64> {
        match *self {
            MarginalSpec::Gaussian => (0..d).map(|_| rng.sample(StandardNormal)).collect(),
            MarginalSpec::UniformCube => {
                let r = 3f64.sqrt();
                (0..d).map(|_| rng.random_range(-r..r)).collect()
            }
            MarginalSpec::StudentT(nu) => {
                let t = StudentT::new(nu).expect("validated degrees of freedom");
                let scale = ((nu - 2.0) / nu).sqrt();
                (0..d).map(|_| t.sample(rng) * scale).collect()
            }
            MarginalSpec::GaussianMixture(offset) => {
                let mut z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                let u = 1.0 / (d as f64).sqrt();
                let along: f64 = z.iter().sum::<f64>() * u;
                let shift = if rng.random_bool(0.5) { offset } else { -offset };
                let target = (along + shift) / (1.0 + offset * offset).sqrt();
                for zi in &mut z {
                    *zi += (target - along) * u;
                }
                z
            }
        }
    }
}

impl fmt::Display for MarginalSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MarginalSpec::Gaussian => write!(f, "gaussian"),
            MarginalSpec::UniformCube => write!(f, "uniform-cube"),
            MarginalSpec::StudentT(nu) => write!(f, "student-t:{nu}"),
            MarginalSpec::GaussianMixture(o) => write!(f, "gaussian-mixture:{o}"),
        }
    }
}

impl FromStr for MarginalSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let spec = match parts.as_slice() {
            ["gaussian"] => MarginalSpec::Gaussian,
            ["uniform-cube"] => MarginalSpec::UniformCube,
            ["student-t", nu] => MarginalSpec::StudentT(parse_number("marginal", nu)?),
            ["gaussian-mixture", o] => MarginalSpec::GaussianMixture(parse_number("marginal", o)?),
            _ => return Err(invalid("marginal", format!("unrecognized marginal `{s}`"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

macro_rules! serde_via_string {
    ($t:ty) => {
        impl Serialize for $t {
            fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
                serializer.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $t {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
                let s = String::deserialize(deserializer)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

serde_via_string!(NoiseSpec);
serde_via_string!(MarginalSpec);

/// How a synthetic dataset was produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "kebab-case")]
pub enum Provenance {
    Oracle {
        marginal: MarginalSpec,
        noise: NoiseSpec,
        v_star: Direction,
        n: usize,
        seed: u64,
    },
    MarginCluster {
        v: Direction,
        n: usize,
        rho: f64,
        eps: f64,
        planted: usize,
        seed: u64,
    },
}

/// `N` points with `±1` labels.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    points: PointSet,
    labels: Vec<i8>,
    provenance: Option<Provenance>,
}

impl LabeledDataset {
    pub fn new(points: PointSet, labels: Vec<i8>) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(invalid(
                "labels",
                format!("{} labels for {} points", labels.len(), points.len()),
            ));
        }
        if let Some(bad) = labels.iter().find(|&&y| y != 1 && y != -1) {
            return Err(invalid("labels", format!("label {bad} is not ±1")));
        }
        Ok(LabeledDataset {
            points,
            labels,
            provenance: None,
        })
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = Some(provenance);
        self
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.points.get(i)
    }

    pub fn label(&self, i: usize) -> i8 {
        self.labels[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], i8)> {
        self.points.iter().zip(self.labels.iter().copied())
    }

    /// Indices `i` with `y_i ≠ sign(v·x_i)`.
    pub fn mistakes(&self, v: &Direction) -> Vec<usize> {
        self.iter()
            .enumerate()
            .filter(|(_, (x, y))| v.classify(x) != *y)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn mistake_count(&self, v: &Direction) -> usize {
        self.iter().filter(|(x, y)| v.classify(x) != *y).count()
    }

    /// Empirical 0-1 error of `sign(v·x)`.
    pub fn error_of(&self, v: &Direction) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.mistake_count(v) as f64 / self.len() as f64
    }

    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            points: self.points.subset(indices.iter().copied()),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            provenance: None,
        }
    }

    /// The first `⌊fraction·N⌋` examples and the rest.
    pub fn split(&self, fraction: f64) -> (LabeledDataset, LabeledDataset) {
        let cut = ((fraction * self.len() as f64).floor() as usize).min(self.len());
        let head: Vec<usize> = (0..cut).collect();
        let tail: Vec<usize> = (cut..self.len()).collect();
        (self.subset(&head), self.subset(&tail))
    }

    pub fn with_labels_negated(&self) -> LabeledDataset {
        LabeledDataset {
            points: self.points.clone(),
            labels: self.labels.iter().map(|y| -y).collect(),
            provenance: None,
        }
    }

    /// Header `d,N`, then one row per example: the features in 17 significant
    /// digits followed by `+1` or `-1`.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{},{}\n", self.dim(), self.len());
        for (x, y) in self.iter() {
            for c in x {
                out.push_str(&format!("{c:.16e},"));
            }
            out.push_str(if y > 0 { "+1\n" } else { "-1\n" });
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let parse_err = |line: usize, message: String| Error::Parse { line, message };
        let (_, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "missing `d,N` header".into()))?;
        let fields: Vec<&str> = header.trim().split(',').collect();
        let [d, n] = fields.as_slice() else {
            return Err(parse_err(1, format!("expected header `d,N`, found `{header}`")));
        };
        let d: usize = d
            .trim()
            .parse()
            .map_err(|_| parse_err(1, format!("bad dimension `{d}`")))?;
        let n: usize = n
            .trim()
            .parse()
            .map_err(|_| parse_err(1, format!("bad row count `{n}`")))?;
        if d == 0 {
            return Err(parse_err(1, "dimension must be at least 1".into()));
        }
        let mut coords = Vec::with_capacity(d * n);
        let mut labels = Vec::with_capacity(n);
        let mut last_line = 1;
        for (line, row) in lines {
            last_line = line;
            if row.trim().is_empty() {
                continue;
            }
            if labels.len() == n {
                return Err(parse_err(
                    line,
                    format!("more than the {n} rows declared in the header"),
                ));
            }
            let fields: Vec<&str> = row.trim().split(',').collect();
            if fields.len() != d + 1 {
                return Err(parse_err(
                    line,
                    format!("expected {} fields, found {}", d + 1, fields.len()),
                ));
            }
            for f in &fields[..d] {
                let value: f64 = f
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(line, format!("bad feature value `{f}`")))?;
                if !value.is_finite() {
                    return Err(parse_err(line, format!("non-finite feature value `{f}`")));
                }
                coords.push(value);
            }
            let label = match fields[d].trim() {
                "+1" | "1" => 1,
                "-1" => -1,
                other => return Err(parse_err(line, format!("label `{other}` is not +1 or -1"))),
            };
            labels.push(label);
        }
        if labels.len() != n {
            return Err(parse_err(
                last_line + 1,
                format!("header declares {n} rows but only {} were found", labels.len()),
            ));
        }
        let points = PointSet::from_flat(d, coords)?;
        LabeledDataset::new(points, labels)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        LabeledDataset::from_csv(&fs::read_to_string(path)?)
    }

    /// Writes the provenance (or `null`) as JSON.
    pub fn write_provenance(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(&self.provenance).map_err(|e| Error::Io(e.to_string()))?;
        fs::write(path, json + "\n")?;
        Ok(())
    }
}

/// `N` i.i.d. examples: `x` from `marginal`, clean label `sign(v*·x)`,
/// flipped independently with probability `η(x)`.
pub fn sample_dataset(
    marginal: &MarginalSpec,
    v_star: &Direction,
    noise: &NoiseSpec,
    n: usize,
    seed: u64,
) -> Result<LabeledDataset> {
    marginal.validate()?;
    noise.validate()?;
    if n == 0 {
        return Err(invalid("n", "need at least one example"));
    }
    let d = v_star.dim();
    let mut rng = rng_from_seed(seed);
    let mut coords = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x = marginal.sample(d, &mut rng);
        let t = v_star.dot(&x);
        let flip = rng.random::<f64>() < noise.flip_probability(t);
        labels.push(if flip { -sign(t) } else { sign(t) });
        coords.extend_from_slice(&x);
    }
    Ok(
        LabeledDataset::new(PointSet::from_flat(d, coords)?, labels)?.with_provenance(Provenance::Oracle {
            marginal: *marginal,
            noise: *noise,
            v_star: v_star.clone(),
            n,
            seed,
        }),
    )
}

/// Half-width of the near-margin cone `|∠(x, v) - π/2| ≤ ε^{3/2}/√(d-1)`.
pub fn margin_cone_width(eps: f64, d: usize) -> f64 {
    eps.powf(1.5) / ((d as f64) - 1.0).sqrt()
}

/// Clean Gaussian data along `v` with `⌈ρN⌉` mislabeled points planted inside
/// the near-margin cone, at uniformly random positions in the dataset.
pub fn adversarial_margin_cluster(v: &Direction, n: usize, rho: f64, eps: f64, seed: u64) -> Result<LabeledDataset> {
    let d = v.dim();
    if d < 2 {
        return Err(invalid("d", "the margin cone needs d >= 2"));
    }
    if !(0.0..1.0).contains(&rho) {
        return Err(invalid("rho", format!("must lie in [0, 1), got {rho}")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid("eps", format!("must lie in (0, 1), got {eps}")));
    }
    if n == 0 {
        return Err(invalid("n", "need at least one example"));
    }
    let planted = ((rho * n as f64).ceil() as usize).min(n);
    let half = margin_cone_width(eps, d) / 2.0;
    let mut rng = rng_from_seed(seed);
    let mut rows: Vec<(Vec<f64>, i8)> = Vec::with_capacity(n);
    while rows.len() < planted {
        let g = MarginalSpec::Gaussian.sample(d, &mut rng);
        let t = v.dot(&g);
        let mut x: Vec<f64> = g.iter().zip(v.as_slice()).map(|(gi, vi)| gi - t * vi).collect();
        let r = norm(&x);
        if r < 1e-6 {
            continue;
        }
        let theta = rng.random_range(-half..=half);
        let along = r * theta.tan();
        for (xi, vi) in x.iter_mut().zip(v.as_slice()) {
            *xi += along * vi;
        }
        let y = -v.classify(&x);
        rows.push((x, y));
    }
    for _ in planted..n {
        let x = MarginalSpec::Gaussian.sample(d, &mut rng);
        let y = v.classify(&x);
        rows.push((x, y));
    }
    rows.shuffle(&mut rng);
    let mut coords = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for (x, y) in rows {
        coords.extend(x);
        labels.push(y);
    }
    Ok(
        LabeledDataset::new(PointSet::from_flat(d, coords)?, labels)?.with_provenance(Provenance::MarginCluster {
            v: v.clone(),
            n,
            rho,
            eps,
            planted,
            seed,
        }),
    )
}

/// Whether `x` lies in the closed cone `|∠(x, v) - π/2| ≤ width`.
pub fn in_margin_cone(v: &Direction, x: &[f64], width: f64) -> bool {
    (angle_to_point(v, x) - std::f64::consts::FRAC_PI_2).abs() <= width
}
