//! Mixture data model and seeded sampling.
//!
//! A mixture is k0 identical spherical Gaussians: component l has mean
//! `centers[l]` and covariance sigma^2 I, and is drawn with probability
//! `weights[l]`. Samples carry optional component labels for test oracles;
//! learning code never reads them.

use crate::error::{Error, Result};
use crate::rng::stream_rng;
use rand::distributions::{Distribution, WeightedIndex};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Ground-truth (or hypothesis) mixture of identical spherical Gaussians.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureParams {
    /// Ambient dimension.
    pub d: usize,
    /// Component means, one point of length `d` per component.
    pub centers: Vec<Vec<f64>>,
    /// Component probabilities; positive, summing to 1.
    pub weights: Vec<f64>,
    /// Common standard deviation of every component.
    #[serde(default = "default_sigma")]
    pub sigma: f64,
}

fn default_sigma() -> f64 {
    1.0
}

impl MixtureParams {
    pub fn new(d: usize, centers: Vec<Vec<f64>>, weights: Vec<f64>, sigma: f64) -> Result<Self> {
        let p = MixtureParams {
            d,
            centers,
            weights,
            sigma,
        };
        p.validate()?;
        Ok(p)
    }

    /// Number of components.
    pub fn k0(&self) -> usize {
        self.centers.len()
    }

    /// Smallest component weight.
    pub fn w_min(&self) -> f64 {
        self.weights.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::InvalidParams("dimension must be >= 1".into()));
        }
        if self.centers.is_empty() {
            return Err(Error::InvalidParams("need at least one center".into()));
        }
        if self.centers.len() != self.weights.len() {
            return Err(Error::InvalidParams(format!(
                "{} centers but {} weights",
                self.centers.len(),
                self.weights.len()
            )));
        }
        for (i, c) in self.centers.iter().enumerate() {
            if c.len() != self.d {
                return Err(Error::InvalidParams(format!(
                    "center {} has dimension {}, expected {}",
                    i,
                    c.len(),
                    self.d
                )));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParams(format!("center {i} not finite")));
            }
        }
        for i in 0..self.centers.len() {
            for j in (i + 1)..self.centers.len() {
                if self.centers[i] == self.centers[j] {
                    return Err(Error::InvalidParams(format!(
                        "centers {i} and {j} coincide"
                    )));
                }
            }
        }
        if self.weights.iter().any(|&w| !w.is_finite() || w <= 0.0) {
            return Err(Error::InvalidParams("weights must be positive".into()));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParams(format!(
                "weights sum to {sum}, expected 1 within 1e-12"
            )));
        }
        if !self.sigma.is_finite() || self.sigma <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("mixture params serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: MixtureParams =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }
}

/// n samples in R^d, with the seed that produced them and (for simulation
/// only) the hidden component labels.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    pub points: Vec<Vec<f64>>,
    pub labels: Option<Vec<usize>>,
    pub seed: u64,
}

impl SampleSet {
    pub fn new(points: Vec<Vec<f64>>, labels: Option<Vec<usize>>, seed: u64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParams("sample set must be nonempty".into()));
        }
        let d = points[0].len();
        if d == 0 || points.iter().any(|p| p.len() != d) {
            return Err(Error::InvalidParams("inconsistent point dimensions".into()));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("samples must be finite".into()));
        }
        if let Some(ref l) = labels {
            if l.len() != points.len() {
                return Err(Error::InvalidParams("label count != point count".into()));
            }
        }
        Ok(SampleSet {
            points,
            labels,
            seed,
        })
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn d(&self) -> usize {
        self.points[0].len()
    }

    /// One row per point: d coordinates, then the label if present.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (i, p) in self.points.iter().enumerate() {
            let coords: Vec<String> = p.iter().map(|v| format!("{v}")).collect();
            out.push_str(&coords.join(","));
            if let Some(ref l) = self.labels {
                out.push_str(&format!(",{}", l[i]));
            }
            out.push('\n');
        }
        out
    }

    /// Parse rows of `d` coordinates with an optional trailing label column.
    pub fn from_csv(text: &str, d: usize, seed: u64) -> Result<Self> {
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != d && fields.len() != d + 1 {
                return Err(Error::Parse(format!(
                    "line {}: {} fields, expected {} or {}",
                    lineno + 1,
                    fields.len(),
                    d,
                    d + 1
                )));
            }
            let coords: Vec<f64> = fields[..d]
                .iter()
                .map(|f| {
                    f.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
                })
                .collect::<Result<_>>()?;
            if fields.len() == d + 1 {
                labels.push(
                    fields[d]
                        .trim()
                        .parse::<usize>()
                        .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?,
                );
            }
            points.push(coords);
        }
        let labels = if labels.is_empty() {
            None
        } else if labels.len() == points.len() {
            Some(labels)
        } else {
            return Err(Error::Parse(
                "label column present on only some rows".into(),
            ));
        };
        SampleSet::new(points, labels, seed)
    }
}

/// Draw `n` i.i.d. samples: pick component l with probability w_l, then add
/// sigma times a standard normal vector to y_l. Labels are recorded.
/// Deterministic given the seed.
pub fn sample_mixture(params: &MixtureParams, n: usize, seed: u64) -> Result<SampleSet> {
    params.validate()?;
    if n == 0 {
        return Err(Error::InvalidParams("need n >= 1 samples".into()));
    }
    let mut rng = stream_rng(seed, 0);
    let comp_dist = WeightedIndex::new(&params.weights)
        .map_err(|e| Error::InvalidParams(format!("bad weights: {e}")))?;
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let l = comp_dist.sample(&mut rng);
        let mut p = params.centers[l].clone();
        for v in p.iter_mut() {
            let g: f64 = StandardNormal.sample(&mut rng);
            *v += params.sigma * g;
        }
        points.push(p);
        labels.push(l);
    }
    Ok(SampleSet {
        points,
        labels: Some(labels),
        seed,
    })
}
