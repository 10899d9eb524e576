//! Experiment configuration, seeded batch execution, and report emission.
//!
//! An experiment draws one mixture (explicit or generated), runs
//! `learn_mixture` over seeded trials, and collects per-trial records that
//! serialize to JSON (full document) or CSV (`trial,stage,metric,value`
//! rows). Theory mode skips execution and reports reference budgets only.

use crate::config::{ConstantsConfig, SeparationSpec};
use crate::deconv::{draw_frequencies, exact_smoothed, oracle_eval, theory_budgets, DeconvKernel};
use crate::error::{Error, Result};
use crate::metrics::{hausdorff, min_separation};
use crate::model::{sample_mixture, MixtureParams, SampleSet};
use crate::pipeline::{learn_mixture, LearnConfig};
use crate::rng::{stream_id, stream_rng};
use crate::spikes::{LatticeScale, SeedMode};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Whether to execute trials or only report reference budgets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Report the analysis-grade budgets; they are far too large to run.
    Theory,
    /// Run the desk-scale budgets.
    Practice,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theory" => Ok(Mode::Theory),
            "practice" => Ok(Mode::Practice),
            other => Err(Error::Parse(format!(
                "unknown mode `{other}`, expected `theory` or `practice`"
            ))),
        }
    }
}

/// How generated mixtures assign component weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    /// Every component gets 1/k0.
    Uniform,
    /// Caller-supplied weights, one per component.
    Explicit(Vec<f64>),
}

/// Deterministic mixture generator: centers at pairwise distance
/// `separation_multiplier * sqrt(d) * sigma`, randomly rotated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    /// Ambient dimension.
    pub d: usize,
    /// Component count.
    pub k0: usize,
    /// Pairwise separation in units of sqrt(d) * sigma.
    pub separation_multiplier: f64,
    /// Component weight assignment.
    pub weights: WeightScheme,
    /// Common standard deviation.
    pub sigma: f64,
}

/// Mixture input: fixed parameters or a seeded generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixtureSource {
    /// Use these parameters in every trial.
    Explicit(MixtureParams),
    /// Build parameters from the generator under the master seed.
    Generator(GeneratorSpec),
}

/// A seeded random rotation of R^d (QR of a Gaussian matrix, signs fixed).
fn random_rotation(d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = stream_rng(seed, 4);
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            for i in 0..d {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: String| {
            Err(Error::InvalidConfig {
                field: field.into(),
                reason,
            })
        };
        if self.d == 0 {
            return bad("generator.d", "dimension must be >= 1".into());
        }
        if self.k0 == 0 {
            return bad("generator.k0", "need at least one component".into());
        }
        if !self.separation_multiplier.is_finite() || self.separation_multiplier <= 0.0 {
            return bad(
                "generator.separation_multiplier",
                format!("must be positive, got {}", self.separation_multiplier),
            );
        }
        if !self.sigma.is_finite() || self.sigma <= 0.0 {
            return bad(
                "generator.sigma",
                format!("must be positive, got {}", self.sigma),
            );
        }
        if let WeightScheme::Explicit(w) = &self.weights {
            if w.len() != self.k0 {
                return bad(
                    "generator.weights",
                    format!("{} weights for k0 = {}", w.len(), self.k0),
                );
            }
        }
        Ok(())
    }

    /// Builds the mixture: a line (d = 1), a scaled simplex (k0 <= d), or a
    /// circle in the first two coordinates (k0 > d >= 2), rotated randomly.
    pub fn build(&self, seed: u64) -> Result<MixtureParams> {
        self.validate()?;
        let d = self.d;
        let k0 = self.k0;
        let sep = self.separation_multiplier * (d as f64).sqrt() * self.sigma;
        let mut centers: Vec<Vec<f64>> = if k0 == 1 {
            vec![vec![0.0; d]]
        } else if d == 1 {
            (0..k0)
                .map(|l| vec![(l as f64 - (k0 as f64 - 1.0) / 2.0) * sep])
                .collect()
        } else if k0 <= d {
            let scale = sep / 2.0_f64.sqrt();
            (0..k0)
                .map(|l| {
                    let mut c = vec![0.0; d];
                    c[l] = scale;
                    c
                })
                .collect()
        } else {
            let radius = sep / (2.0 * (std::f64::consts::PI / k0 as f64).sin());
            (0..k0)
                .map(|l| {
                    let angle = 2.0 * std::f64::consts::PI * l as f64 / k0 as f64;
                    let mut c = vec![0.0; d];
                    c[0] = radius * angle.cos();
                    c[1] = radius * angle.sin();
                    c
                })
                .collect()
        };
        if d >= 2 && k0 >= 2 {
            let q = random_rotation(d, seed);
            centers = centers
                .iter()
                .map(|c| {
                    (0..d)
                        .map(|i| (0..d).map(|j| q[(i, j)] * c[j]).sum())
                        .collect()
                })
                .collect();
        }
        let weights = match &self.weights {
            WeightScheme::Uniform => vec![1.0 / k0 as f64; k0],
            WeightScheme::Explicit(w) => w.clone(),
        };
        MixtureParams::new(d, centers, weights, self.sigma)
    }
}

impl MixtureSource {
    /// The mixture the experiment will sample from.
    pub fn instantiate(&self, seed: u64) -> Result<MixtureParams> {
        match self {
            MixtureSource::Explicit(p) => {
                p.validate()?;
                Ok(p.clone())
            }
            MixtureSource::Generator(g) => g.build(seed),
        }
    }
}

/// One experiment: a mixture, desk budgets, and a trial count. The success
/// threshold is delta = constants.delta_acc * sqrt(d) * sigma.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Mixture to draw per trial.
    pub mixture: MixtureSource,
    /// Samples per trial.
    pub n: usize,
    /// Seeded trials to run.
    pub trials: usize,
    /// theory (budgets only) or practice (execute).
    pub mode: Mode,
    /// Constant family; c3_2 also sets the deconvolution width.
    pub constants: ConstantsConfig,
    /// Lattice granularity.
    pub scale: LatticeScale,
    /// Spike-search seed source.
    pub seed_mode: SeedMode,
    /// Oracle frequencies per draw.
    pub m: usize,
    /// Frequencies for augmented subproblems (0 means reuse `m`).
    #[serde(default)]
    pub m_aug: usize,
    /// Spike-search runs aggregated per consensus.
    pub boost_runs: usize,
    /// Runs per augmented subproblem (0 means reuse `boost_runs`).
    #[serde(default)]
    pub aug_runs: usize,
    /// EM iterations of the final polish.
    pub refine_iters: usize,
    /// Maximization anchors per subproblem (0 means every sample).
    #[serde(default)]
    pub anchor_budget: usize,
    /// Maximizer value tolerance in the log domain.
    pub eps: f64,
    /// Lattice enumeration cap.
    pub lattice_cap: u64,
    /// Enforce the acceptance-grade separation floor (multiplier >= 2).
    #[serde(default)]
    pub acceptance: bool,
    /// Master seed; every trial stream derives from it.
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: String| {
            Err(Error::InvalidConfig {
                field: field.into(),
                reason,
            })
        };
        if self.n == 0 {
            return bad("experiment.n", "need at least one sample".into());
        }
        if self.trials == 0 {
            return bad("experiment.trials", "need at least one trial".into());
        }
        if self.m == 0 {
            return bad("experiment.m", "need at least one frequency".into());
        }
        if self.boost_runs == 0 {
            return bad("experiment.boost_runs", "need at least one run".into());
        }
        if self.refine_iters == 0 {
            return bad(
                "experiment.refine_iters",
                "need at least one iteration".into(),
            );
        }
        if !self.eps.is_finite() || self.eps <= 0.0 {
            return bad("experiment.eps", format!("need eps > 0, got {}", self.eps));
        }
        if self.lattice_cap == 0 {
            return bad("experiment.lattice_cap", "cap must be positive".into());
        }
        if let MixtureSource::Generator(g) = &self.mixture {
            g.validate()?;
            if self.acceptance && g.separation_multiplier < 2.0 {
                return bad(
                    "generator.separation_multiplier",
                    format!(
                        "acceptance runs need a multiplier >= 2, got {}",
                        g.separation_multiplier
                    ),
                );
            }
        }
        self.constants.validate()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("experiment config serialize")
    }

    /// Per-trial learner settings derived from the mixture and budgets.
    fn learn_config(&self, params: &MixtureParams, seed: u64) -> Result<LearnConfig> {
        let delta_big = match &self.mixture {
            MixtureSource::Generator(g) => g.separation_multiplier,
            MixtureSource::Explicit(p) => {
                if p.k0() >= 2 {
                    min_separation(&p.centers)? / (p.sigma * (p.d as f64).sqrt())
                } else {
                    2.0
                }
            }
        };
        Ok(LearnConfig {
            k: params.k0().max(2),
            w_min: params.w_min(),
            sigma: params.sigma,
            separation: SeparationSpec::new(delta_big, self.constants.c3_2)?,
            constants: self.constants,
            scale: self.scale,
            seed_mode: self.seed_mode,
            m: self.m,
            m_aug: self.m_aug,
            boost_runs: self.boost_runs,
            aug_runs: self.aug_runs,
            refine_iters: self.refine_iters,
            anchor_budget: self.anchor_budget,
            eps: self.eps,
            lattice_cap: self.lattice_cap,
            seed,
        })
    }
}

/// One `trial,stage,metric,value` row of a report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    /// Zero-based trial index.
    pub trial: usize,
    /// Harness stage that produced the metric.
    pub stage: String,
    /// Metric name.
    pub metric: String,
    /// Metric value; indicators use 0/1.
    pub value: f64,
}

/// Full experiment output: config echo, per-trial records, and budgets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    /// Exact configuration the batch ran with.
    pub config: ExperimentConfig,
    /// Hash of the canonical config serialization.
    pub config_hash: String,
    /// Success threshold delta the indicator used.
    pub delta: f64,
    /// One record per (trial, stage, metric).
    pub records: Vec<StageRecord>,
    /// Per-trial failures; recorded, not fatal.
    pub errors: Vec<String>,
    /// Fraction of evaluated trials with Hausdorff error <= delta.
    pub success_rate: f64,
    /// Theory-scale frequency budget, as a decimal string.
    pub theory_m: String,
    /// Theory-scale sample budget, as a decimal string.
    pub theory_n: String,
}

/// FNV-1a over the canonical JSON of the config: stable across field
/// orderings in the input file and across machines.
pub fn config_hash(config: &ExperimentConfig) -> String {
    let canonical = serde_json::to_string(config).expect("config serialize");
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in canonical.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{hash:016x}")
}

fn wall_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Runs the batch. Practice mode executes every trial and records
/// sample/learn timings, the consensus cardinality, frame retries, the
/// Hausdorff error, and the success indicator; failed trials count as
/// unsuccessful and add an error string instead of aborting the batch.
/// Theory mode records nothing and only fills the reference budgets.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Report> {
    config.validate()?;
    let params = config.mixture.instantiate(config.seed)?;
    let delta = config.constants.delta_acc * (params.d as f64).sqrt() * params.sigma;
    let k_bound = params.k0().max(2);
    let (theory_m, theory_n) = theory_budgets(k_bound, &config.constants)?;
    let mut records = Vec::new();
    let mut errors = Vec::new();
    let mut evaluated = 0usize;
    let mut successes = 0usize;
    if config.mode == Mode::Practice {
        for trial in 0..config.trials {
            let row = |stage: &str, metric: &str, value: f64| StageRecord {
                trial,
                stage: stage.into(),
                metric: metric.into(),
                value,
            };
            let start = Instant::now();
            let samples = sample_mixture(
                &params,
                config.n,
                stream_id(&[config.seed, trial as u64, 1]),
            )?;
            records.push(row("sample", "wall_ms", wall_ms(start)));
            let lc = config.learn_config(&params, stream_id(&[config.seed, trial as u64, 2]))?;
            let start = Instant::now();
            match learn_mixture(&samples, &lc) {
                Ok(result) => {
                    records.push(row("learn", "wall_ms", wall_ms(start)));
                    records.push(row("learn", "k0", result.centers.len() as f64));
                    let retries: usize = result.components.iter().map(|c| c.frame_attempts).sum();
                    records.push(row("learn", "frame_attempts", retries as f64));
                    let err = hausdorff(&result.centers, &params.centers)?;
                    records.push(row("metrics", "hausdorff", err));
                    let ok = result.centers.len() == params.k0() && err <= delta;
                    records.push(row("metrics", "success", f64::from(u8::from(ok))));
                    evaluated += 1;
                    successes += usize::from(ok);
                }
                Err(e) => {
                    records.push(row("learn", "failed", 1.0));
                    records.push(row("metrics", "success", 0.0));
                    evaluated += 1;
                    errors.push(format!("trial {trial}: {e}"));
                }
            }
        }
    }
    let success_rate = if evaluated > 0 {
        successes as f64 / evaluated as f64
    } else {
        0.0
    };
    Ok(Report {
        config: config.clone(),
        config_hash: config_hash(config),
        delta,
        records,
        errors,
        success_rate,
        theory_m: theory_m.to_string(),
        theory_n: theory_n.to_string(),
    })
}

/// Oracle probe output: grid points with estimated and exact values.
#[derive(Clone, Debug, Serialize)]
pub struct OracleProbe {
    /// Grid points, in rescaled (unit sigma) coordinates.
    pub points: Vec<Vec<f64>>,
    /// Monte-Carlo deconvolution estimates at each point.
    pub estimate: Vec<f64>,
    /// Exact smoothed density of the true centers at each point.
    pub exact: Vec<f64>,
}

/// Debug probe: evaluates the Monte-Carlo deconvolution oracle on a grid
/// along the segment through the two farthest centers (or +-3 sqrt(d)
/// around a single center), next to the exact smoothed density.
pub fn probe_oracle(config: &ExperimentConfig, grid: usize) -> Result<OracleProbe> {
    config.validate()?;
    if grid < 2 {
        return Err(Error::Domain(format!("grid needs >= 2 points, got {grid}")));
    }
    let params = config.mixture.instantiate(config.seed)?;
    let samples = sample_mixture(&params, config.n, stream_id(&[config.seed, 0, 1]))?;
    let lc = config.learn_config(&params, 0)?;
    let d = params.d;
    let inv = 1.0 / params.sigma;
    let centers: Vec<Vec<f64>> = params
        .centers
        .iter()
        .map(|c| c.iter().map(|v| v * inv).collect())
        .collect();
    let scaled_points: Vec<Vec<f64>> = samples
        .points
        .iter()
        .map(|p| p.iter().map(|v| v * inv).collect())
        .collect();
    let scaled = SampleSet::new(scaled_points, None, samples.seed)?;
    let truth = MixtureParams::new(d, centers.clone(), params.weights.clone(), 1.0)?;
    let kernel = DeconvKernel::new(d, lc.separation.delta_bar, lc.k, config.constants.c3_5)?;
    let draw = draw_frequencies(&kernel, &scaled, config.m, stream_id(&[config.seed, 0, 2]))?;
    let (a, b) = if params.k0() >= 2 {
        let mut best = (0, 1, 0.0);
        for i in 0..centers.len() {
            for j in i + 1..centers.len() {
                let d2: f64 = centers[i]
                    .iter()
                    .zip(&centers[j])
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum();
                if d2 > best.2 {
                    best = (i, j, d2);
                }
            }
        }
        (centers[best.0].clone(), centers[best.1].clone())
    } else {
        let reach = 3.0 * (d as f64).sqrt();
        let mut a = centers[0].clone();
        let mut b = centers[0].clone();
        a[0] -= reach;
        b[0] += reach;
        (a, b)
    };
    let mut points = Vec::with_capacity(grid);
    let mut estimate = Vec::with_capacity(grid);
    let mut exact = Vec::with_capacity(grid);
    for g in 0..grid {
        let t = g as f64 / (grid - 1) as f64;
        let x: Vec<f64> = a.iter().zip(&b).map(|(u, v)| u + t * (v - u)).collect();
        estimate.push(oracle_eval(&draw, &kernel, &x).value);
        exact.push(exact_smoothed(&truth, lc.separation.delta_bar, &x));
        points.push(x);
    }
    Ok(OracleProbe {
        points,
        estimate,
        exact,
    })
}

/// Report serialization target.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::Parse(format!(
                "unknown format `{other}`, expected csv or json"
            ))),
        }
    }
}

/// The CSV view: a `trial,stage,metric,value` header plus one row per record.
pub fn report_to_csv(report: &Report) -> String {
    let mut out = String::from("trial,stage,metric,value\n");
    for r in &report.records {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.trial, r.stage, r.metric, r.value
        ));
    }
    out
}

/// The JSON view; parse and re-emit reproduce the bytes exactly.
pub fn report_to_json(report: &Report) -> String {
    serde_json::to_string_pretty(report).expect("report serialize")
}

/// Writes the report to `path` in the chosen format.
pub fn emit_report(report: &Report, format: ReportFormat, path: &std::path::Path) -> Result<()> {
    let text = match format {
        ReportFormat::Csv => report_to_csv(report),
        ReportFormat::Json => report_to_json(report),
    };
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}
