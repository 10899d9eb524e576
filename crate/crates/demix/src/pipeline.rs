//! Consensus across spike-search runs, fixed-parameter EM polish, and the
//! end-to-end center recovery pipeline.
//!
//! `learn_mixture` chains the stages: rescale by the known sigma, split
//! far-apart sample clusters, then per cluster PCA down to k dimensions,
//! random projection, spike search with consensus, coordinate patch-up,
//! and an EM polish back in the original space. Weights and sigma are
//! inputs, not estimands; only centers are recovered.

use crate::config::{ConstantsConfig, SeparationSpec};
use crate::deconv::{theory_budgets, DeconvKernel};
use crate::error::{Error, Result};
use crate::metrics::{dist2, hausdorff};
use crate::model::SampleSet;
use crate::preprocess::{coverage_sample_size, pca_reduce, proximity_threshold, split_clusters};
use crate::projection::{patch_centers, project, random_frame, reduced_dim, ProjectionFrame};
use crate::rng::stream_id;
use crate::spikes::{find_spikes, FindSpikesConfig, LatticeScale, OracleSource, SeedMode};
use serde::{Deserialize, Serialize};

/// Counters from one spike-search run, echoed through reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunDiagnostics {
    /// Seeds enumerated.
    pub seeds: usize,
    /// Seeds that reached the maximizer (the rest were pruned by value).
    pub maximized: usize,
    /// Filter survivors before dedup.
    pub survivors: usize,
    /// Zero-based spike-search attempt that produced the run.
    pub attempt: usize,
}

/// One consensus unit: the deduplicated centers of a single spike-search
/// run plus its identity and counters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    /// Candidate centers; nonempty for a successful run.
    pub centers: Vec<Vec<f64>>,
    /// Position in the run sequence; ties break toward the smallest.
    pub run_id: usize,
    /// Search counters for reports.
    pub diagnostics: RunDiagnostics,
}

/// Default consensus agreement tolerance, delta * sqrt(dbar) / k^c4_6.
pub fn boost_tolerance(sep: &SeparationSpec, dbar: usize, k: usize, c4_6: f64) -> f64 {
    sep.delta_big * (dbar as f64).sqrt() / (k as f64).powf(c4_6)
}

/// Majority vote across runs. Takes the lower median k0 of the run
/// cardinalities, then returns the centers of the first run (in `run_id`
/// order) with exactly k0 centers whose Hausdorff distance to at least
/// half of all runs is within `tol`.
pub fn boost(runs: &[RunOutput], tol: f64) -> Result<Vec<Vec<f64>>> {
    if runs.is_empty() {
        return Err(Error::Domain("consensus needs at least one run".into()));
    }
    if !tol.is_finite() || tol <= 0.0 {
        return Err(Error::Domain(format!(
            "consensus tol must be positive, got {tol}"
        )));
    }
    for r in runs {
        if r.centers.is_empty() {
            return Err(Error::Domain(format!("run {} has no centers", r.run_id)));
        }
    }
    let mut sizes: Vec<usize> = runs.iter().map(|r| r.centers.len()).collect();
    sizes.sort_unstable();
    let k0 = sizes[(sizes.len() - 1) / 2];
    let mut order: Vec<&RunOutput> = runs.iter().collect();
    order.sort_by_key(|r| r.run_id);
    for cand in order.into_iter().filter(|r| r.centers.len() == k0) {
        let agree = runs
            .iter()
            .filter(|o| hausdorff(&cand.centers, &o.centers).is_ok_and(|h| h <= tol))
            .count();
        if 2 * agree >= runs.len() {
            return Ok(cand.centers.clone());
        }
    }
    Err(Error::ConsensusFailure {
        cardinality: k0,
        runs: runs.len(),
    })
}

fn check_model(d: usize, centers: &[Vec<f64>], weights: &[f64], sigma: f64) -> Result<()> {
    if centers.is_empty() {
        return Err(Error::Domain("need at least one center".into()));
    }
    if centers.iter().any(|c| c.len() != d) {
        return Err(Error::Domain("center dimension != sample dimension".into()));
    }
    if weights.len() != centers.len() {
        return Err(Error::Domain(format!(
            "{} weights for {} centers",
            weights.len(),
            centers.len()
        )));
    }
    if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
        return Err(Error::Domain("weights must be positive".into()));
    }
    if !sigma.is_finite() || sigma <= 0.0 {
        return Err(Error::Domain(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    Ok(())
}

/// EM center updates with weights and sigma frozen. Each iteration assigns
/// responsibilities r_jl proportional to w_l * exp(-|x_j - c_l|^2 / (2 sigma^2))
/// and moves every center to its responsibility-weighted sample mean. Errs
/// with `StarvedComponent` when a center's mass falls below 10 eps n.
pub fn refine(
    samples: &SampleSet,
    seeds: &[Vec<f64>],
    weights: &[f64],
    sigma: f64,
    iters: usize,
) -> Result<Vec<Vec<f64>>> {
    let d = samples.d();
    check_model(d, seeds, weights, sigma)?;
    if iters == 0 {
        return Err(Error::Domain("refine needs at least one iteration".into()));
    }
    let n = samples.n();
    let k0 = seeds.len();
    let ln_w: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
    let half_inv = 0.5 / (sigma * sigma);
    let floor = 10.0 * f64::EPSILON * n as f64;
    let mut centers: Vec<Vec<f64>> = seeds.to_vec();
    let mut scores = vec![0.0; k0];
    for _ in 0..iters {
        let mut mass = vec![0.0; k0];
        let mut acc = vec![vec![0.0; d]; k0];
        for x in &samples.points {
            for (s, (lw, c)) in scores.iter_mut().zip(ln_w.iter().zip(&centers)) {
                *s = lw - dist2(x, c) * half_inv;
            }
            let top = scores.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let mut denom = 0.0;
            for s in scores.iter_mut() {
                *s = (*s - top).exp();
                denom += *s;
            }
            for l in 0..k0 {
                let r = scores[l] / denom;
                mass[l] += r;
                for (a, xi) in acc[l].iter_mut().zip(x) {
                    *a += r * xi;
                }
            }
        }
        for (l, c) in centers.iter_mut().enumerate() {
            if mass[l] < floor {
                return Err(Error::StarvedComponent {
                    component: l,
                    mass: mass[l],
                });
            }
            for (ci, ai) in c.iter_mut().zip(&acc[l]) {
                *ci = ai / mass[l];
            }
        }
    }
    Ok(centers)
}

/// Average per-sample negative log-likelihood under an isotropic Gaussian
/// mixture with the given centers, weights, and common sigma.
pub fn mixture_nll(
    samples: &SampleSet,
    centers: &[Vec<f64>],
    weights: &[f64],
    sigma: f64,
) -> Result<f64> {
    let d = samples.d();
    check_model(d, centers, weights, sigma)?;
    let ln_norm = -0.5 * d as f64 * (2.0 * std::f64::consts::PI * sigma * sigma).ln();
    let half_inv = 0.5 / (sigma * sigma);
    let ln_w: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
    let mut total = 0.0;
    for x in &samples.points {
        let scores: Vec<f64> = ln_w
            .iter()
            .zip(centers)
            .map(|(lw, c)| lw - dist2(x, c) * half_inv)
            .collect();
        let top = scores.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let lse = top + scores.iter().map(|s| (s - top).exp()).sum::<f64>().ln();
        total += ln_norm + lse;
    }
    Ok(-total / samples.n() as f64)
}

/// Budgets and scales for `learn_mixture`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LearnConfig {
    /// Component-count upper bound (k >= 2).
    pub k: usize,
    /// Known lower bound on mixture weights.
    pub w_min: f64,
    /// Known common standard deviation of the components.
    pub sigma: f64,
    /// Separation scales in sigma units.
    pub separation: SeparationSpec,
    /// Constant family.
    pub constants: ConstantsConfig,
    /// Lattice granularity for the spike search.
    pub scale: LatticeScale,
    /// Spike-search seed source.
    pub seed_mode: SeedMode,
    /// Monte-Carlo frequencies per oracle draw.
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
    /// Master seed.
    pub seed: u64,
}

impl LearnConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: String| {
            Err(Error::InvalidConfig {
                field: field.into(),
                reason,
            })
        };
        if self.k < 2 {
            return bad("learn.k", format!("need k >= 2, got {}", self.k));
        }
        if !self.w_min.is_finite() || self.w_min <= 0.0 || self.w_min > 1.0 {
            return bad(
                "learn.w_min",
                format!("need 0 < w_min <= 1, got {}", self.w_min),
            );
        }
        if !self.sigma.is_finite() || self.sigma <= 0.0 {
            return bad("learn.sigma", format!("need sigma > 0, got {}", self.sigma));
        }
        if self.m == 0 {
            return bad("learn.m", "need at least one frequency".into());
        }
        if self.boost_runs == 0 {
            return bad("learn.boost_runs", "need at least one run".into());
        }
        if self.refine_iters == 0 {
            return bad("learn.refine_iters", "need at least one iteration".into());
        }
        if !self.eps.is_finite() || self.eps <= 0.0 {
            return bad("learn.eps", format!("need eps > 0, got {}", self.eps));
        }
        if self.lattice_cap == 0 {
            return bad("learn.lattice_cap", "cap must be positive".into());
        }
        self.separation.validate()?;
        self.constants.validate()
    }

    fn aug_m(&self) -> usize {
        if self.m_aug == 0 {
            self.m
        } else {
            self.m_aug
        }
    }

    fn aug_run_count(&self) -> usize {
        if self.aug_runs == 0 {
            self.boost_runs
        } else {
            self.aug_runs
        }
    }
}

/// Per-cluster trace of the pipeline stages.
#[derive(Clone, Debug, Serialize)]
pub struct ComponentReport {
    /// Samples in the cluster.
    pub n_samples: usize,
    /// Empirical sample mass of the cluster.
    pub mass: f64,
    /// Dimension after the PCA step (original d when the step is skipped).
    pub d_pca: usize,
    /// Projected search dimension.
    pub dbar: usize,
    /// Frames drawn before consensus and patch-up succeeded.
    pub frame_attempts: usize,
    /// Consensus cardinality.
    pub k0: usize,
    /// Counters of the accepted base-dimension runs.
    pub runs: Vec<RunDiagnostics>,
}

/// Budgets the run used, next to their theory-mode reference scales.
#[derive(Clone, Debug, Serialize)]
pub struct BudgetEcho {
    /// Samples available.
    pub n: usize,
    /// Oracle frequencies per draw.
    pub m: usize,
    /// Consensus runs per subproblem.
    pub boost_runs: usize,
    /// EM polish iterations.
    pub refine_iters: usize,
    /// Samples needed for the coverage guarantee at this k.
    pub coverage_n: usize,
    /// Theory-scale frequency count, as a decimal string.
    pub theory_m: String,
    /// Theory-scale sample count, as a decimal string.
    pub theory_n: String,
    /// Theory-scale consensus run count, 100 ln(1/eta).
    pub theory_boost_runs: u64,
}

/// Result document of a `learn_mixture` call.
#[derive(Clone, Debug, Serialize)]
pub struct LearnResult {
    /// Recovered centers in the original coordinates and scale.
    pub centers: Vec<Vec<f64>>,
    /// Per-cluster stage traces.
    pub components: Vec<ComponentReport>,
    /// Non-fatal notes (budget shortfalls, cluster splits).
    pub warnings: Vec<String>,
    /// Budgets used.
    pub budgets: BudgetEcho,
    /// Polish-stage label; weights stay frozen during EM.
    pub refiner: &'static str,
}

/// Errors that indicate a bad frame draw rather than a broken input.
fn frame_retry(e: &Error) -> bool {
    match e {
        Error::ConsensusFailure { .. }
        | Error::CardinalityMismatch { .. }
        | Error::NoSpikes
        | Error::PatchAmbiguity { .. }
        | Error::RetriesExhausted { .. } => true,
        Error::Stage { source, .. } => frame_retry(source),
        _ => false,
    }
}

/// Rotates reduced coordinates back through an orthonormal row basis.
fn lift(coords: &[f64], basis: &[Vec<f64>], d: usize) -> Vec<f64> {
    let mut x = vec![0.0; d];
    for (coef, row) in coords.iter().zip(basis) {
        for (xi, bi) in x.iter_mut().zip(row) {
            *xi += coef * bi;
        }
    }
    x
}

/// Oracle and consensus budget of one subproblem; augmented subproblems
/// may run leaner than the base one.
#[derive(Clone, Copy)]
struct StageBudget {
    m: usize,
    runs: usize,
}

/// Spike search plus consensus on one coordinate subset of the frame.
fn subproblem(
    work: &SampleSet,
    frame: &ProjectionFrame,
    coords: &[usize],
    w_min: f64,
    config: &LearnConfig,
    budget: StageBudget,
    seed: u64,
) -> Result<(Vec<Vec<f64>>, Vec<RunDiagnostics>)> {
    let projected = project(&work.points, frame, coords).map_err(|e| e.in_stage("project"))?;
    let dim = coords.len();
    let kernel = DeconvKernel::new(
        dim,
        config.separation.delta_bar,
        config.k,
        config.constants.c3_5,
    )
    .map_err(|e| e.in_stage("spikes"))?;
    let pset = SampleSet::new(projected, None, work.seed)?;
    let source = OracleSource::MonteCarlo {
        samples: &pset,
        kernel: &kernel,
        m: budget.m,
    };
    let anchors: &[Vec<f64>] = if config.anchor_budget > 0 && config.anchor_budget < pset.n() {
        &pset.points[..config.anchor_budget]
    } else {
        &pset.points
    };
    let fs = FindSpikesConfig {
        k: config.k,
        w_min,
        separation: config.separation,
        constants: config.constants,
        scale: config.scale,
        seed_mode: config.seed_mode,
        runs: budget.runs,
        eps: config.eps,
        lattice_cap: config.lattice_cap as u128,
        seed,
    };
    let spike_runs = find_spikes(&source, anchors, &fs).map_err(|e| e.in_stage("spikes"))?;
    let outputs: Vec<RunOutput> = spike_runs
        .iter()
        .enumerate()
        .map(|(i, r)| RunOutput {
            centers: r.points.clone(),
            run_id: i,
            diagnostics: RunDiagnostics {
                seeds: r.seeds,
                maximized: r.maximized,
                survivors: r.survivors,
                attempt: r.attempt,
            },
        })
        .collect();
    let tol = boost_tolerance(&config.separation, dim, config.k, config.constants.c4_6);
    let consensus = boost(&outputs, tol).map_err(|e| e.in_stage("boost"))?;
    let diags = outputs.into_iter().map(|o| o.diagnostics).collect();
    Ok((consensus, diags))
}

/// Solves the base projection, then one augmented subproblem per remaining
/// frame axis, and patches the extra coordinates onto the base centers.
/// Returns centers in the frame's ambient space.
fn solve_in_frame(
    work: &SampleSet,
    frame: &ProjectionFrame,
    w_min: f64,
    config: &LearnConfig,
    seed: u64,
) -> Result<(Vec<Vec<f64>>, Vec<RunDiagnostics>)> {
    let d_pca = frame.d();
    let dbar = frame.dbar;
    let lead: Vec<usize> = (0..dbar).collect();
    let base_budget = StageBudget {
        m: config.m,
        runs: config.boost_runs,
    };
    let (base, diags) = subproblem(
        work,
        frame,
        &lead,
        w_min,
        config,
        base_budget,
        stream_id(&[seed, 0]),
    )?;
    if dbar == d_pca {
        return Ok((base, diags));
    }
    let mut augmented = Vec::with_capacity(d_pca - dbar);
    for t in dbar..d_pca {
        let mut coords = lead.clone();
        coords.push(t);
        let aug_budget = StageBudget {
            m: config.aug_m(),
            runs: config.aug_run_count(),
        };
        let (found, _) = subproblem(
            work,
            frame,
            &coords,
            w_min,
            config,
            aug_budget,
            stream_id(&[seed, (t + 1) as u64]),
        )?;
        if found.len() != base.len() {
            return Err(Error::CardinalityMismatch {
                subproblem: t,
                found: found.len(),
                base: base.len(),
            });
        }
        augmented.push(found);
    }
    let tol = config.separation.delta_big * (dbar as f64).sqrt() / 4.0;
    let patched = patch_centers(frame, &base, &augmented, tol).map_err(|e| e.in_stage("patch"))?;
    Ok((patched, diags))
}

/// Recovers the centers of one proximity cluster: PCA to k dimensions when
/// d > k, then random frames until one yields a consensus that patches up,
/// then an EM polish on the cluster samples in the original dimension.
fn solve_cluster(
    cluster: &SampleSet,
    mass: f64,
    w_min: f64,
    config: &LearnConfig,
    seed: u64,
) -> Result<(Vec<Vec<f64>>, ComponentReport)> {
    let d = cluster.d();
    let k = config.k;
    let (pca_basis, work) = if d > k {
        let (basis, reduced) = pca_reduce(cluster, k, false).map_err(|e| e.in_stage("pca"))?;
        (Some(basis), reduced)
    } else {
        (None, cluster.clone())
    };
    let d_pca = work.d();
    let dbar = reduced_dim(d_pca, k, config.constants.c1_5);
    let frame_budget = (config.constants.c4_5 * k as f64).ceil().max(1.0) as usize;
    for attempt in 0..frame_budget {
        let frame_seed = stream_id(&[seed, attempt as u64]);
        let frame = if dbar < d_pca {
            random_frame(d_pca, k, config.constants.c1_5, frame_seed)
        } else {
            ProjectionFrame::identity(d_pca)
        };
        match solve_in_frame(&work, &frame, w_min, config, frame_seed) {
            Ok((found, runs)) => {
                let k0 = found.len();
                let back: Vec<Vec<f64>> = match &pca_basis {
                    Some(basis) => found.iter().map(|c| lift(c, basis, d)).collect(),
                    None => found,
                };
                let weights = vec![1.0 / k0 as f64; k0];
                let polished = refine(cluster, &back, &weights, 1.0, config.refine_iters)
                    .map_err(|e| e.in_stage("refine"))?;
                let report = ComponentReport {
                    n_samples: cluster.n(),
                    mass,
                    d_pca,
                    dbar,
                    frame_attempts: attempt + 1,
                    k0,
                    runs,
                };
                return Ok((polished, report));
            }
            Err(e) if frame_retry(&e) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::RetriesExhausted {
        attempts: frame_budget,
    })
}

/// Recovers mixture centers from samples alone. The output cardinality is
/// whatever the per-cluster consensus settles on; cluster outputs are
/// unioned and mapped back to the original scale.
pub fn learn_mixture(samples: &SampleSet, config: &LearnConfig) -> Result<LearnResult> {
    config.validate()?;
    let n = samples.n();
    let d = samples.d();
    let inv = 1.0 / config.sigma;
    let scaled_points: Vec<Vec<f64>> = samples
        .points
        .iter()
        .map(|p| p.iter().map(|v| v * inv).collect())
        .collect();
    let scaled = SampleSet::new(scaled_points, None, samples.seed)?;
    let mut warnings = Vec::new();
    let coverage_n = coverage_sample_size(config.k, config.constants.c, config.constants.eta)
        .map_err(|e| e.in_stage("preprocess"))?;
    if n < coverage_n {
        warnings.push(format!(
            "sample budget {n} is below the coverage size {coverage_n} for k = {}",
            config.k
        ));
    }
    let threshold =
        proximity_threshold(d, n, config.constants.c1).map_err(|e| e.in_stage("preprocess"))?;
    let decomp = split_clusters(&scaled, threshold).map_err(|e| e.in_stage("preprocess"))?;
    if decomp.components.len() > 1 {
        warnings.push(format!(
            "{} well-separated sample clusters solved independently",
            decomp.components.len()
        ));
    }
    let mut centers = Vec::new();
    let mut components = Vec::with_capacity(decomp.components.len());
    for (ci, members) in decomp.components.iter().enumerate() {
        let points: Vec<Vec<f64>> = members.iter().map(|&i| scaled.points[i].clone()).collect();
        let cluster = SampleSet::new(points, None, samples.seed)?;
        let mass = cluster.n() as f64 / n as f64;
        let w_min = (config.w_min / mass).min(1.0);
        let cluster_seed = stream_id(&[config.seed, ci as u64]);
        let (found, report) = solve_cluster(&cluster, mass, w_min, config, cluster_seed)?;
        centers.extend(found);
        components.push(report);
    }
    for c in &mut centers {
        for v in c.iter_mut() {
            *v *= config.sigma;
        }
    }
    let (theory_m, theory_n) = theory_budgets(config.k, &config.constants)?;
    let budgets = BudgetEcho {
        n,
        m: config.m,
        boost_runs: config.boost_runs,
        refine_iters: config.refine_iters,
        coverage_n,
        theory_m: theory_m.to_string(),
        theory_n: theory_n.to_string(),
        theory_boost_runs: (100.0 * (1.0 / config.constants.eta).ln()).ceil() as u64,
    };
    Ok(LearnResult {
        centers,
        components,
        warnings,
        budgets,
        refiner: "EM-fixed-w",
    })
}
