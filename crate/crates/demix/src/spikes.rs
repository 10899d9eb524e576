//! Spike extraction from the deconvolved density.
//!
//! Seeds (a fine lattice clipped to balls around anchor points, or the
//! anchors themselves) each start a derivative-free maximization of the
//! log-oracle over a small ball. Candidates are filtered by oracle value and
//! by how far the maximizer travelled, then greedily deduplicated by seed
//! distance so each surviving spike represents one center. The search
//! retries with fresh Monte-Carlo draws until enough runs succeed or the
//! attempt budget is spent.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::config::{ConstantsConfig, SeparationSpec};
use crate::deconv::{
    draw_frequencies, exact_smoothed, kernel_peak, oracle_eval, DeconvKernel, FrequencyDraw,
};
use crate::error::{Error, Result};
use crate::metrics::{dist, dist2};
use crate::model::{MixtureParams, SampleSet};
use crate::rng::{stream_id, stream_rng};

/// Lattice granularity. `Theory` keeps the divisors the correctness analysis
/// uses (1000, 400); the resulting point counts are astronomically large.
/// `Practice` coarsens them to (8, 4), same structure at tractable size.
#[derive(Clone, Copy, Debug, Eq, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatticeScale {
    Theory,
    Practice,
}

impl LatticeScale {
    /// (spacing divisor, search-ball divisor).
    fn divisors(self) -> (f64, f64) {
        match self {
            LatticeScale::Theory => (1000.0, 400.0),
            LatticeScale::Practice => (8.0, 4.0),
        }
    }
}

/// Seed lattice: the points of `spacing * Z^dbar` inside the union of balls
/// `B(center_i, anchor_radius)`. Each lattice point seeds a maximization
/// over the smaller ball `B(point, ball_radius_q)`.
#[derive(Clone, Debug)]
pub struct LatticeSpec {
    /// Grid step.
    pub spacing: f64,
    /// Radius of the per-seed maximization ball; always exceeds `spacing`.
    pub ball_radius_q: f64,
    /// Radius of the anchor balls the lattice is clipped to.
    pub anchor_radius: f64,
    /// Anchor ball centers, usually sample points.
    pub centers: Vec<Vec<f64>>,
}

impl LatticeSpec {
    /// Derives the grid from the deconvolution width:
    /// spacing = (delta_bar / a) sqrt(dbar / (c1_5 ln k)) and
    /// ball_radius_q = (delta_bar / b) dbar / sqrt(c1_5 ln k) with divisors
    /// (a, b) from `scale`, and anchor_radius = 2 sqrt(dbar).
    pub fn new(
        delta_bar: f64,
        k: usize,
        c1_5: f64,
        centers: Vec<Vec<f64>>,
        scale: LatticeScale,
    ) -> Result<Self> {
        if k < 2 {
            return Err(Error::Domain(format!("lattice needs k >= 2, got {k}")));
        }
        if !delta_bar.is_finite() || delta_bar <= 0.0 {
            return Err(Error::Domain(format!(
                "lattice needs positive delta_bar, got {delta_bar}"
            )));
        }
        if !c1_5.is_finite() || c1_5 <= 0.0 {
            return Err(Error::Domain(format!(
                "lattice needs positive c1_5, got {c1_5}"
            )));
        }
        let dbar = centers.first().map_or(0, Vec::len) as f64;
        let logk_scaled = c1_5 * (k as f64).ln();
        let (a, b) = scale.divisors();
        let spec = LatticeSpec {
            spacing: delta_bar / a * (dbar / logk_scaled).sqrt(),
            ball_radius_q: delta_bar / b * dbar / logk_scaled.sqrt(),
            anchor_radius: 2.0 * dbar.sqrt(),
            centers,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.centers.is_empty() {
            return Err(Error::Domain("lattice needs at least one anchor".into()));
        }
        let dbar = self.centers[0].len();
        if dbar == 0 || self.centers.iter().any(|c| c.len() != dbar) {
            return Err(Error::Domain(
                "lattice anchors must share a positive dimension".into(),
            ));
        }
        if !self.spacing.is_finite() || self.spacing <= 0.0 {
            return Err(Error::Domain(format!(
                "lattice spacing must be positive, got {}",
                self.spacing
            )));
        }
        if !self.ball_radius_q.is_finite() || self.ball_radius_q <= self.spacing {
            return Err(Error::Domain(format!(
                "search ball radius {} must exceed spacing {}",
                self.ball_radius_q, self.spacing
            )));
        }
        if !self.anchor_radius.is_finite() || self.anchor_radius <= 0.0 {
            return Err(Error::Domain(format!(
                "anchor radius must be positive, got {}",
                self.anchor_radius
            )));
        }
        Ok(())
    }

    /// Anchor dimension.
    pub fn dbar(&self) -> usize {
        self.centers[0].len()
    }

    /// Upper bound on the point count: per ball, the bounding box holds at
    /// most (floor(2R / spacing) + 1)^dbar grid points. Saturating.
    pub fn estimate(&self) -> u128 {
        let axis = (2.0 * self.anchor_radius / self.spacing).floor();
        let axis = if axis >= u128::MAX as f64 {
            u128::MAX
        } else {
            axis as u128 + 1
        };
        let mut per_ball: u128 = 1;
        for _ in 0..self.dbar() {
            per_ball = per_ball.saturating_mul(axis);
        }
        per_ball.saturating_mul(self.centers.len() as u128)
    }
}

/// Integer grid range covering `[c - r, c + r]` at step `sp`.
fn axis_range(c: f64, r: f64, sp: f64) -> Result<(i64, i64)> {
    let lo = ((c - r) / sp).ceil();
    let hi = ((c + r) / sp).floor();
    if !lo.is_finite() || !hi.is_finite() || lo.abs() > 9.0e15 || hi.abs() > 9.0e15 {
        return Err(Error::Domain(format!(
            "lattice index overflow: range [{lo}, {hi}] at spacing {sp}"
        )));
    }
    Ok((lo as i64, hi as i64))
}

/// Streams the lattice points of `spec` without materializing them: each
/// anchor ball is scanned in lexicographic order (first coordinate most
/// significant) and a point is emitted iff it lies in the current ball and
/// in no earlier one, so the global order is by anchor index then
/// lexicographic, with no duplicates. Errors with the size estimate when it
/// exceeds `cap`.
pub fn enumerate_lattice(
    spec: &LatticeSpec,
    cap: u128,
) -> Result<impl Iterator<Item = Vec<f64>> + '_> {
    spec.validate()?;
    let estimate = spec.estimate();
    if estimate > cap {
        return Err(Error::LatticeTooLarge { estimate, cap });
    }
    let dbar = spec.dbar();
    let sp = spec.spacing;
    let r2 = spec.anchor_radius * spec.anchor_radius;

    // Per-ball integer ranges, and earlier balls close enough to overlap.
    let mut ranges: Vec<(Vec<i64>, Vec<i64>)> = Vec::with_capacity(spec.centers.len());
    for c in &spec.centers {
        let mut lo = Vec::with_capacity(dbar);
        let mut hi = Vec::with_capacity(dbar);
        for &ct in c {
            let (l, h) = axis_range(ct, spec.anchor_radius, sp)?;
            lo.push(l);
            hi.push(h);
        }
        ranges.push((lo, hi));
    }
    let overlap2 = 4.0 * r2;
    let earlier: Vec<Vec<usize>> = (0..spec.centers.len())
        .map(|i| {
            (0..i)
                .filter(|&j| dist2(&spec.centers[i], &spec.centers[j]) <= overlap2)
                .collect()
        })
        .collect();

    let mut ball = 0usize;
    let mut idx: Vec<i64> = Vec::new();
    let mut fresh = true;
    Ok(std::iter::from_fn(move || loop {
        if ball >= spec.centers.len() {
            return None;
        }
        let (lo, hi) = &ranges[ball];
        if fresh {
            if lo.iter().zip(hi).any(|(l, h)| l > h) {
                ball += 1;
                continue;
            }
            idx = lo.clone();
            fresh = false;
        } else {
            // Advance the odometer, last axis fastest.
            let mut t = dbar;
            loop {
                if t == 0 {
                    fresh = true;
                    ball += 1;
                    break;
                }
                t -= 1;
                idx[t] += 1;
                if idx[t] <= hi[t] {
                    break;
                }
                idx[t] = lo[t];
            }
            if fresh {
                continue;
            }
        }
        let p: Vec<f64> = idx.iter().map(|&i| i as f64 * sp).collect();
        if dist2(&p, &spec.centers[ball]) > r2 {
            continue;
        }
        if earlier[ball]
            .iter()
            .any(|&j| dist2(&p, &spec.centers[j]) <= r2)
        {
            continue;
        }
        return Some(p);
    }))
}

/// Result of a derivative-free maximization over a ball.
#[derive(Clone, Debug)]
pub struct BallMax {
    /// Best point found; always inside the ball.
    pub point: Vec<f64>,
    /// Objective value at `point`.
    pub value: f64,
    /// Objective evaluations spent.
    pub calls: usize,
    /// The evaluation budget ran out before the sweeps stalled.
    pub budget_exhausted: bool,
}

/// Evaluation budget: linear in dimension, logarithmic in the value
/// tolerance and the objective's Lipschitz bound.
fn eval_budget(dbar: usize, eps: f64, t_bound: f64) -> usize {
    let work = (1.0 / eps).ln().max(1.0) + t_bound.max(std::f64::consts::E).ln();
    let b = (24.0 * dbar as f64 * work).ceil() as usize;
    b.max(8 * dbar + 16)
}

/// Uniform draw from the closed ball (Gaussian direction, radial CDF).
fn random_in_ball(rng: &mut ChaCha8Rng, center: &[f64], radius: f64) -> Vec<f64> {
    let dbar = center.len();
    loop {
        let dir: Vec<f64> = (0..dbar).map(|_| rng.sample(StandardNormal)).collect();
        let norm2: f64 = dir.iter().map(|v| v * v).sum();
        if norm2 == 0.0 {
            continue;
        }
        let u: f64 = rng.gen();
        let scale = radius * u.powf(1.0 / dbar as f64) / norm2.sqrt();
        return center
            .iter()
            .zip(&dir)
            .map(|(c, v)| c + v * scale)
            .collect();
    }
}

/// Maximizes a black-box objective over the closed ball `B(center, radius)`
/// by coordinate golden-section search from the best of a fixed start set
/// (ball center, axis probes at 0.7 radius, two random interior points).
/// Deterministic given `seed`. `eps` is the target value accuracy and
/// `t_bound` a Lipschitz bound for the objective; both only size the
/// evaluation budget and step tolerance. Running out of budget sets a flag
/// rather than failing.
pub fn maximize_in_ball<F: FnMut(&[f64]) -> f64>(
    mut oracle: F,
    center: &[f64],
    radius: f64,
    eps: f64,
    t_bound: f64,
    seed: u64,
) -> Result<BallMax> {
    let dbar = center.len();
    if dbar == 0 {
        return Err(Error::Domain("maximization needs dimension >= 1".into()));
    }
    if !radius.is_finite() || radius <= 0.0 {
        return Err(Error::Domain(format!(
            "maximization needs positive radius, got {radius}"
        )));
    }
    if !eps.is_finite() || eps <= 0.0 {
        return Err(Error::Domain(format!(
            "maximization needs positive eps, got {eps}"
        )));
    }
    if !t_bound.is_finite() || t_bound <= 0.0 {
        return Err(Error::Domain(format!(
            "maximization needs positive t_bound, got {t_bound}"
        )));
    }

    let budget = eval_budget(dbar, eps, t_bound);
    let mut calls = 0usize;

    let mut rng = stream_rng(seed, 3);
    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(2 * dbar + 3);
    starts.push(center.to_vec());
    for t in 0..dbar {
        for s in [-1.0, 1.0] {
            let mut p = center.to_vec();
            p[t] += s * 0.7 * radius;
            starts.push(p);
        }
    }
    for _ in 0..2 {
        starts.push(random_in_ball(&mut rng, center, radius));
    }

    let mut x = Vec::new();
    let mut fx = f64::NEG_INFINITY;
    for p in starts {
        if calls >= budget && !x.is_empty() {
            break;
        }
        let v = oracle(&p);
        calls += 1;
        if v > fx || x.is_empty() {
            x = p;
            fx = v;
        }
    }

    let phi = 0.5 * (5.0f64.sqrt() - 1.0);
    let tol_x = (eps / t_bound.max(1.0)).max(radius * 1e-6);
    let mut converged = false;
    let mut out_of_budget = false;
    'sweeps: for _ in 0..MAX_SWEEPS {
        let f_start = fx;
        for t in 0..dbar {
            if calls + 2 > budget {
                out_of_budget = true;
                break 'sweeps;
            }
            // Chord of the ball along axis t through x.
            let off = x[t] - center[t];
            let rho2 = (dist2(&x, center) - off * off).max(0.0);
            let half = (radius * radius - rho2).max(0.0).sqrt();
            let (mut a, mut b) = (-half - off, half - off);
            if b - a <= tol_x {
                continue;
            }
            let x_t = x[t];
            let mut c1 = b - phi * (b - a);
            let mut c2 = a + phi * (b - a);
            x[t] = x_t + c1;
            let mut f1 = oracle(&x);
            x[t] = x_t + c2;
            let mut f2 = oracle(&x);
            calls += 2;
            while b - a > tol_x && calls < budget {
                if f1 >= f2 {
                    b = c2;
                    c2 = c1;
                    f2 = f1;
                    c1 = b - phi * (b - a);
                    x[t] = x_t + c1;
                    f1 = oracle(&x);
                } else {
                    a = c1;
                    c1 = c2;
                    f1 = f2;
                    c2 = a + phi * (b - a);
                    x[t] = x_t + c2;
                    f2 = oracle(&x);
                }
                calls += 1;
            }
            let (s_new, f_new) = if f1 >= f2 { (c1, f1) } else { (c2, f2) };
            if f_new > fx {
                x[t] = x_t + s_new;
                fx = f_new;
            } else {
                x[t] = x_t;
            }
        }
        if fx - f_start < 0.25 * eps {
            converged = true;
            break;
        }
    }

    // Numerical safety only; chord endpoints already lie in the ball.
    let d = dist(&x, center);
    if d > radius {
        let shrink = radius / d * (1.0 - 1e-12);
        for t in 0..dbar {
            x[t] = center[t] + (x[t] - center[t]) * shrink;
        }
        fx = oracle(&x);
        calls += 1;
    }

    Ok(BallMax {
        point: x,
        value: fx,
        calls,
        budget_exhausted: out_of_budget && !converged,
    })
}

const MAX_SWEEPS: usize = 64;

/// One maximization outcome: the seed it started from, where the maximizer
/// landed, the raw oracle value there, and whether it travelled at least a
/// quarter of the search-ball diameter.
#[derive(Clone, Debug)]
pub struct SpikeCandidate {
    /// Seed the maximization started from.
    pub seed: Vec<f64>,
    /// Maximizer output, inside the seed's search ball.
    pub maximizer: Vec<f64>,
    /// Oracle value at `maximizer` (raw scale, not log).
    pub value: f64,
    /// Moved at least half the search-ball radius from the seed.
    pub moved_far: bool,
}

/// Filter predicate shared by `filter_candidates` and the streaming path in
/// `find_spikes`: clears the value threshold and stayed near its seed.
fn survives(c: &SpikeCandidate, thr: f64) -> bool {
    c.value > thr && !c.moved_far
}

/// Keeps candidates whose oracle value exceeds `(w_min / 2)` times the
/// kernel peak and whose maximizer stayed within a quarter diameter of its
/// seed, preserving order. An empty survivor list is the retry signal
/// `Error::NoSpikes`.
pub fn filter_candidates(
    cands: Vec<SpikeCandidate>,
    w_min: f64,
    dbar: usize,
    delta_bar: f64,
) -> Result<Vec<SpikeCandidate>> {
    if !w_min.is_finite() || w_min <= 0.0 {
        return Err(Error::Domain(format!(
            "filter needs positive w_min, got {w_min}"
        )));
    }
    if !delta_bar.is_finite() || delta_bar <= 0.0 {
        return Err(Error::Domain(format!(
            "filter needs positive delta_bar, got {delta_bar}"
        )));
    }
    let thr = 0.5 * w_min * kernel_peak(dbar, delta_bar);
    let kept: Vec<SpikeCandidate> = cands.into_iter().filter(|c| survives(c, thr)).collect();
    if kept.is_empty() {
        return Err(Error::NoSpikes);
    }
    Ok(kept)
}

/// Dedup key: the seed in lattice mode, the maximizer otherwise.
fn dedup_key(c: &SpikeCandidate, on_seeds: bool) -> &[f64] {
    if on_seeds {
        &c.seed
    } else {
        &c.maximizer
    }
}

/// Greedy first-come deduplication on seeds: scan in order, keep a candidate
/// iff its seed lies outside the closed `radius`-ball around every kept
/// seed. Output seeds are pairwise more than `radius` apart.
pub fn dedup(cands: &[SpikeCandidate], radius: f64) -> Vec<SpikeCandidate> {
    let r2 = radius * radius;
    let mut kept: Vec<SpikeCandidate> = Vec::new();
    for c in cands {
        if kept.iter().all(|k| dist2(&k.seed, &c.seed) > r2) {
            kept.push(c.clone());
        }
    }
    kept
}

/// Where spike-search oracle evaluations come from.
pub enum OracleSource<'a> {
    /// Monte-Carlo deconvolution oracle; every attempt draws `m` fresh
    /// frequencies from the kernel ball against the samples' ECF.
    MonteCarlo {
        samples: &'a SampleSet,
        kernel: &'a DeconvKernel,
        m: usize,
    },
    /// Noise-free smoothed density of known centers (test instrument).
    Exact {
        params: &'a MixtureParams,
        delta_bar: f64,
    },
}

impl OracleSource<'_> {
    /// Probe-space dimension.
    pub fn dbar(&self) -> usize {
        match self {
            OracleSource::MonteCarlo { kernel, .. } => kernel.dbar,
            OracleSource::Exact { params, .. } => params.d,
        }
    }

    /// Smoothing width the oracle evaluates at.
    pub fn delta_bar(&self) -> f64 {
        match self {
            OracleSource::MonteCarlo { kernel, .. } => kernel.delta_bar,
            OracleSource::Exact { delta_bar, .. } => *delta_bar,
        }
    }

    /// True when evaluations carry Monte-Carlo noise.
    fn is_noisy(&self) -> bool {
        matches!(self, OracleSource::MonteCarlo { .. })
    }

    /// Builds the per-attempt evaluator; Monte-Carlo draws are fresh.
    fn instantiate(&self, seed: u64) -> Result<AttemptOracle<'_>> {
        match self {
            OracleSource::MonteCarlo { samples, kernel, m } => Ok(AttemptOracle::MonteCarlo {
                draw: draw_frequencies(kernel, samples, *m, seed)?,
                kernel,
            }),
            OracleSource::Exact { params, delta_bar } => Ok(AttemptOracle::Exact {
                params,
                delta_bar: *delta_bar,
            }),
        }
    }
}

/// Per-attempt evaluator.
enum AttemptOracle<'a> {
    MonteCarlo {
        draw: FrequencyDraw,
        kernel: &'a DeconvKernel,
    },
    Exact {
        params: &'a MixtureParams,
        delta_bar: f64,
    },
}

impl AttemptOracle<'_> {
    fn eval(&self, x: &[f64]) -> f64 {
        match self {
            AttemptOracle::MonteCarlo { draw, kernel } => oracle_eval(draw, kernel, x).value,
            AttemptOracle::Exact { params, delta_bar } => exact_smoothed(params, *delta_bar, x),
        }
    }
}

/// Where maximization seeds come from.
#[derive(Clone, Copy, Debug, Eq, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedMode {
    /// Fine lattice clipped to balls around the anchors.
    Lattice,
    /// The anchors themselves, searched in balls of radius 2 sqrt(dbar).
    Samples,
}

/// Spike-search configuration.
#[derive(Clone, Debug)]
pub struct FindSpikesConfig {
    /// Global component-count bound; drives lattice geometry and retries.
    pub k: usize,
    /// Known lower bound on mixture weights, in (0, 1].
    pub w_min: f64,
    /// Separation scales; `delta_bar` must match the oracle's width.
    pub separation: SeparationSpec,
    /// Constant family (c1_5 for the lattice, c4_5 for the retry budget).
    pub constants: ConstantsConfig,
    /// Lattice granularity.
    pub scale: LatticeScale,
    /// Where maximization seeds come from.
    pub seed_mode: SeedMode,
    /// Successful runs to collect (later consensus wants several).
    pub runs: usize,
    /// Maximizer value tolerance in the log domain.
    pub eps: f64,
    /// Enumeration cap; exceeding it aborts instead of grinding.
    pub lattice_cap: u128,
    /// Master seed; attempts and per-seed maximizers derive from it.
    pub seed: u64,
}

impl FindSpikesConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidConfig {
                field: "find_spikes.k".into(),
                reason: format!("must be >= 2, got {}", self.k),
            });
        }
        if !self.w_min.is_finite() || self.w_min <= 0.0 || self.w_min > 1.0 {
            return Err(Error::InvalidConfig {
                field: "find_spikes.w_min".into(),
                reason: format!("must lie in (0, 1], got {}", self.w_min),
            });
        }
        self.separation.validate()?;
        self.constants.validate()?;
        if self.runs < 1 {
            return Err(Error::InvalidConfig {
                field: "find_spikes.runs".into(),
                reason: "must be >= 1".into(),
            });
        }
        if !self.eps.is_finite() || self.eps <= 0.0 {
            return Err(Error::InvalidConfig {
                field: "find_spikes.eps".into(),
                reason: format!("must be positive, got {}", self.eps),
            });
        }
        if self.lattice_cap == 0 {
            return Err(Error::InvalidConfig {
                field: "find_spikes.lattice_cap".into(),
                reason: "must be positive".into(),
            });
        }
        Ok(())
    }
}

/// One successful spike-search run.
#[derive(Clone, Debug)]
pub struct SpikeRun {
    /// Deduplicated candidate centers (maximizer points).
    pub points: Vec<Vec<f64>>,
    /// Zero-based attempt index that produced this run.
    pub attempt: usize,
    /// Seeds enumerated.
    pub seeds: usize,
    /// Seeds that reached the maximizer (the rest were pruned by value).
    pub maximized: usize,
    /// Candidates surviving the value/movement filter, before dedup.
    pub survivors: usize,
}

/// Runs the spike search against `source`: enumerate seeds around the
/// anchors, maximize the log-oracle in a ball at each seed, filter by value
/// and movement, deduplicate, and retry with a fresh Monte-Carlo draw on
/// failure, up to ceil(c4_5 * k) attempts. Returns the successful runs (at
/// most `cfg.runs`, at least one) or the retry error.
///
/// Dedup keys on seeds in lattice mode, where survivors sit within half a
/// search ball of their center; in samples mode the seeds are sample points
/// spread across a whole basin, so dedup keys on maximizers instead.
///
/// The filter and dedup are streamed: a candidate below the value floor for
/// any possible survivor is skipped before maximization, and survivors are
/// deduplicated as they appear. The result equals `filter_candidates`
/// followed by `dedup` over the full candidate sequence.
pub fn find_spikes(
    source: &OracleSource,
    anchors: &[Vec<f64>],
    cfg: &FindSpikesConfig,
) -> Result<Vec<SpikeRun>> {
    cfg.validate()?;
    let dbar = source.dbar();
    if anchors.is_empty() {
        return Err(Error::Domain(
            "spike search needs at least one anchor".into(),
        ));
    }
    if anchors.iter().any(|a| a.len() != dbar) {
        return Err(Error::Domain(format!(
            "anchor dimension mismatch: oracle expects {dbar}"
        )));
    }
    let delta_bar = source.delta_bar();
    if (delta_bar - cfg.separation.delta_bar).abs() > 1e-12 * delta_bar.max(1.0) {
        return Err(Error::Domain(format!(
            "oracle smoothing width {delta_bar} does not match configured {}",
            cfg.separation.delta_bar
        )));
    }

    let peak = kernel_peak(dbar, delta_bar);
    let thr = 0.5 * cfg.w_min * peak;
    let floor = 0.25 * cfg.w_min * peak;

    let lattice = match cfg.seed_mode {
        SeedMode::Lattice => Some(LatticeSpec::new(
            delta_bar,
            cfg.k,
            cfg.constants.c1_5,
            anchors.to_vec(),
            cfg.scale,
        )?),
        SeedMode::Samples => None,
    };
    let r_search = lattice
        .as_ref()
        .map_or(2.0 * (dbar as f64).sqrt(), |spec| spec.ball_radius_q);
    let move_limit = 0.5 * r_search;

    // Log-domain Lipschitz bound: raw gradient peaks at peak e^(-1/2) / db,
    // and the log floor divides it through.
    let t_log = peak * (-0.5f64).exp() / (delta_bar * floor);

    // Value prune: a survivor sits above `thr` within `move_limit` of its
    // seed, and the smoothed density decays as a width-delta_bar Gaussian
    // from the nearest center, so the seed itself must clear `keep_floor`.
    // Noisy oracles get a margin of half the threshold on both sides.
    let osc = if source.is_noisy() { 0.5 * thr } else { 0.0 };
    let keep_floor = {
        let reach = delta_bar * (2.0 * (peak / (thr - osc)).ln().max(0.0)).sqrt() + move_limit;
        cfg.w_min * peak * (-reach * reach / (2.0 * delta_bar * delta_bar)).exp() - osc
    };

    let dd_radius = (dbar as f64 * cfg.separation.delta_big * delta_bar).sqrt() * 0.5;
    let dd_r2 = dd_radius * dd_radius;
    let dedup_on_seeds = cfg.seed_mode == SeedMode::Lattice;
    let count_max = (cfg.constants.c4_5 * cfg.k as f64).ceil().max(1.0) as usize;
    let runs_goal = cfg.runs.min(count_max);

    let mut runs: Vec<SpikeRun> = Vec::new();
    for attempt in 0..count_max {
        let oracle = source.instantiate(stream_id(&[cfg.seed, attempt as u64]))?;
        let seed_iter: Box<dyn Iterator<Item = Vec<f64>> + '_> = match &lattice {
            Some(spec) => Box::new(enumerate_lattice(spec, cfg.lattice_cap)?),
            None => Box::new(anchors.iter().cloned()),
        };

        let mut kept: Vec<SpikeCandidate> = Vec::new();
        let mut seeds = 0usize;
        let mut maximized = 0usize;
        let mut survivors = 0usize;
        for (idx, l) in seed_iter.enumerate() {
            seeds += 1;
            if keep_floor > 0.0 && oracle.eval(&l) < keep_floor {
                continue;
            }
            maximized += 1;
            let bm = maximize_in_ball(
                |x| oracle.eval(x).max(floor).ln(),
                &l,
                r_search,
                cfg.eps,
                t_log,
                stream_id(&[cfg.seed, attempt as u64, idx as u64]),
            )?;
            let cand = SpikeCandidate {
                moved_far: dist(&l, &bm.point) >= move_limit,
                value: oracle.eval(&bm.point),
                maximizer: bm.point,
                seed: l,
            };
            if !survives(&cand, thr) {
                continue;
            }
            survivors += 1;
            let key = dedup_key(&cand, dedup_on_seeds);
            if kept
                .iter()
                .all(|k| dist2(dedup_key(k, dedup_on_seeds), key) > dd_r2)
            {
                kept.push(cand);
            }
        }
        if survivors == 0 {
            continue;
        }
        runs.push(SpikeRun {
            points: kept.into_iter().map(|c| c.maximizer).collect(),
            attempt,
            seeds,
            maximized,
            survivors,
        });
        if runs.len() == runs_goal {
            break;
        }
    }
    if runs.is_empty() {
        return Err(Error::RetriesExhausted {
            attempts: count_max,
        });
    }
    Ok(runs)
}
