//! Acceptance gate: seven numbered end-to-end criteria, each printing one
//! PASS/FAIL summary line with its measured numbers and wall time before
//! asserting. Tolerances, budgets, and case grids are pinned as constants.

use demix::rng::{stream_id, stream_rng};
use demix::{
    boost, coverage_sample_size, dedup, draw_frequencies, ecf, enumerate_lattice, exact_smoothed,
    find_spikes, hausdorff, kernel_fidelity_bound, kernel_peak, mixture_nll, oracle_eval,
    proximity_threshold, refine, run_experiment, s_hat, sample_mixture, split_clusters,
    ConstantsConfig, DeconvKernel, ExperimentConfig, FindSpikesConfig, GeneratorSpec, LatticeScale,
    LatticeSpec, MixtureParams, MixtureSource, Mode, OracleSource, RunDiagnostics, RunOutput,
    SampleSet, SeedMode, SeparationSpec, SpikeCandidate, WeightScheme,
};
use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, RngAlgorithm, TestError, TestRng, TestRunner};
use rand::Rng;
use std::f64::consts::PI;
use std::time::Instant;

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn uniform_weights(k: usize) -> Vec<f64> {
    vec![1.0 / k as f64; k]
}

// --- criterion 1: kernel fidelity -----------------------------------------

const C1_BUDGET_S: f64 = 60.0;
const C1_C35: f64 = 2.0;
/// Probe radii 0..=2 in steps of 0.02; covers the kernel mass and its tail.
const C1_GRID: usize = 101;

/// (2 pi)^(-1/2) Int_{-R}^{R} s_hat(w) cos(w z) dw by composite Simpson.
fn inverse_transform_1d(kernel: &DeconvKernel, z: f64) -> f64 {
    let n = 20_000usize;
    let r = kernel.radius;
    let h = 2.0 * r / n as f64;
    let mut acc = 0.0;
    for i in 0..=n {
        let w = -r + i as f64 * h;
        let weight = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += weight * s_hat(kernel, &[w]) * (w * z).cos();
    }
    acc * h / 3.0 * (2.0 * PI).powf(-0.5)
}

/// (2 pi)^(-1) Int_B s_hat(w) e^(i w.z) dw at |z| = z, reduced to polar
/// coordinates and integrated by Simpson in radius and angle.
fn inverse_transform_2d(kernel: &DeconvKernel, z: f64) -> f64 {
    let (nr, nt) = (2_000usize, 1_024usize);
    let r = kernel.radius;
    let hr = r / nr as f64;
    let ht = 2.0 * PI / nt as f64;
    let cos_t: Vec<f64> = (0..=nt).map(|j| (j as f64 * ht).cos()).collect();
    let mut acc = 0.0;
    for i in 0..=nr {
        let ri = i as f64 * hr;
        let wr = if i == 0 || i == nr {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let s = s_hat(kernel, &[ri, 0.0]);
        if s == 0.0 {
            continue;
        }
        let mut inner = 0.0;
        for (j, c) in cos_t.iter().enumerate() {
            let wt = if j == 0 || j == nt {
                1.0
            } else if j % 2 == 1 {
                4.0
            } else {
                2.0
            };
            inner += wt * (ri * z * c).cos();
        }
        acc += wr * ri * s * inner * ht / 3.0;
    }
    acc * hr / 3.0 / (2.0 * PI)
}

#[test]
fn criterion_1_kernel_fidelity() {
    let start = Instant::now();
    let mut pass = true;
    let mut worst_ratio: f64 = 0.0;
    for &dbar in &[1usize, 2] {
        for &delta_bar in &[0.25, 0.5] {
            for &k in &[16usize, 256] {
                let kernel = DeconvKernel::new(dbar, delta_bar, k, C1_C35).unwrap();
                let bound = kernel_fidelity_bound(&kernel, k).unwrap();
                let peak = kernel_peak(dbar, delta_bar);
                let sup = (0..C1_GRID)
                    .map(|i| {
                        let z = 2.0 * i as f64 / (C1_GRID - 1) as f64;
                        let s = if dbar == 1 {
                            inverse_transform_1d(&kernel, z)
                        } else {
                            inverse_transform_2d(&kernel, z)
                        };
                        let gamma = peak * (-z * z / (2.0 * delta_bar * delta_bar)).exp();
                        (s - gamma).abs()
                    })
                    .fold(0.0, f64::max);
                pass &= sup <= bound;
                worst_ratio = worst_ratio.max(sup / bound);
            }
        }
    }
    let el = start.elapsed().as_secs_f64();
    println!(
        "criterion 1 (kernel fidelity): {} worst sup-err/bound {:.2e} over 8 cases [{:.1}s < {}s]",
        verdict(pass && el < C1_BUDGET_S),
        worst_ratio,
        el,
        C1_BUDGET_S
    );
    assert!(pass, "sup-grid error exceeded the fidelity bound");
    assert!(el < C1_BUDGET_S, "ran {el:.1}s");
}

// --- criterion 2: oracle accuracy ------------------------------------------

const C2_N: usize = 20_000;
const C2_M: usize = 20_000;
const C2_DELTA_BAR: f64 = 0.5;
/// Component bound handed to the kernel; the mixtures have 1 or 2 centers.
const C2_KERNEL_K: usize = 2;
/// Library default truncation constant.
const C2_C35: f64 = 0.5;
const C2_TOL_FRAC: f64 = 0.05;
const C2_SEEDS: usize = 100;
const C2_NEED: usize = 95;
const C2_BUDGET_S: f64 = 300.0;
/// Monte-Carlo budgets for the error-scaling probe; ratio 16 means the
/// spread should shrink by about 4 if the error scales as 1/sqrt(m).
const C2_SCALE_M: [usize; 2] = [2_000, 32_000];
const C2_SCALE_REPS: usize = 20;
const C2_SCALE_BAND: (f64, f64) = (2.2, 7.3);

fn grid_1d(lo: f64, hi: f64, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| vec![lo + (hi - lo) * i as f64 / (n - 1) as f64])
        .collect()
}

fn grid_2d(xlo: f64, xhi: f64, ylo: f64, yhi: f64, side: usize) -> Vec<Vec<f64>> {
    let mut g = Vec::with_capacity(side * side);
    for i in 0..side {
        for j in 0..side {
            g.push(vec![
                xlo + (xhi - xlo) * i as f64 / (side - 1) as f64,
                ylo + (yhi - ylo) * j as f64 / (side - 1) as f64,
            ]);
        }
    }
    g
}

#[test]
fn criterion_2_oracle_accuracy() {
    let start = Instant::now();
    let sep2 = 2.0 * 2f64.sqrt();
    let cases: [(usize, Vec<Vec<f64>>, Vec<Vec<f64>>); 4] = [
        (1, vec![vec![0.0]], grid_1d(-3.0, 3.0, 100)),
        (1, vec![vec![0.0], vec![2.0]], grid_1d(-2.0, 4.0, 100)),
        (
            2,
            vec![vec![0.0, 0.0]],
            grid_2d(-2.0, 2.0, -2.0, 2.0, 10),
        ),
        (
            2,
            vec![vec![0.0, 0.0], vec![sep2, 0.0]],
            grid_2d(-2.0, sep2 + 2.0, -2.0, 2.0, 10),
        ),
    ];
    let mut counts = Vec::new();
    let mut worst_err: f64 = 0.0;
    for (case, (dbar, centers, grid)) in cases.iter().enumerate() {
        let dbar = *dbar;
        let params =
            MixtureParams::new(dbar, centers.clone(), uniform_weights(centers.len()), 1.0)
                .unwrap();
        let kernel = DeconvKernel::new(dbar, C2_DELTA_BAR, C2_KERNEL_K, C2_C35).unwrap();
        let tol = C2_TOL_FRAC * kernel_peak(dbar, C2_DELTA_BAR);
        let mut hits = 0usize;
        for s in 0..C2_SEEDS {
            let samples = sample_mixture(
                &params,
                C2_N,
                stream_id(&[2_000, case as u64, s as u64, 1]),
            )
            .unwrap();
            let draw = draw_frequencies(
                &kernel,
                &samples,
                C2_M,
                stream_id(&[2_000, case as u64, s as u64, 2]),
            )
            .unwrap();
            let max_err = grid
                .iter()
                .map(|x| {
                    (oracle_eval(&draw, &kernel, x).value
                        - exact_smoothed(&params, C2_DELTA_BAR, x))
                    .abs()
                })
                .fold(0.0, f64::max);
            worst_err = worst_err.max(max_err);
            hits += usize::from(max_err <= tol);
        }
        counts.push((case, dbar, centers.len(), hits, tol));
    }

    // Error-scaling probe: one fixed sample set, fresh frequency draws.
    let params = MixtureParams::new(1, vec![vec![0.0], vec![2.0]], vec![0.5, 0.5], 1.0).unwrap();
    let samples = sample_mixture(&params, C2_N, stream_id(&[2_100, 0])).unwrap();
    let kernel = DeconvKernel::new(1, C2_DELTA_BAR, C2_KERNEL_K, C2_C35).unwrap();
    let probe = vec![0.0];
    let spread = |m: usize, tag: u64| -> f64 {
        let vals: Vec<f64> = (0..C2_SCALE_REPS)
            .map(|r| {
                let draw =
                    draw_frequencies(&kernel, &samples, m, stream_id(&[2_100, tag, r as u64]))
                        .unwrap();
                oracle_eval(&draw, &kernel, &probe).value
            })
            .collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (vals.len() - 1) as f64)
            .sqrt()
    };
    let ratio = spread(C2_SCALE_M[0], 1) / spread(C2_SCALE_M[1], 2);
    let scaling_ok = ratio >= C2_SCALE_BAND.0 && ratio <= C2_SCALE_BAND.1;

    let el = start.elapsed().as_secs_f64();
    let accuracy_ok = counts.iter().all(|&(_, _, _, hits, _)| hits >= C2_NEED);
    let detail: Vec<String> = counts
        .iter()
        .map(|&(_, dbar, k0, hits, tol)| {
            format!("d{dbar}/k{k0}: {hits}/{C2_SEEDS} within {tol:.4}")
        })
        .collect();
    println!(
        "criterion 2 (oracle accuracy): {} {}; worst max-err {:.4}; 1/sqrt(m) spread ratio {:.2} in [{}, {}] [{:.1}s < {}s]",
        verdict(accuracy_ok && scaling_ok && el < C2_BUDGET_S),
        detail.join(", "),
        worst_err,
        ratio,
        C2_SCALE_BAND.0,
        C2_SCALE_BAND.1,
        el,
        C2_BUDGET_S
    );
    assert!(scaling_ok, "spread ratio {ratio:.2} outside band");
    assert!(el < C2_BUDGET_S, "ran {el:.1}s");
    assert!(
        accuracy_ok,
        "a case fell below {C2_NEED}/{C2_SEEDS}: {detail:?}"
    );
}

// --- criterion 3: true spikes, no false spikes ------------------------------

const C3_INSTANCES: usize = 20;
const C3_CELLS: [(usize, usize); 6] = [(2, 2), (2, 4), (2, 8), (3, 2), (3, 4), (3, 8)];
const C3_SEPARATION: f64 = 2.0;
const C3_EPS: f64 = 1e-4;
const C3_BUDGET_S: f64 = 600.0;

/// Rejection-samples k0 points in [-half, half]^d with pairwise distance at
/// least min_sep.
fn separated_centers(
    d: usize,
    k0: usize,
    min_sep: f64,
    half: f64,
    rng: &mut impl Rng,
) -> Vec<Vec<f64>> {
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k0);
    for _ in 0..200_000 {
        let cand: Vec<f64> = (0..d).map(|_| rng.gen_range(-half..half)).collect();
        if centers.iter().all(|c| dist(c, &cand) >= min_sep) {
            centers.push(cand);
            if centers.len() == k0 {
                return centers;
            }
        }
    }
    panic!("could not place {k0} centers at separation {min_sep} in half-width {half}");
}

#[test]
fn criterion_3_exact_oracle_spike_recovery() {
    let start = Instant::now();
    let constants = ConstantsConfig::default();
    let separation = SeparationSpec::new(C3_SEPARATION, constants.c3_2).unwrap();
    let mut failures = Vec::new();
    let mut worst_ratio: f64 = 0.0;
    for i in 0..C3_INSTANCES {
        let (dbar, k0) = C3_CELLS[i % C3_CELLS.len()];
        let min_sep = C3_SEPARATION * (dbar as f64).sqrt();
        let half = min_sep * (1.0 + 0.75 * (k0 as f64).powf(1.0 / dbar as f64));
        let mut rng = stream_rng(4_000 + i as u64, 0);
        let centers = separated_centers(dbar, k0, min_sep, half, &mut rng);
        let params = MixtureParams::new(dbar, centers, uniform_weights(k0), 1.0).unwrap();
        let cfg = FindSpikesConfig {
            k: k0,
            w_min: 1.0 / k0 as f64,
            separation,
            constants,
            scale: LatticeScale::Practice,
            seed_mode: SeedMode::Lattice,
            runs: 1,
            eps: C3_EPS,
            lattice_cap: 10_000_000,
            seed: stream_id(&[4_100, i as u64]),
        };
        let oracle = OracleSource::Exact {
            params: &params,
            delta_bar: separation.delta_bar,
        };
        let tol = constants.c * (dbar as f64).powf(-2.5);
        match find_spikes(&oracle, &params.centers, &cfg) {
            Ok(runs) => {
                let points = &runs[0].points;
                if points.len() != k0 {
                    failures.push(format!("i{i} d{dbar} k{k0}: {} candidates", points.len()));
                    continue;
                }
                let mut used = vec![false; k0];
                for p in points {
                    let (best, err) = params
                        .centers
                        .iter()
                        .enumerate()
                        .map(|(j, c)| (j, dist(p, c)))
                        .min_by(|a, b| a.1.total_cmp(&b.1))
                        .unwrap();
                    if err > tol || used[best] {
                        failures.push(format!(
                            "i{i} d{dbar} k{k0}: err {err:.4} tol {tol:.4} dup {}",
                            used[best]
                        ));
                        break;
                    }
                    used[best] = true;
                    worst_ratio = worst_ratio.max(err / tol);
                }
            }
            Err(e) => failures.push(format!("i{i} d{dbar} k{k0}: {e}")),
        }
    }
    let el = start.elapsed().as_secs_f64();
    let pass = failures.is_empty();
    println!(
        "criterion 3 (exact-oracle spikes): {} {}/{} instances, worst err/tol {:.2} [{:.1}s < {}s]",
        verdict(pass && el < C3_BUDGET_S),
        C3_INSTANCES - failures.len(),
        C3_INSTANCES,
        worst_ratio,
        el,
        C3_BUDGET_S
    );
    assert!(pass, "failures: {failures:?}");
    assert!(el < C3_BUDGET_S, "ran {el:.1}s");
}

// --- criterion 4: end-to-end recovery ---------------------------------------

const C4_TRIALS: usize = 8;
const C4_RATE: f64 = 0.85;
const C4_BUDGET_S: f64 = 1_800.0;

struct Cell {
    d: usize,
    k0: usize,
    n: usize,
    m: usize,
    m_aug: usize,
    boost_runs: usize,
    aug_runs: usize,
    anchor_budget: usize,
    c1_5: f64,
}

#[rustfmt::skip]
const C4_CELLS: [Cell; 9] = [
    Cell { d: 2, k0: 2, n: 10_000, m: 1_200, m_aug: 0, boost_runs: 3, aug_runs: 0, anchor_budget: 120, c1_5: 2.0 },
    Cell { d: 2, k0: 4, n: 15_000, m: 2_400, m_aug: 0, boost_runs: 3, aug_runs: 0, anchor_budget: 160, c1_5: 1.5 },
    Cell { d: 2, k0: 8, n: 20_000, m: 4_000, m_aug: 0, boost_runs: 3, aug_runs: 0, anchor_budget: 200, c1_5: 1.4 },
    Cell { d: 8, k0: 2, n: 10_000, m: 1_200, m_aug: 0, boost_runs: 3, aug_runs: 0, anchor_budget: 120, c1_5: 2.0 },
    Cell { d: 8, k0: 4, n: 30_000, m: 2_500, m_aug: 8_000, boost_runs: 3, aug_runs: 2, anchor_budget: 140, c1_5: 1.5 },
    Cell { d: 8, k0: 8, n: 30_000, m: 5_000, m_aug: 12_000, boost_runs: 3, aug_runs: 1, anchor_budget: 200, c1_5: 1.4 },
    Cell { d: 16, k0: 2, n: 10_000, m: 1_200, m_aug: 0, boost_runs: 3, aug_runs: 0, anchor_budget: 120, c1_5: 2.0 },
    Cell { d: 16, k0: 4, n: 40_000, m: 2_500, m_aug: 6_000, boost_runs: 3, aug_runs: 2, anchor_budget: 140, c1_5: 1.5 },
    Cell { d: 16, k0: 8, n: 40_000, m: 5_000, m_aug: 12_000, boost_runs: 3, aug_runs: 1, anchor_budget: 200, c1_5: 1.4 },
];

#[test]
fn criterion_4_end_to_end_recovery() {
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut budgets = Vec::new();
    let mut pass = true;
    for (ci, cell) in C4_CELLS.iter().enumerate() {
        let config = ExperimentConfig {
            mixture: MixtureSource::Generator(GeneratorSpec {
                d: cell.d,
                k0: cell.k0,
                separation_multiplier: 2.0,
                weights: WeightScheme::Uniform,
                sigma: 1.0,
            }),
            n: cell.n,
            trials: C4_TRIALS,
            mode: Mode::Practice,
            constants: ConstantsConfig {
                c1_5: cell.c1_5,
                ..ConstantsConfig::default()
            },
            scale: LatticeScale::Practice,
            seed_mode: SeedMode::Samples,
            m: cell.m,
            m_aug: cell.m_aug,
            boost_runs: cell.boost_runs,
            aug_runs: cell.aug_runs,
            refine_iters: 25,
            anchor_budget: cell.anchor_budget,
            eps: 1e-3,
            lattice_cap: 2_000_000,
            acceptance: true,
            seed: 5_000 + ci as u64,
        };
        let report = run_experiment(&config).unwrap();
        let ok = report.success_rate >= C4_RATE;
        pass &= ok;
        lines.push(format!(
            "d{}/k{}: {:.0}%{}",
            cell.d,
            cell.k0,
            100.0 * report.success_rate,
            if ok { "" } else { "!" }
        ));
        if cell.d == 2 {
            budgets.push(format!(
                "k{}: theory m={} n={} (practice m={} n={})",
                cell.k0, report.theory_m, report.theory_n, cell.m, cell.n
            ));
        }
    }
    let el = start.elapsed().as_secs_f64();
    println!(
        "criterion 4 (end-to-end recovery): {} {} [{:.0}s < {}s]",
        verdict(pass && el < C4_BUDGET_S),
        lines.join(", "),
        el,
        C4_BUDGET_S
    );
    for b in &budgets {
        println!("  reference budgets {b}");
    }
    assert!(pass, "a cell fell below {C4_RATE}: {lines:?}");
    assert!(el < C4_BUDGET_S, "ran {el:.1}s");
}

// --- criterion 5: coverage sample size --------------------------------------

const C5_CELLS: [(usize, usize); 4] = [(4, 2), (4, 8), (16, 2), (16, 8)];
const C5_TRIALS: usize = 100;
const C5_NEED: usize = 97;
const C5_BUDGET_S: f64 = 120.0;

#[test]
fn criterion_5_coverage_sample_size() {
    let start = Instant::now();
    let constants = ConstantsConfig::default();
    let mut lines = Vec::new();
    let mut pass = true;
    for (ci, &(k, d)) in C5_CELLS.iter().enumerate() {
        let n = coverage_sample_size(k, constants.c, constants.eta).unwrap();
        let radius = 2.0 * (d as f64).sqrt();
        let source = MixtureSource::Generator(GeneratorSpec {
            d,
            k0: k,
            separation_multiplier: 2.0,
            weights: WeightScheme::Uniform,
            sigma: 1.0,
        });
        let mut hits = 0usize;
        for s in 0..C5_TRIALS {
            let params = source.instantiate(stream_id(&[6_000, ci as u64, s as u64])).unwrap();
            let samples =
                sample_mixture(&params, n, stream_id(&[6_001, ci as u64, s as u64])).unwrap();
            let covered = params
                .centers
                .iter()
                .all(|c| samples.points.iter().any(|p| dist(c, p) <= radius));
            hits += usize::from(covered);
        }
        pass &= hits >= C5_NEED;
        lines.push(format!("k{k}/d{d} (n={n}): {hits}/{C5_TRIALS}"));
    }
    let el = start.elapsed().as_secs_f64();
    println!(
        "criterion 5 (coverage): {} {} [{:.1}s < {}s]",
        verdict(pass && el < C5_BUDGET_S),
        lines.join(", "),
        el,
        C5_BUDGET_S
    );
    assert!(pass, "a cell fell below {C5_NEED}/{C5_TRIALS}: {lines:?}");
    assert!(el < C5_BUDGET_S, "ran {el:.1}s");
}

// --- criterion 6: far clusters never merge ----------------------------------

const C6_DIST_MULT: f64 = 50.0;
const C6_N: usize = 1_500;
const C6_TRIALS_PER_D: usize = 50;
const C6_NEED: usize = 95;
const C6_BUDGET_S: f64 = 60.0;

#[test]
fn criterion_6_far_clusters_split_cleanly() {
    let start = Instant::now();
    let constants = ConstantsConfig::default();
    let mut hits = 0usize;
    let mut total = 0usize;
    for &d in &[2usize, 8] {
        let gap = C6_DIST_MULT * (d as f64).sqrt();
        let mut far = vec![0.0; d];
        far[0] = gap;
        let params =
            MixtureParams::new(d, vec![vec![0.0; d], far], vec![0.5, 0.5], 1.0).unwrap();
        let threshold = proximity_threshold(d, C6_N, constants.c1).unwrap();
        for s in 0..C6_TRIALS_PER_D {
            total += 1;
            let samples =
                sample_mixture(&params, C6_N, stream_id(&[7_000, d as u64, s as u64])).unwrap();
            let labels = samples.labels.clone().unwrap();
            let dec = split_clusters(&samples, threshold).unwrap();
            if dec.components.len() != 2 {
                continue;
            }
            let pure = dec.components.iter().all(|comp| {
                let first = labels[comp[0]];
                comp.iter().all(|&i| labels[i] == first)
            });
            let distinct = labels[dec.components[0][0]] != labels[dec.components[1][0]];
            hits += usize::from(pure && distinct);
        }
    }
    let el = start.elapsed().as_secs_f64();
    let pass = hits >= C6_NEED;
    println!(
        "criterion 6 (far-cluster splitting): {} {hits}/{total} clean splits [{:.1}s < {}s]",
        verdict(pass && el < C6_BUDGET_S),
        el,
        C6_BUDGET_S
    );
    assert!(pass, "{hits}/{total} below {C6_NEED}");
    assert!(el < C6_BUDGET_S, "ran {el:.1}s");
}

// --- criterion 7: property suite ---------------------------------------------

const C7_CASES: u32 = 128;

fn prop_runner(tag: u8) -> TestRunner {
    TestRunner::new_with_rng(
        PropConfig {
            cases: C7_CASES,
            failure_persistence: None,
            ..PropConfig::default()
        },
        TestRng::from_seed(RngAlgorithm::ChaCha, &[tag; 32]),
    )
}

fn describe<T: std::fmt::Debug>(name: &str, r: Result<(), TestError<T>>) -> (bool, String) {
    match r {
        Ok(()) => (true, format!("{name} ok")),
        Err(TestError::Fail(reason, value)) => {
            (false, format!("{name} FAILED: {reason} on {value:?}"))
        }
        Err(TestError::Abort(reason)) => (false, format!("{name} ABORTED: {reason}")),
    }
}

fn ecf_modulus_property() -> (bool, String) {
    let strategy = (1usize..=3).prop_flat_map(|d| {
        (
            Just(d),
            prop::collection::vec(prop::collection::vec(-50.0..50.0f64, d), 1..50),
            prop::collection::vec(-8.0..8.0f64, d),
        )
    });
    let r = prop_runner(1).run(&strategy, |(d, points, w)| {
        let samples = SampleSet::new(points, None, 0).unwrap();
        let bound = (2.0 * PI).powf(-(d as f64) / 2.0);
        prop_assert!(ecf(&samples, &w).norm() <= bound * (1.0 + 1e-12));
        Ok(())
    });
    describe("ecf-modulus", r)
}

fn dedup_separation_property() -> (bool, String) {
    let strategy = (1usize..=3).prop_flat_map(|d| {
        (
            prop::collection::vec(prop::collection::vec(-5.0..5.0f64, d), 1..60),
            0.05..2.0f64,
        )
    });
    let r = prop_runner(2).run(&strategy, |(points, radius)| {
        let cands: Vec<SpikeCandidate> = points
            .iter()
            .map(|p| SpikeCandidate {
                seed: p.clone(),
                maximizer: p.clone(),
                value: 1.0,
                moved_far: false,
            })
            .collect();
        let kept = dedup(&cands, radius);
        for (i, a) in kept.iter().enumerate() {
            for b in &kept[i + 1..] {
                prop_assert!(dist(&a.seed, &b.seed) > radius);
            }
        }
        for c in &cands {
            prop_assert!(kept.iter().any(|k| dist(&k.seed, &c.seed) <= radius));
        }
        prop_assert_eq!(dedup(&kept, radius).len(), kept.len());
        Ok(())
    });
    describe("dedup-separation", r)
}

fn em_monotone_property() -> (bool, String) {
    let strategy = (1usize..=2, 1usize..=3).prop_flat_map(|(d, k)| {
        (
            Just(d),
            prop::collection::vec(prop::collection::vec(-4.0..4.0f64, d), 8..40),
            prop::collection::vec(prop::collection::vec(-4.0..4.0f64, d), k..=k),
            prop::collection::vec(0.05..1.0f64, k..=k),
            0.5..1.5f64,
        )
    });
    let r = prop_runner(3).run(&strategy, |(_, points, centers, raw_w, sigma)| {
        let total: f64 = raw_w.iter().sum();
        let weights: Vec<f64> = raw_w.iter().map(|w| w / total).collect();
        let samples = SampleSet::new(points, None, 0).unwrap();
        let mut current = centers;
        let mut prev = mixture_nll(&samples, &current, &weights, sigma).unwrap();
        for _ in 0..5 {
            match refine(&samples, &current, &weights, sigma, 1) {
                Ok(next) => current = next,
                Err(_) => {
                    return Err(proptest::test_runner::TestCaseError::reject(
                        "starved component",
                    ))
                }
            }
            let nll = mixture_nll(&samples, &current, &weights, sigma).unwrap();
            prop_assert!(nll <= prev + 1e-9 * prev.abs().max(1.0));
            prev = nll;
        }
        Ok(())
    });
    describe("em-monotone-nll", r)
}

fn boost_majority_property() -> (bool, String) {
    let strategy = (1usize..=2, 1usize..=3, 0usize..=2, 0usize..=1).prop_flat_map(
        |(dbar, k0, garbage, extra)| {
            let honest = garbage + 1 + extra;
            (
                Just(dbar),
                Just(k0),
                Just(garbage),
                Just(honest),
                3.0..6.0f64,
                0.2..0.8f64,
                prop::collection::vec(-1.0..1.0f64, honest * k0 * dbar),
                prop::collection::vec(prop::bool::ANY, garbage.max(1)),
            )
        },
    );
    let r = prop_runner(4).run(
        &strategy,
        |(dbar, k0, garbage, honest, sep, tol, jitter, far_mode)| {
            let truth: Vec<Vec<f64>> = (0..k0)
                .map(|i| {
                    let mut c = vec![0.0; dbar];
                    c[0] = i as f64 * sep;
                    c
                })
                .collect();
            let scale = tol / (2.0 * (dbar as f64).sqrt());
            let mut runs = Vec::new();
            for h in 0..honest {
                let centers: Vec<Vec<f64>> = truth
                    .iter()
                    .enumerate()
                    .map(|(i, c)| {
                        c.iter()
                            .enumerate()
                            .map(|(t, v)| v + scale * jitter[(h * k0 + i) * dbar + t])
                            .collect()
                    })
                    .collect();
                runs.push(centers);
            }
            for g in 0..garbage {
                let mut centers: Vec<Vec<f64>> = truth
                    .iter()
                    .map(|c| {
                        let mut p = c.clone();
                        p[0] += 10.0 * tol;
                        p
                    })
                    .collect();
                if far_mode[g] {
                    // Wrong cardinality: one extra point far below the span.
                    let mut stray = vec![0.0; dbar];
                    stray[0] = -20.0 * tol;
                    centers.push(stray);
                }
                runs.push(centers);
            }
            let outputs: Vec<RunOutput> = runs
                .into_iter()
                .enumerate()
                .map(|(i, centers)| RunOutput {
                    centers,
                    run_id: i,
                    diagnostics: RunDiagnostics {
                        seeds: 0,
                        maximized: 0,
                        survivors: 0,
                        attempt: 0,
                    },
                })
                .collect();
            let picked = boost(&outputs, tol).unwrap();
            prop_assert_eq!(picked.len(), k0);
            prop_assert!(hausdorff(&picked, &truth).unwrap() <= tol);

            // Consensus is order-insensitive: reversed run ids pick an
            // equivalent (honest) run.
            let reversed: Vec<RunOutput> = outputs
                .into_iter()
                .rev()
                .enumerate()
                .map(|(i, mut r)| {
                    r.run_id = i;
                    r
                })
                .collect();
            let picked = boost(&reversed, tol).unwrap();
            prop_assert_eq!(picked.len(), k0);
            prop_assert!(hausdorff(&picked, &truth).unwrap() <= tol);
            Ok(())
        },
    );
    describe("boost-majority", r)
}

fn lattice_count_property() -> (bool, String) {
    let strategy = (1usize..=3).prop_flat_map(|d| {
        (
            Just(d),
            0.15..0.4f64,
            1.5..3.0f64,
            0.5..1.5f64,
            prop::collection::vec(prop::collection::vec(-2.0..2.0f64, d), 1..4),
        )
    });
    let r = prop_runner(5).run(&strategy, |(d, spacing, qmul, anchor_radius, centers)| {
        let spec = LatticeSpec {
            spacing,
            ball_radius_q: spacing * qmul,
            anchor_radius,
            centers: centers.clone(),
        };
        let count = enumerate_lattice(&spec, 1_000_000).unwrap().count();

        let r2 = anchor_radius * anchor_radius;
        let mut lo = vec![i64::MAX; d];
        let mut hi = vec![i64::MIN; d];
        for c in &centers {
            for (t, &v) in c.iter().enumerate() {
                lo[t] = lo[t].min(((v - anchor_radius) / spacing).floor() as i64 - 1);
                hi[t] = hi[t].max(((v + anchor_radius) / spacing).ceil() as i64 + 1);
            }
        }
        let mut brute = 0usize;
        let mut idx = lo.clone();
        'outer: loop {
            let p: Vec<f64> = idx.iter().map(|&i| i as f64 * spacing).collect();
            let inside = centers.iter().any(|c| {
                p.iter()
                    .zip(c)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    <= r2
            });
            brute += usize::from(inside);
            let mut t = d;
            loop {
                if t == 0 {
                    break 'outer;
                }
                t -= 1;
                idx[t] += 1;
                if idx[t] <= hi[t] {
                    break;
                }
                idx[t] = lo[t];
            }
        }
        prop_assert_eq!(count, brute);
        Ok(())
    });
    describe("lattice-count", r)
}

#[test]
fn criterion_7_property_suite() {
    let start = Instant::now();
    let results = [
        ecf_modulus_property(),
        dedup_separation_property(),
        em_monotone_property(),
        boost_majority_property(),
        lattice_count_property(),
    ];
    let el = start.elapsed().as_secs_f64();
    let pass = results.iter().all(|(ok, _)| *ok);
    let detail: Vec<&str> = results.iter().map(|(_, d)| d.as_str()).collect();
    println!(
        "criterion 7 (property suite): {} {} [{:.1}s]",
        verdict(pass),
        detail.join(", "),
        el
    );
    assert!(pass, "{detail:?}");
}
