//! Fourier machinery: the truncated frequency kernel, the empirical
//! characteristic function, uniform frequency draws in the kernel ball, and
//! the Monte-Carlo pointwise oracle for the deconvolved-then-resmoothed
//! density.
//!
//! Writing gamma for the standard Gaussian density, the target function is
//! (gamma_db * nu)(x) where nu is the atomic measure on the centers. The
//! oracle estimates it as a Monte-Carlo average of
//! e^(i x.z) gamma(z db) e^(|z|^2/2) ecf(z) over frequencies z drawn
//! uniformly in the kernel ball, scaled by the ball volume. The Gaussian
//! reciprocal e^(|z|^2/2) undoes the sample blur; the narrow-Gaussian
//! factor re-smooths at width db so spikes stay separated.

use crate::config::ConstantsConfig;
use crate::error::{Error, Result};
use crate::model::{MixtureParams, SampleSet};
use crate::rng::stream_rng;
use crate::trig::{sincos_acc_chunk, sincos_wacc_chunk, CHUNK, LANES};
use num_bigint::BigUint;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::{LN_2, PI};

/// Truncated narrow-Gaussian frequency kernel and its support ball.
#[derive(Clone, Debug, PartialEq)]
pub struct DeconvKernel {
    /// Working dimension.
    pub dbar: usize,
    /// Re-smoothing width (separation over the width constant).
    pub delta_bar: f64,
    /// Support-ball radius (sqrt(C3_5 ln k) + sqrt(dbar)) / delta_bar.
    pub radius: f64,
    /// Truncation constant governing the fidelity bound.
    pub c3_5: f64,
    /// Lebesgue volume of the support ball.
    pub vol_b: f64,
}

/// Volume of the unit ball in `d` dimensions.
pub fn unit_ball_volume(d: usize) -> f64 {
    let even = d.is_multiple_of(2);
    let mut v = if even { 1.0 } else { 2.0 };
    let mut i = if even { 2 } else { 3 };
    while i <= d {
        v *= 2.0 * PI / i as f64;
        i += 2;
    }
    v
}

/// Peak value (2 pi delta_bar^2)^(-dbar/2) of the width-delta_bar Gaussian.
pub fn kernel_peak(dbar: usize, delta_bar: f64) -> f64 {
    (2.0 * PI * delta_bar * delta_bar).powf(-(dbar as f64) / 2.0)
}

impl DeconvKernel {
    pub fn new(dbar: usize, delta_bar: f64, k: usize, c3_5: f64) -> Result<Self> {
        if dbar < 1 || k < 1 {
            return Err(Error::Domain(format!(
                "kernel needs dbar >= 1 and k >= 1, got {dbar}, {k}"
            )));
        }
        if !delta_bar.is_finite() || delta_bar <= 0.0 || !c3_5.is_finite() || c3_5 <= 0.0 {
            return Err(Error::Domain(format!(
                "kernel needs positive delta_bar and C3_5, got {delta_bar}, {c3_5}"
            )));
        }
        let radius = ((c3_5 * (k as f64).ln()).sqrt() + (dbar as f64).sqrt()) / delta_bar;
        let vol_b = unit_ball_volume(dbar) * radius.powi(dbar as i32);
        Ok(DeconvKernel {
            dbar,
            delta_bar,
            radius,
            c3_5,
            vol_b,
        })
    }
}

/// Truncated kernel value (2 pi)^(-dbar/2) e^(-delta_bar^2 |w|^2 / 2) inside
/// the support ball, zero outside.
pub fn s_hat(kernel: &DeconvKernel, w: &[f64]) -> f64 {
    let r2: f64 = w.iter().map(|v| v * v).sum();
    if r2.sqrt() > kernel.radius {
        return 0.0;
    }
    let d = kernel.dbar as f64;
    (2.0 * PI).powf(-d / 2.0) * (-kernel.delta_bar * kernel.delta_bar * r2 / 2.0).exp()
}

/// Empirical characteristic function
/// (2 pi)^(-d/2) (1/n) sum_j e^(-i w.x_j).
pub fn ecf(samples: &SampleSet, w: &[f64]) -> Complex64 {
    let d = samples.d() as f64;
    let scale = (2.0 * PI).powf(-d / 2.0) / samples.n() as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for p in &samples.points {
        let phase: f64 = p.iter().zip(w).map(|(a, b)| a * b).sum();
        acc += Complex64::new(phase.cos(), -phase.sin());
    }
    scale * acc
}

/// Characteristic function of the mixture itself, for oracle comparisons:
/// (2 pi)^(-d/2) sum_j w_j e^(-i z.y_j) e^(-sigma^2 |z|^2 / 2).
pub fn exact_cf(params: &MixtureParams, z: &[f64]) -> Complex64 {
    let d = params.d as f64;
    let z2: f64 = z.iter().map(|v| v * v).sum();
    let damp = (-params.sigma * params.sigma * z2 / 2.0).exp();
    let mut acc = Complex64::new(0.0, 0.0);
    for (y, &w) in params.centers.iter().zip(&params.weights) {
        let phase: f64 = y.iter().zip(z).map(|(a, b)| a * b).sum();
        acc += w * Complex64::new(phase.cos(), -phase.sin());
    }
    (2.0 * PI).powf(-d / 2.0) * damp * acc
}

/// Frequencies drawn uniformly in the kernel ball with the empirical
/// characteristic function precomputed at each of them.
#[derive(Clone, Debug)]
pub struct FrequencyDraw {
    /// Frequency points, all inside the kernel ball.
    pub points: Vec<Vec<f64>>,
    /// ECF of the active sample set at each point.
    pub ecf_values: Vec<Complex64>,
    /// Seed the draw was made from.
    pub seed: u64,
    /// Per-frequency coordinate columns for vectorized evaluation.
    z_cols: Vec<Vec<f64>>,
    /// Integrand magnitude vol/m * gamma(z db) e^(|z|^2/2) |ecf(z)|.
    weights: Vec<f64>,
    /// Integrand phase offset arg(ecf(z)).
    phase0: Vec<f64>,
}

/// Monte-Carlo oracle value at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleEstimate {
    /// Real part of the complex estimate; the quantity the pipeline uses.
    pub value: f64,
    /// Full complex estimate.
    pub raw: Complex64,
    /// Number of frequency points averaged.
    pub m_used: usize,
}

/// Sums e^(i sign theta) phasors of dot products against column data,
/// chunked for vectorization. Returns (sum cos, sum sin).
fn phasor_sum(z: &[f64], cols: &[Vec<f64>], offsets: Option<&[f64]>) -> (f64, f64) {
    let n = cols[0].len();
    let mut theta = [0.0; CHUNK];
    let (mut acc_c, mut acc_s) = ([0.0; LANES], [0.0; LANES]);
    let mut padded = 0usize;
    let mut j = 0;
    while j < n {
        let len = CHUNK.min(n - j);
        match cols.len() {
            1 => {
                let c0 = &cols[0][j..j + len];
                for i in 0..len {
                    theta[i] = z[0] * c0[i];
                }
            }
            2 => {
                let c0 = &cols[0][j..j + len];
                let c1 = &cols[1][j..j + len];
                for i in 0..len {
                    theta[i] = z[0] * c0[i] + z[1] * c1[i];
                }
            }
            _ => {
                for i in 0..len {
                    let mut ph = 0.0;
                    for (t, col) in cols.iter().enumerate() {
                        ph += z[t] * col[j + i];
                    }
                    theta[i] = ph;
                }
            }
        }
        if let Some(off) = offsets {
            for i in 0..len {
                theta[i] += off[j + i];
            }
        }
        for t in theta[len..].iter_mut() {
            *t = 0.0;
        }
        padded += CHUNK - len;
        sincos_acc_chunk(&theta, &mut acc_c, &mut acc_s);
        j += len;
    }
    // padded zero angles contribute exactly (1, 0) each
    let sum_c = acc_c.iter().sum::<f64>() - padded as f64;
    let sum_s = acc_s.iter().sum::<f64>();
    (sum_c, sum_s)
}

/// Draws `m` frequencies uniformly from the kernel ball (radial inverse CDF
/// times a normalized Gaussian direction) and precomputes the ECF at each,
/// so later pointwise evaluations cost O(m) instead of O(m n).
pub fn draw_frequencies(
    kernel: &DeconvKernel,
    samples: &SampleSet,
    m: usize,
    seed: u64,
) -> Result<FrequencyDraw> {
    if m < 1 {
        return Err(Error::Domain("frequency draw needs m >= 1".into()));
    }
    if samples.d() != kernel.dbar {
        return Err(Error::Domain(format!(
            "samples have dimension {}, kernel expects {}",
            samples.d(),
            kernel.dbar
        )));
    }
    let dbar = kernel.dbar;
    let mut rng = stream_rng(seed, 2);
    let mut points = Vec::with_capacity(m);
    for _ in 0..m {
        let mut dir: Vec<f64>;
        let mut norm2: f64;
        loop {
            dir = (0..dbar).map(|_| rng.sample(StandardNormal)).collect();
            norm2 = dir.iter().map(|v| v * v).sum();
            if norm2 > 0.0 {
                break;
            }
        }
        let u: f64 = rng.gen();
        let r = kernel.radius * u.powf(1.0 / dbar as f64);
        let scale = r / norm2.sqrt();
        points.push(dir.into_iter().map(|v| v * scale).collect::<Vec<f64>>());
    }

    let n = samples.n();
    let sample_cols: Vec<Vec<f64>> = (0..dbar)
        .map(|t| samples.points.iter().map(|p| p[t]).collect())
        .collect();
    let ecf_scale = (2.0 * PI).powf(-(dbar as f64) / 2.0) / n as f64;
    let mut ecf_values = Vec::with_capacity(m);
    for z in &points {
        let (sc, ss) = phasor_sum(z, &sample_cols, None);
        ecf_values.push(Complex64::new(sc * ecf_scale, -ss * ecf_scale));
    }

    let ln_gamma_const = -(dbar as f64) / 2.0 * (2.0 * PI).ln();
    let ln_vol_m = kernel.vol_b.ln() - (m as f64).ln();
    let db2 = kernel.delta_bar * kernel.delta_bar;
    let mut weights = Vec::with_capacity(m);
    let mut phase0 = Vec::with_capacity(m);
    for (z, e) in points.iter().zip(&ecf_values) {
        let z2: f64 = z.iter().map(|v| v * v).sum();
        let mag = e.norm();
        if mag == 0.0 {
            weights.push(0.0);
            phase0.push(0.0);
        } else {
            let ln_w = ln_vol_m + ln_gamma_const - db2 * z2 / 2.0 + z2 / 2.0 + mag.ln();
            weights.push(ln_w.exp());
            phase0.push(e.im.atan2(e.re));
        }
    }
    let z_cols: Vec<Vec<f64>> = (0..dbar)
        .map(|t| points.iter().map(|p| p[t]).collect())
        .collect();
    Ok(FrequencyDraw {
        points,
        ecf_values,
        seed,
        z_cols,
        weights,
        phase0,
    })
}

/// Monte-Carlo estimate of (gamma_db * nu)(x) from a frequency draw:
/// (vol/m) sum_l e^(i x.z_l) gamma(z_l db) e^(|z_l|^2/2) ecf(z_l).
/// `kernel` must be the one the draw was made with.
pub fn oracle_eval(draw: &FrequencyDraw, kernel: &DeconvKernel, x: &[f64]) -> OracleEstimate {
    assert_eq!(x.len(), kernel.dbar, "probe dimension mismatch");
    let m = draw.points.len();
    let mut theta = [0.0; CHUNK];
    let mut wbuf = [0.0; CHUNK];
    let (mut acc_re, mut acc_im) = ([0.0; LANES], [0.0; LANES]);
    let mut l = 0;
    while l < m {
        let len = CHUNK.min(m - l);
        match kernel.dbar {
            1 => {
                let c0 = &draw.z_cols[0][l..l + len];
                let p0 = &draw.phase0[l..l + len];
                for i in 0..len {
                    theta[i] = x[0] * c0[i] + p0[i];
                }
            }
            2 => {
                let c0 = &draw.z_cols[0][l..l + len];
                let c1 = &draw.z_cols[1][l..l + len];
                let p0 = &draw.phase0[l..l + len];
                for i in 0..len {
                    theta[i] = x[0] * c0[i] + x[1] * c1[i] + p0[i];
                }
            }
            _ => {
                for i in 0..len {
                    let mut ph = draw.phase0[l + i];
                    for (t, col) in draw.z_cols.iter().enumerate() {
                        ph += x[t] * col[l + i];
                    }
                    theta[i] = ph;
                }
            }
        }
        for t in theta[len..].iter_mut() {
            *t = 0.0;
        }
        wbuf[..len].copy_from_slice(&draw.weights[l..l + len]);
        for w in wbuf[len..].iter_mut() {
            *w = 0.0;
        }
        sincos_wacc_chunk(&theta, &wbuf, &mut acc_re, &mut acc_im);
        l += len;
    }
    let raw = Complex64::new(acc_re.iter().sum(), acc_im.iter().sum());
    OracleEstimate {
        value: raw.re,
        raw,
        m_used: m,
    }
}

/// One integrand term of the oracle average, with the characteristic
/// function supplied explicitly. Used to validate normalization by
/// quadrature.
#[cfg(test)]
fn oracle_integrand(kernel: &DeconvKernel, z: &[f64], phi: Complex64, x: &[f64]) -> Complex64 {
    let z2: f64 = z.iter().map(|v| v * v).sum();
    let d = kernel.dbar as f64;
    let gamma = (2.0 * PI).powf(-d / 2.0) * (-kernel.delta_bar * kernel.delta_bar * z2 / 2.0).exp();
    let phase: f64 = x.iter().zip(z).map(|(a, b)| a * b).sum();
    Complex64::new(phase.cos(), phase.sin()) * gamma * (z2 / 2.0).exp() * phi
}

/// Ground-truth smoothed density (gamma_db * nu)(x) =
/// sum_j w_j (2 pi db^2)^(-d/2) e^(-|x - y_j|^2 / (2 db^2)). Test oracle;
/// sigma plays no role because nu is the atomic measure on the centers.
pub fn exact_smoothed(params: &MixtureParams, delta_bar: f64, x: &[f64]) -> f64 {
    assert_eq!(x.len(), params.d, "probe dimension mismatch");
    let peak = kernel_peak(params.d, delta_bar);
    let db2 = delta_bar * delta_bar;
    params
        .centers
        .iter()
        .zip(&params.weights)
        .map(|(y, &w)| {
            let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            w * peak * (-d2 / (2.0 * db2)).exp()
        })
        .sum()
}

/// Closed-form bound (2 pi db^2)^(-dbar/2) k^(-C3_5/2) on the sup error
/// between the truncated kernel's inverse transform and the width-db
/// Gaussian.
pub fn kernel_fidelity_bound(kernel: &DeconvKernel, k: usize) -> Result<f64> {
    if k < 2 {
        return Err(Error::Domain(format!(
            "fidelity bound needs k >= 2, got {k}"
        )));
    }
    Ok(kernel_peak(kernel.dbar, kernel.delta_bar) * (k as f64).powf(-kernel.c3_5 / 2.0))
}

fn ceil_from_ln(ln_v: f64) -> BigUint {
    let log2 = ln_v / LN_2;
    if log2 < 52.0 {
        BigUint::from(ln_v.exp().ceil() as u64)
    } else {
        // reconstruct from a 53-bit mantissa; exactness is lost past 2^53
        // but magnitude never overflows
        let e = log2.floor() as u64;
        let frac = log2 - e as f64;
        let mant = (frac + 52.0).exp2().ceil() as u64;
        BigUint::from(mant) << (e - 52)
    }
}

/// Reference budgets m = C3_6 k^C3_6 ln k and
/// n = C3_6 k^(C3_6 + C3_5) ln(C3_6 k^(C3_6 + C3_5) ln k), as ceilings.
/// Arbitrary-precision output: honest constants make these astronomically
/// large, so they are for reports only, never for allocation.
pub fn theory_budgets(k: usize, cfg: &ConstantsConfig) -> Result<(BigUint, BigUint)> {
    if k < 2 {
        return Err(Error::Domain(format!(
            "theory budgets need k >= 2, got {k}"
        )));
    }
    let lnk = (k as f64).ln();
    let ln_m = cfg.c3_6.ln() + cfg.c3_6 * lnk + lnk.ln();
    let ln_p = cfg.c3_6.ln() + (cfg.c3_6 + cfg.c3_5) * lnk;
    let ln_inner = ln_p + lnk.ln();
    if ln_inner <= 0.0 {
        return Err(Error::Domain(
            "budget formula needs C3_6 k^(C3_6+C3_5) ln k > 1".into(),
        ));
    }
    let ln_n = ln_p + ln_inner.ln();
    Ok((ceil_from_ln(ln_m), ceil_from_ln(ln_n)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::sample_mixture;

    fn kernel(dbar: usize, delta_bar: f64, k: usize, c3_5: f64) -> DeconvKernel {
        DeconvKernel::new(dbar, delta_bar, k, c3_5).unwrap()
    }

    fn single_center(d: usize) -> MixtureParams {
        MixtureParams::new(d, vec![vec![0.0; d]], vec![1.0], 1.0).unwrap()
    }

    #[test]
    #[ignore = "throughput probe, run with --ignored --nocapture"]
    fn ecf_throughput_probe() {
        for dbar in [1usize, 2] {
            let params = single_center(dbar);
            let samples = sample_mixture(&params, 20_000, 5).unwrap();
            let ker = kernel(dbar, 0.5, 2, 0.5);
            let start = std::time::Instant::now();
            let draw = draw_frequencies(&ker, &samples, 20_000, 6).unwrap();
            let secs = start.elapsed().as_secs_f64();
            let pairs = 20_000.0 * 20_000.0;
            println!(
                "ecf dbar={dbar}: {secs:.3} s, {:.3} ns/pair (|ecf0| {:.4})",
                secs / pairs * 1e9,
                draw.ecf_values[0].norm()
            );
        }
    }

    #[test]
    fn ball_volume_closed_forms() {
        assert!((unit_ball_volume(1) - 2.0).abs() < 1e-12);
        assert!((unit_ball_volume(2) - PI).abs() < 1e-12);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-12);
        assert!((unit_ball_volume(5) - 8.0 * PI * PI / 15.0).abs() < 1e-12);
        let k = kernel(3, 0.5, 4, 2.0);
        let want = unit_ball_volume(3) * k.radius.powi(3);
        assert!((k.vol_b - want).abs() < 1e-9 * want);
    }

    #[test]
    fn s_hat_values() {
        let k = kernel(2, 1.0, 4, 2.0);
        assert!((s_hat(&k, &[0.0, 0.0]) - 1.0 / (2.0 * PI)).abs() < 1e-9);
        let outside = [k.radius * 1.01, 0.0];
        assert_eq!(s_hat(&k, &outside), 0.0);
        let k = kernel(2, 0.5, 4, 2.0);
        assert!((s_hat(&k, &[1.0, 0.0]) - 0.14045374).abs() < 1e-6);
    }

    #[test]
    fn ecf_values() {
        let s = SampleSet::new(vec![vec![1.0], vec![-2.5], vec![0.3]], None, 0).unwrap();
        let at0 = ecf(&s, &[0.0]);
        assert!((at0.re - (2.0 * PI).powf(-0.5)).abs() < 1e-12);
        assert!(at0.im.abs() < 1e-12);

        let origin = SampleSet::new(vec![vec![0.0]], None, 0).unwrap();
        for w in [0.1, 1.0, 7.3] {
            let v = ecf(&origin, &[w]);
            assert!((v.re - (2.0 * PI).powf(-0.5)).abs() < 1e-12);
            assert!(v.im.abs() < 1e-12);
        }

        // opposite phases cancel when the points sit at +-pi/(2w)
        let w = 1.3;
        let a = PI / (2.0 * w);
        let pair = SampleSet::new(vec![vec![a], vec![-a]], None, 0).unwrap();
        assert!(ecf(&pair, &[w]).norm() < 1e-12);
    }

    #[test]
    fn ecf_modulus_bound() {
        let params =
            MixtureParams::new(2, vec![vec![0.0, 0.0], vec![3.0, 1.0]], vec![0.5, 0.5], 1.0)
                .unwrap();
        let s = sample_mixture(&params, 500, 3).unwrap();
        let bound = (2.0 * PI).powf(-1.0) + 1e-12;
        let mut rng = stream_rng(4, 0);
        for _ in 0..500 {
            let w = [rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0)];
            assert!(ecf(&s, &w).norm() <= bound);
        }
    }

    #[test]
    fn draw_points_in_ball_and_deterministic() {
        let k = kernel(2, 0.5, 4, 2.0);
        let s = SampleSet::new(vec![vec![0.0, 0.0]], None, 0).unwrap();
        let d1 = draw_frequencies(&k, &s, 500, 9).unwrap();
        let d2 = draw_frequencies(&k, &s, 500, 9).unwrap();
        assert_eq!(d1.points, d2.points);
        assert_eq!(d1.ecf_values, d2.ecf_values);
        for z in &d1.points {
            let r: f64 = z.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(r <= k.radius + 1e-12);
        }
        let bound = (2.0 * PI).powf(-1.0) + 1e-12;
        for e in &d1.ecf_values {
            assert!(e.norm() <= bound);
        }
    }

    #[test]
    fn draw_radial_moment() {
        // E |z|^d = radius^d / 2 for the uniform ball
        let k = kernel(2, 0.5, 4, 2.0);
        let s = SampleSet::new(vec![vec![0.0, 0.0]], None, 0).unwrap();
        let d = draw_frequencies(&k, &s, 100_000, 5).unwrap();
        let mean: f64 = d
            .points
            .iter()
            .map(|z| z.iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            / d.points.len() as f64;
        let want = k.radius.powi(2) / 2.0;
        assert!((mean - want).abs() < 0.05 * want, "mean {mean} want {want}");
    }

    #[test]
    fn draw_ecf_matches_plain_ecf() {
        let params =
            MixtureParams::new(1, vec![vec![0.5], vec![-2.0]], vec![0.6, 0.4], 1.0).unwrap();
        let s = sample_mixture(&params, 300, 11).unwrap();
        let k = kernel(1, 0.5, 2, 2.0);
        let d = draw_frequencies(&k, &s, 200, 12).unwrap();
        for (z, e) in d.points.iter().zip(&d.ecf_values) {
            let want = ecf(&s, z);
            assert!(
                (e - want).norm() < 1e-9,
                "fast path off by {}",
                (e - want).norm()
            );
        }
    }

    #[test]
    fn oracle_tracks_exact_smoothed() {
        // wide ball (radius 4.3) and delta_bar = 1 keep truncation bias and
        // noise small at modest budgets
        let params = single_center(1);
        let k = kernel(1, 1.0, 16, 4.0);
        let s = sample_mixture(&params, 4000, 21).unwrap();
        let d = draw_frequencies(&k, &s, 4000, 22).unwrap();
        let peak = kernel_peak(1, 1.0);
        let at_center = oracle_eval(&d, &k, &[0.0]).value;
        assert!(
            (at_center - exact_smoothed(&params, 1.0, &[0.0])).abs() < 0.15 * peak,
            "center estimate {at_center}"
        );
        let far = oracle_eval(&d, &k, &[40.0]).value;
        assert!(far.abs() < 0.15 * peak, "far-field estimate {far}");
    }

    #[test]
    fn oracle_value_is_real_part() {
        let params = single_center(2);
        let k = kernel(2, 1.0, 1, 2.0);
        let s = sample_mixture(&params, 500, 2).unwrap();
        let d = draw_frequencies(&k, &s, 500, 3).unwrap();
        let est = oracle_eval(&d, &k, &[0.3, -0.7]);
        assert_eq!(est.value, est.raw.re);
        assert_eq!(est.m_used, 500);
    }

    #[test]
    fn oracle_variance_scales_inversely_with_m() {
        let params = single_center(1);
        let k = kernel(1, 1.0, 16, 4.0);
        let s = sample_mixture(&params, 1000, 31).unwrap();
        let x = [0.0];
        let var_at = |m: usize| -> f64 {
            let vals: Vec<f64> = (0..60)
                .map(|seed| {
                    let d = draw_frequencies(&k, &s, m, 1000 + seed).unwrap();
                    oracle_eval(&d, &k, &x).value
                })
                .collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (vals.len() - 1) as f64
        };
        let (v100, v1000, v10000) = (var_at(100), var_at(1000), var_at(10_000));
        let r1 = v100 / v1000;
        let r2 = v1000 / v10000;
        assert!(
            r1 > 5.0 && r1 < 20.0,
            "hundredfold->thousandfold ratio {r1}"
        );
        assert!(
            r2 > 5.0 && r2 < 20.0,
            "thousandfold->tenthousandfold ratio {r2}"
        );
    }

    #[test]
    fn oracle_concentrates_like_its_std() {
        let params = single_center(1);
        let k = kernel(1, 1.0, 16, 4.0);
        let truth = exact_smoothed(&params, 1.0, &[0.0]);
        let mut devs: Vec<f64> = (0..100)
            .map(|seed| {
                let s = sample_mixture(&params, 2000, 500 + seed).unwrap();
                let d = draw_frequencies(&k, &s, 2000, 900 + seed).unwrap();
                oracle_eval(&d, &k, &[0.0]).value - truth
            })
            .collect();
        let mean = devs.iter().sum::<f64>() / devs.len() as f64;
        let std = (devs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 99.0).sqrt();
        devs.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
        let p95 = devs[94].abs();
        assert!(p95 <= 3.0 * std, "p95 {p95} vs 3 std {}", 3.0 * std);
    }

    #[test]
    fn quadrature_reproduces_truncated_integral() {
        // average the oracle integrand (exact characteristic function in
        // place of the ECF) over the ball by Simpson quadrature; compare to
        // the hand-reduced form sum_j w_j (2 pi)^-1 int cos(z(x-y_j))
        // e^(-db^2 z^2 / 2) dz over the same interval
        let params =
            MixtureParams::new(1, vec![vec![0.0], vec![2.0]], vec![0.5, 0.5], 1.0).unwrap();
        let k = kernel(1, 0.5, 2, 2.0);
        let r = k.radius;
        let n = 20_000;
        let h = 2.0 * r / n as f64;
        for x in [0.0, 0.7, 2.0, 1.0] {
            let mut acc = 0.0;
            let mut acc_ref = 0.0;
            for i in 0..=n {
                let z = -r + i as f64 * h;
                let wgt = if i == 0 || i == n {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                let phi = exact_cf(&params, &[z]);
                acc += wgt * oracle_integrand(&k, &[z], phi, &[x]).re;
                let damp = (-k.delta_bar * k.delta_bar * z * z / 2.0).exp();
                let byhand: f64 = params
                    .centers
                    .iter()
                    .zip(&params.weights)
                    .map(|(y, &w)| w * (z * (x - y[0])).cos() * damp / (2.0 * PI))
                    .sum();
                acc_ref += wgt * byhand;
            }
            let integral = acc * h / 3.0;
            let reference = acc_ref * h / 3.0;
            assert!(
                (integral - reference).abs() < 1e-6,
                "x={x}: {integral} vs {reference}"
            );
        }
    }

    #[test]
    fn exact_smoothed_values() {
        let params = single_center(1);
        let v = exact_smoothed(&params, 0.5, &[0.0]);
        assert!((v - 0.7978845608).abs() < 1e-9);

        let two = MixtureParams::new(1, vec![vec![0.0], vec![5.0]], vec![0.5, 0.5], 1.0).unwrap();
        // midpoint is 5 delta_bar from each center
        let mid = exact_smoothed(&two, 0.5, &[2.5]);
        let want = 0.7978845608 * (-12.5f64).exp();
        assert!((mid - want).abs() < 1e-12 * want.max(1e-30) + 1e-15);

        let shifted = MixtureParams::new(2, vec![vec![1.0, -1.0]], vec![1.0], 1.0).unwrap();
        let x = [0.3, 0.4];
        let d2 = (0.3f64 - 1.0).powi(2) + (0.4f64 + 1.0).powi(2);
        let want = kernel_peak(2, 0.7) * (-d2 / (2.0 * 0.49)).exp();
        assert!((exact_smoothed(&shifted, 0.7, &x) - want).abs() < 1e-12);
    }

    #[test]
    fn fidelity_bound_values() {
        let k = kernel(1, 0.5, 16, 2.0);
        assert!((kernel_fidelity_bound(&k, 16).unwrap() - 0.04986779).abs() < 1e-7);
        let mut prev = f64::INFINITY;
        for kk in [2, 4, 16, 64, 256] {
            let b = kernel_fidelity_bound(&k, kk).unwrap();
            assert!(b < prev);
            prev = b;
        }
        let mut prev = f64::INFINITY;
        for c in [0.5, 1.0, 2.0, 4.0] {
            let k = kernel(1, 0.5, 16, c);
            let b = kernel_fidelity_bound(&k, 16).unwrap();
            assert!(b < prev);
            prev = b;
        }
        assert!(kernel_fidelity_bound(&k, 1).is_err());
    }

    fn budget_cfg(c3_6: f64, c3_5: f64) -> ConstantsConfig {
        ConstantsConfig {
            c3_6,
            c3_5,
            ..Default::default()
        }
    }

    #[test]
    fn theory_budget_values() {
        let cfg = budget_cfg(3.0, 2.0);
        let (m, n) = theory_budgets(2, &cfg).unwrap();
        assert_eq!(m, BigUint::from(17u32));
        assert_eq!(n, BigUint::from(403u32));
        assert!(theory_budgets(1, &cfg).is_err());
    }

    #[test]
    fn theory_budget_monotone_and_ordered() {
        let cfg = budget_cfg(3.0, 2.0);
        let mut prev = BigUint::from(0u32);
        for k in 2..40 {
            let (m, n) = theory_budgets(k, &cfg).unwrap();
            assert!(m > prev);
            assert!(n >= m, "n < m at k={k}");
            prev = m;
        }
        // honest-constant instantiations keep the ordering
        for c36 in [6.0, 12.0, 30.0] {
            for c35 in [0.5, 2.0, 4.0] {
                let cfg = budget_cfg(c36, c35);
                for k in [2usize, 8, 64, 256] {
                    let (m, n) = theory_budgets(k, &cfg).unwrap();
                    assert!(n >= m);
                }
            }
        }
    }

    #[test]
    fn theory_budgets_survive_huge_exponents() {
        let cfg = budget_cfg(130.0, 2.0);
        let (m, n) = theory_budgets(256, &cfg).unwrap();
        assert_eq!(m.to_string().len(), 316);
        assert_eq!(n.to_string().len(), 323);
    }
}
