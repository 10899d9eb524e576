//! Branch-free batched sine/cosine used by the characteristic-function and
//! oracle hot loops.
//!
//! One polynomial pass over a fixed-size chunk keeps the loop
//! auto-vectorizable; on x86-64 each chunk is dispatched at runtime to a
//! clone of the same body compiled with AVX-512F, or AVX2 plus FMA,
//! enabled. Every operation is either a plain IEEE op or a fused
//! multiply-add, so results are bit-identical across the dispatch paths
//! and across platforms (no libm call). Each cos/sin pair is renormalized
//! onto the unit circle, so accumulated phasor sums respect modulus bounds
//! exactly. Absolute error is below 1e-9 for arguments up to about 1e6.
//!
//! The accumulate variants fold a whole chunk into `LANES` independent
//! partial sums; the caller reduces the lanes once at the end, keeping the
//! summation order fixed and the hot loop free of serial dependencies.
//! Padded entries must be zeroed: they contribute exactly (1, 0) to the
//! plain sums (subtract the pad count from the cosine side) and nothing to
//! the weighted sums when their weights are zero.

pub(crate) const CHUNK: usize = 64;
pub(crate) const LANES: usize = 8;

const FRAC_2_PI: f64 = std::f64::consts::FRAC_2_PI;
const PI2_HI: f64 = std::f64::consts::FRAC_PI_2;
const PI2_LO: f64 = 6.123233995736766e-17;

const S3: f64 = -1.666_666_666_666_666_6e-1;
const S5: f64 = 8.333_333_333_333_333e-3;
const S7: f64 = -1.984_126_984_126_984e-4;
const S9: f64 = 2.755_731_922_398_589e-6;
const S11: f64 = -2.505_210_838_544_172e-8;
const C2: f64 = -0.5;
const C4: f64 = 4.166_666_666_666_666_4e-2;
const C6: f64 = -1.388_888_888_888_889e-3;
const C8: f64 = 2.480_158_730_158_73e-5;
const C10: f64 = -2.755_731_922_398_589e-7;

/// Accumulates cos and sin of every chunk entry into the lane sums.
pub(crate) fn sincos_acc_chunk(
    theta: &[f64; CHUNK],
    acc_cos: &mut [f64; LANES],
    acc_sin: &mut [f64; LANES],
) {
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx512f") {
            // Safety: the required feature was just detected.
            unsafe { sincos_acc_avx512(theta, acc_cos, acc_sin) };
            return;
        }
        if std::arch::is_x86_feature_detected!("avx2") && std::arch::is_x86_feature_detected!("fma")
        {
            // Safety: the required features were just detected.
            unsafe { sincos_acc_avx2(theta, acc_cos, acc_sin) };
            return;
        }
    }
    sincos_acc_body(theta, acc_cos, acc_sin);
}

/// Accumulates w*cos and w*sin of every chunk entry into the lane sums.
pub(crate) fn sincos_wacc_chunk(
    theta: &[f64; CHUNK],
    w: &[f64; CHUNK],
    acc_cos: &mut [f64; LANES],
    acc_sin: &mut [f64; LANES],
) {
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx512f") {
            // Safety: the required feature was just detected.
            unsafe { sincos_wacc_avx512(theta, w, acc_cos, acc_sin) };
            return;
        }
        if std::arch::is_x86_feature_detected!("avx2") && std::arch::is_x86_feature_detected!("fma")
        {
            // Safety: the required features were just detected.
            unsafe { sincos_wacc_avx2(theta, w, acc_cos, acc_sin) };
            return;
        }
    }
    sincos_wacc_body(theta, w, acc_cos, acc_sin);
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f,fma")]
fn sincos_acc_avx512(theta: &[f64; CHUNK], acc_cos: &mut [f64; LANES], acc_sin: &mut [f64; LANES]) {
    sincos_acc_body(theta, acc_cos, acc_sin);
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
fn sincos_acc_avx2(theta: &[f64; CHUNK], acc_cos: &mut [f64; LANES], acc_sin: &mut [f64; LANES]) {
    sincos_acc_body(theta, acc_cos, acc_sin);
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f,fma")]
fn sincos_wacc_avx512(
    theta: &[f64; CHUNK],
    w: &[f64; CHUNK],
    acc_cos: &mut [f64; LANES],
    acc_sin: &mut [f64; LANES],
) {
    sincos_wacc_body(theta, w, acc_cos, acc_sin);
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
fn sincos_wacc_avx2(
    theta: &[f64; CHUNK],
    w: &[f64; CHUNK],
    acc_cos: &mut [f64; LANES],
    acc_sin: &mut [f64; LANES],
) {
    sincos_wacc_body(theta, w, acc_cos, acc_sin);
}

#[inline(always)]
fn sincos_acc_body(theta: &[f64; CHUNK], acc_cos: &mut [f64; LANES], acc_sin: &mut [f64; LANES]) {
    let (mut c, mut s) = ([0.0; CHUNK], [0.0; CHUNK]);
    cos_sin_chunk_body(theta, &mut c, &mut s);
    for g in 0..CHUNK / LANES {
        for l in 0..LANES {
            acc_cos[l] += c[g * LANES + l];
            acc_sin[l] += s[g * LANES + l];
        }
    }
}

#[inline(always)]
fn sincos_wacc_body(
    theta: &[f64; CHUNK],
    w: &[f64; CHUNK],
    acc_cos: &mut [f64; LANES],
    acc_sin: &mut [f64; LANES],
) {
    let (mut c, mut s) = ([0.0; CHUNK], [0.0; CHUNK]);
    cos_sin_chunk_body(theta, &mut c, &mut s);
    for g in 0..CHUNK / LANES {
        for l in 0..LANES {
            let i = g * LANES + l;
            acc_cos[l] = w[i].mul_add(c[i], acc_cos[l]);
            acc_sin[l] = w[i].mul_add(s[i], acc_sin[l]);
        }
    }
}

#[inline(always)]
fn cos_sin_chunk_body(theta: &[f64; CHUNK], cos: &mut [f64; CHUNK], sin: &mut [f64; CHUNK]) {
    for i in 0..CHUNK {
        let t = theta[i];
        let q = (t * FRAC_2_PI).round_ties_even();
        let r = (-q).mul_add(PI2_HI, t);
        let r = (-q).mul_add(PI2_LO, r);
        let r2 = r * r;
        let mut ps = S11;
        ps = ps.mul_add(r2, S9);
        ps = ps.mul_add(r2, S7);
        ps = ps.mul_add(r2, S5);
        ps = ps.mul_add(r2, S3);
        let s = r * ps.mul_add(r2, 1.0);
        let mut pc = C10;
        pc = pc.mul_add(r2, C8);
        pc = pc.mul_add(r2, C6);
        pc = pc.mul_add(r2, C4);
        pc = pc.mul_add(r2, C2);
        let c = pc.mul_add(r2, 1.0);
        // quadrant bits of q mod 4, kept in floating point to stay branchless
        let qq = q - 4.0 * (q * 0.25).floor();
        let b2 = (qq * 0.5).floor();
        let b1 = qq - 2.0 * b2;
        let sign_cos = 1.0 - 2.0 * (b1 + b2 - 2.0 * b1 * b2);
        let sign_sin = 1.0 - 2.0 * b2;
        let cc = sign_cos * ((1.0 - b1) * c + b1 * s);
        let ss = sign_sin * ((1.0 - b1) * s + b1 * c);
        let fix = 0.5 * (3.0 - ss.mul_add(ss, cc * cc));
        cos[i] = cc * fix;
        sin[i] = ss * fix;
    }
}
