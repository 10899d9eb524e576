//! Random orthonormal frames for dimension reduction, coordinate
//! projection, and the patch-up step that reassembles full-dimensional
//! centers from solutions found in augmented subspaces.
//!
//! A Haar-random frame nearly preserves pairwise center distances when the
//! leading d-bar coordinates are kept (Johnson-Lindenstrauss), so the spike
//! search can run in d-bar dimensions. Each remaining coordinate l is
//! recovered by re-solving in the (d-bar + 1)-dimensional span of the
//! leading vectors plus e_l and matching solutions on the shared prefix.

use crate::error::{Error, Result};
use crate::metrics::dist2;
use crate::preprocess::dot;
use crate::rng::stream_rng;
use nalgebra::DMatrix;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Orthonormal basis of R^d with a distinguished leading block.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProjectionFrame {
    /// Orthonormal basis vectors, one per row.
    pub basis: Vec<Vec<f64>>,
    /// Leading subspace dimension used by the spike search.
    pub dbar: usize,
    /// Seed the frame was drawn from.
    pub seed: u64,
}

impl ProjectionFrame {
    /// Standard basis, useful as the no-rotation frame.
    pub fn identity(d: usize) -> Self {
        let basis = (0..d)
            .map(|i| {
                let mut e = vec![0.0; d];
                e[i] = 1.0;
                e
            })
            .collect();
        ProjectionFrame {
            basis,
            dbar: d,
            seed: 0,
        }
    }

    pub fn d(&self) -> usize {
        self.basis.len()
    }

    /// Largest deviation of the Gram matrix from the identity.
    pub fn gram_error(&self) -> f64 {
        let d = self.d();
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in i..d {
                let g = dot(&self.basis[i], &self.basis[j]);
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - want).abs());
            }
        }
        worst
    }
}

/// Reduced dimension min(d, max(1, ceil(C1_5 * ln k))).
pub fn reduced_dim(d: usize, k: usize, c1_5: f64) -> usize {
    let raw = (c1_5 * (k as f64).ln()).ceil() as usize;
    d.min(raw.max(1))
}

/// Haar-distributed orthonormal frame: QR of a Gaussian matrix with the
/// sign convention diag(R) > 0. Deterministic given the seed.
pub fn random_frame(d: usize, k: usize, c1_5: f64, seed: u64) -> ProjectionFrame {
    let mut rng = stream_rng(seed, 1);
    let g = DMatrix::from_fn(d, d, |_, _| -> f64 {
        rand::Rng::sample(&mut rng, StandardNormal)
    });
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            for i in 0..d {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    let basis = (0..d)
        .map(|j| q.column(j).iter().cloned().collect())
        .collect();
    ProjectionFrame {
        basis,
        dbar: reduced_dim(d, k, c1_5),
        seed,
    }
}

/// Coordinates of each point in the selected frame vectors.
pub fn project(
    points: &[Vec<f64>],
    frame: &ProjectionFrame,
    coords: &[usize],
) -> Result<Vec<Vec<f64>>> {
    if coords.is_empty() {
        return Err(Error::Domain(
            "projection needs at least one coordinate".into(),
        ));
    }
    if let Some(&bad) = coords.iter().find(|&&c| c >= frame.d()) {
        return Err(Error::Domain(format!(
            "coordinate {bad} out of range for dimension {}",
            frame.d()
        )));
    }
    Ok(points
        .iter()
        .map(|p| coords.iter().map(|&c| dot(&frame.basis[c], p)).collect())
        .collect())
}

/// Reassemble full-dimensional centers from the base solution in the
/// leading d-bar coordinates and one augmented solution per remaining
/// coordinate. Augmented set t covers frame coordinate dbar + t; its points
/// carry d-bar + 1 entries, the last being the new coordinate. Matching is
/// by the shared prefix within `tol`; anything but a unique match fails.
pub fn patch_centers(
    frame: &ProjectionFrame,
    base: &[Vec<f64>],
    augmented: &[Vec<Vec<f64>>],
    tol: f64,
) -> Result<Vec<Vec<f64>>> {
    let (d, dbar) = (frame.d(), frame.dbar);
    if !tol.is_finite() || tol <= 0.0 {
        return Err(Error::Domain(format!(
            "patch tolerance must be positive, got {tol}"
        )));
    }
    if base.is_empty() {
        return Err(Error::Domain("patch needs at least one base center".into()));
    }
    if augmented.len() != d - dbar {
        return Err(Error::InvalidParams(format!(
            "expected {} augmented sets, got {}",
            d - dbar,
            augmented.len()
        )));
    }
    if let Some(set) = augmented.iter().find(|s| s.len() != base.len()) {
        return Err(Error::InvalidParams(format!(
            "augmented set has {} centers, base has {}",
            set.len(),
            base.len()
        )));
    }
    let mut out = Vec::with_capacity(base.len());
    for (bi, b) in base.iter().enumerate() {
        let mut coords = vec![0.0; d];
        coords[..dbar].copy_from_slice(b);
        for (t, set) in augmented.iter().enumerate() {
            let hits: Vec<&Vec<f64>> = set
                .iter()
                .filter(|a| dist2(&a[..dbar], b) <= tol * tol)
                .collect();
            if hits.len() != 1 {
                return Err(Error::PatchAmbiguity {
                    base: bi,
                    subproblem: dbar + t,
                    matches: hits.len(),
                    tol,
                });
            }
            coords[dbar + t] = hits[0][dbar];
        }
        let mut x = vec![0.0; d];
        for (i, &c) in coords.iter().enumerate() {
            for (xj, bj) in x.iter_mut().zip(&frame.basis[i]) {
                *xj += c * bj;
            }
        }
        out.push(x);
    }
    Ok(out)
}
