//! Point-set metrics: Hausdorff distance and minimum pairwise separation.

use crate::error::{Error, Result};

/// Squared Euclidean distance.
pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Euclidean distance.
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt()
}

/// Hausdorff distance: max over both directions of the farthest
/// nearest-neighbor distance.
pub fn hausdorff(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Domain("hausdorff of an empty set".into()));
    }
    if a[0].len() != b[0].len() {
        return Err(Error::Domain(format!(
            "dimension mismatch: {} vs {}",
            a[0].len(),
            b[0].len()
        )));
    }
    let one_sided = |from: &[Vec<f64>], to: &[Vec<f64>]| -> f64 {
        from.iter()
            .map(|p| to.iter().map(|q| dist2(p, q)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    Ok(one_sided(a, b).max(one_sided(b, a)).sqrt())
}

/// Minimum pairwise distance of a center set.
pub fn min_separation(centers: &[Vec<f64>]) -> Result<f64> {
    if centers.len() < 2 {
        return Err(Error::Domain("min_separation needs >= 2 centers".into()));
    }
    let mut best = f64::INFINITY;
    for i in 0..centers.len() {
        for j in (i + 1)..centers.len() {
            best = best.min(dist2(&centers[i], &centers[j]));
        }
    }
    Ok(best.sqrt())
}
