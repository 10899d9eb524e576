//! Preprocessing: proximity-graph cluster splitting, PCA reduction, the
//! bounding radius, and the coverage sample-size budget.
//!
//! Clusters whose centers are far apart separate cleanly: samples
//! concentrate within ~sqrt(3 d ln(C1 d n)) of their own center, so joining
//! points closer than twice that radius almost never bridges two distant
//! clusters, while each cluster stays internally connected.

use crate::error::{Error, Result};
use crate::metrics::dist2;
use crate::model::SampleSet;
use nalgebra::{DMatrix, SymmetricEigen};

/// Partition of sample indices into connected components of the proximity
/// graph at a given edge threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct ProximityDecomposition {
    /// Components ordered by smallest member index; members sorted ascending.
    pub components: Vec<Vec<usize>>,
    /// Edge radius used to build the graph.
    pub threshold: f64,
}

/// Origin-centered ball radius k*sqrt(d*ln(C1*d*n)) that holds all centers
/// of a normalized instance with high probability. Report-level diagnostic.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundingBall {
    pub radius: f64,
}

impl BoundingBall {
    pub fn new(k: usize, d: usize, n: usize, c1: f64) -> Result<Self> {
        let arg = c1 * d as f64 * n as f64;
        if arg <= 1.0 {
            return Err(Error::Domain(format!(
                "bounding radius needs C1*d*n > 1, got {arg}"
            )));
        }
        Ok(BoundingBall {
            radius: k as f64 * (d as f64 * arg.ln()).sqrt(),
        })
    }
}

/// Edge radius 2*sqrt(3*d*ln(C1*d*n)) for the proximity graph.
pub fn proximity_threshold(d: usize, n: usize, c1: f64) -> Result<f64> {
    let arg = c1 * d as f64 * n as f64;
    if arg <= 1.0 {
        return Err(Error::Domain(format!(
            "proximity threshold needs C1*d*n > 1, got {arg}"
        )));
    }
    Ok(2.0 * (3.0 * d as f64 * arg.ln()).sqrt())
}

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Merges the two sets and returns the size of the combined set.
    fn union(&mut self, a: usize, b: usize) -> usize {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return self.size[ra];
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        self.size[ra]
    }
}

/// Connected components of the graph joining samples at distance strictly
/// below `threshold`. Brute-force O(n^2); deterministic.
pub fn split_clusters(samples: &SampleSet, threshold: f64) -> Result<ProximityDecomposition> {
    if !threshold.is_finite() || threshold <= 0.0 {
        return Err(Error::Domain(format!(
            "threshold must be positive, got {threshold}"
        )));
    }
    let n = samples.n();
    let t2 = threshold * threshold;
    let mut uf = UnionFind::new(n);
    'scan: for i in 0..n {
        for j in (i + 1)..n {
            if dist2(&samples.points[i], &samples.points[j]) < t2 && uf.union(i, j) == n {
                // everything is already one component
                break 'scan;
            }
        }
    }
    let mut by_root: Vec<Vec<usize>> = Vec::new();
    let mut root_slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = uf.find(i);
        if root_slot[r] == usize::MAX {
            root_slot[r] = by_root.len();
            by_root.push(Vec::new());
        }
        by_root[root_slot[r]].push(i);
    }
    // first-seen order already sorts components by smallest member
    Ok(ProximityDecomposition {
        components: by_root,
        threshold,
    })
}

/// Top-k principal directions of the second-moment matrix (uncentered by
/// default: the mean structure is the signal here; set `center` to subtract
/// the mean first). Returns the orthonormal basis rows and the samples
/// expressed in basis coordinates.
pub fn pca_reduce(
    samples: &SampleSet,
    k: usize,
    center: bool,
) -> Result<(Vec<Vec<f64>>, SampleSet)> {
    let (n, d) = (samples.n(), samples.d());
    if k == 0 || k > d {
        return Err(Error::Domain(format!("target dim {k} outside 1..={d}")));
    }
    if n < k {
        return Err(Error::InsufficientData { need: k, have: n });
    }
    let mean: Vec<f64> = if center {
        (0..d)
            .map(|j| samples.points.iter().map(|p| p[j]).sum::<f64>() / n as f64)
            .collect()
    } else {
        vec![0.0; d]
    };
    let mut moment = DMatrix::zeros(d, d);
    for p in &samples.points {
        for i in 0..d {
            let pi = p[i] - mean[i];
            for j in i..d {
                moment[(i, j)] += pi * (p[j] - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            moment[(i, j)] = moment[(j, i)];
        }
    }
    moment /= n as f64;
    let eig = SymmetricEigen::new(moment);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let basis: Vec<Vec<f64>> = order[..k]
        .iter()
        .map(|&col| eig.eigenvectors.column(col).iter().cloned().collect())
        .collect();
    let projected: Vec<Vec<f64>> = samples
        .points
        .iter()
        .map(|p| basis.iter().map(|b| dot(b, p)).collect())
        .collect();
    let reduced = SampleSet {
        points: projected,
        labels: samples.labels.clone(),
        seed: samples.seed,
    };
    Ok((basis, reduced))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Sample count sufficient for every center to have a sample within
/// 2*sqrt(d): 1 + (k/c) * ceil(ln(300k/eta)) * ceil(ln(300k/eta * that)).
pub fn coverage_sample_size(k: usize, c: f64, eta: f64) -> Result<usize> {
    if k < 1 {
        return Err(Error::Domain("coverage needs k >= 1".into()));
    }
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::Domain(format!("coverage needs c in (0,1], got {c}")));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::Domain(format!(
            "coverage needs eta in (0,1), got {eta}"
        )));
    }
    let base = 300.0 * k as f64 / eta;
    let l1 = base.ln().ceil();
    let l2 = (base * l1).ln().ceil();
    Ok((1.0 + (k as f64 / c) * l1 * l2).ceil() as usize)
}
