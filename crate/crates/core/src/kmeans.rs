//! Lloyd's algorithm with k-means++ seeding, and the quantization view:
//! the centroids weighted by cluster frequencies form a discrete measure
//! that locally minimizes `W_2^2` to the empirical measure.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{sq_dist, DiscreteMeasure, Point};
use crate::rng::stream_rng;

pub const DEFAULT_MAX_ITER: usize = 300;
pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmeansResult {
    pub centroids: Vec<Point>,
    pub labels: Vec<usize>,
    /// Mean squared distance to the assigned centroid.
    pub inertia: f64,
    /// Inertia after each assignment step.
    pub inertia_trace: Vec<f64>,
    pub iterations: usize,
}

/// Index of the nearest centroid (lowest index on ties) and the squared
/// distance to it.
#[inline]
pub fn nearest(point: &[f64], centroids: &[Point]) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(point, &centroid.0);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    (best, best_d)
}

/// k-means++ seeding; `weights` scales the sampling probabilities. Returns
/// indices of the chosen points, fewer than `k` when the points (with
/// positive weight) have fewer than `k` distinct locations.
pub fn kmeans_plus_plus<R: Rng>(
    points: &[Point],
    weights: Option<&[f64]>,
    k: usize,
    rng: &mut R,
) -> Vec<usize> {
    extend_seeding(points, weights, &[], k, rng)
}

/// k-means++ continued from existing `centers`: draws up to `k` further
/// points with probability proportional to weight times squared distance to
/// the nearest center chosen so far.
pub fn extend_seeding<R: Rng>(
    points: &[Point],
    weights: Option<&[f64]>,
    centers: &[Point],
    k: usize,
    rng: &mut R,
) -> Vec<usize> {
    let n = points.len();
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let total: f64 = (0..n).map(w).sum();
    if n == 0 || k == 0 || !(total > 0.0) {
        return Vec::new();
    }
    let mut chosen = Vec::new();
    let mut d2: Vec<f64> = if centers.is_empty() {
        let first = sample_index(rng, (0..n).map(w), total);
        chosen.push(first);
        (0..n).map(|i| points[i].sq_dist(&points[first])).collect()
    } else {
        (0..n).map(|i| nearest(&points[i].0, centers).1).collect()
    };
    while chosen.len() < k {
        let mass: f64 = (0..n).map(|i| w(i) * d2[i]).sum();
        if !(mass > 0.0) {
            break;
        }
        let next = sample_index(rng, (0..n).map(|i| w(i) * d2[i]), mass);
        chosen.push(next);
        for i in 0..n {
            let d = points[i].sq_dist(&points[next]);
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    chosen
}

fn sample_index<R: Rng>(rng: &mut R, probs: impl Iterator<Item = f64>, total: f64) -> usize {
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, p) in probs.enumerate() {
        if p > 0.0 {
            acc += p;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

fn assign(points: &[Point], centroids: &[Point], labels: &mut [usize], dists: &mut [f64]) {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        if points.len() >= 4096 {
            labels
                .par_iter_mut()
                .zip(dists.par_iter_mut())
                .zip(points.par_iter())
                .for_each(|((l, d), p)| {
                    let (c, dd) = nearest(&p.0, centroids);
                    *l = c;
                    *d = dd;
                });
            return;
        }
    }
    for ((l, d), p) in labels.iter_mut().zip(dists.iter_mut()).zip(points) {
        let (c, dd) = nearest(&p.0, centroids);
        *l = c;
        *d = dd;
    }
}

/// k-means++ seeded Lloyd iterations. Deterministic for a given seed.
pub fn lloyd(points: &[Point], k: usize, seed: u64, max_iter: usize, tol: f64) -> Result<KmeansResult> {
    if points.is_empty() {
        return Err(Error::Empty("points"));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let dim = points[0].dim();
    if let Some(p) = points.iter().find(|p| p.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: p.dim(),
        });
    }
    let n = points.len();
    let mut rng = stream_rng(seed, 0);
    let mut centroids: Vec<Point> = kmeans_plus_plus(points, None, k, &mut rng)
        .into_iter()
        .map(|i| points[i].clone())
        .collect();

    let mut labels = vec![0usize; n];
    let mut dists = vec![0.0; n];
    let mut trace: Vec<f64> = Vec::new();
    let mut iterations = 0;
    loop {
        assign(points, &centroids, &mut labels, &mut dists);
        let inertia = dists.iter().sum::<f64>() / n as f64;
        let done = match trace.last() {
            Some(&prev) => prev - inertia <= tol * prev.max(f64::MIN_POSITIVE),
            None => false,
        };
        trace.push(inertia);
        if done || inertia == 0.0 || iterations >= max_iter {
            break;
        }
        iterations += 1;

        // centroid update
        let kc = centroids.len();
        let mut sums = vec![vec![0.0; dim]; kc];
        let mut counts = vec![0usize; kc];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, x) in sums[l].iter_mut().zip(&p.0) {
                *s += x;
            }
        }
        let mut next: Vec<Point> = Vec::with_capacity(kc);
        for c in 0..kc {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                next.push(Point(sums[c].iter().map(|s| s * inv).collect()));
            } else {
                next.push(centroids[c].clone());
            }
        }
        // empty clusters move to the point farthest from its centroid
        let mut taken = vec![false; n];
        let mut keep = vec![true; kc];
        for c in 0..kc {
            if counts[c] > 0 {
                continue;
            }
            let far = (0..n)
                .filter(|&i| !taken[i])
                .map(|i| (i, sq_dist(&points[i].0, &next[labels[i]].0)))
                .fold(None, |best: Option<(usize, f64)>, (i, d)| match best {
                    Some((_, bd)) if bd >= d => best,
                    _ => Some((i, d)),
                });
            match far {
                Some((i, d)) if d > 0.0 => {
                    taken[i] = true;
                    next[c] = points[i].clone();
                }
                _ => keep[c] = false,
            }
        }
        centroids = next
            .into_iter()
            .zip(keep)
            .filter_map(|(p, k)| k.then_some(p))
            .collect();
    }

    let inertia = *trace.last().unwrap_or(&0.0);
    Ok(KmeansResult {
        centroids,
        labels,
        inertia,
        inertia_trace: trace,
        iterations,
    })
}

/// Measure supported on the Lloyd centroids, weighted by label frequency.
pub fn quantize(points: &[Point], k: usize, seed: u64) -> Result<DiscreteMeasure> {
    let res = lloyd(points, k, seed, DEFAULT_MAX_ITER, DEFAULT_TOL)?;
    Ok(quantization_measure(&res))
}

pub(crate) fn quantization_measure(res: &KmeansResult) -> DiscreteMeasure {
    let kc = res.centroids.len();
    let mut counts = vec![0usize; kc];
    for &l in &res.labels {
        counts[l] += 1;
    }
    let n = res.labels.len() as f64;
    let (atoms, weights): (Vec<Point>, Vec<f64>) = res
        .centroids
        .iter()
        .zip(&counts)
        .filter(|(_, &c)| c > 0)
        .map(|(p, &c)| (p.clone(), c as f64 / n))
        .unzip();
    DiscreteMeasure::from_raw(atoms, weights)
}
