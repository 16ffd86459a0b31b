//! Divergence-frontier distance over a k-means quantization of the joint
//! embedding cloud.

use rand::Rng;

use crate::corpus_io::EmbeddedCorpus;
use crate::error::{Error, Result};
use crate::rng::rng_for;

use super::{check_same_dim, MetricConfig, MetricId};

const MAX_LLOYD_ITERATIONS: usize = 100;
const SMOOTHING: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct KMeans {
    pub centroids: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(row: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(row, centroid);
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    best
}

/// Seeded k-means++ initialization followed by Lloyd iterations.
///
/// Fewer than `k` centroids are returned when the data has fewer than `k`
/// distinct points.
pub fn kmeans(ec: &EmbeddedCorpus, k: usize, seed: u64, max_iter: usize) -> KMeans {
    let n = ec.rows();
    let mut rng = rng_for(seed, &[0x6b6d]);
    let mut centroids: Vec<Vec<f64>> = vec![ec.row(rng.random_range(0..n)).to_vec()];
    let mut d2: Vec<f64> = ec.iter_rows().map(|r| sq_dist(r, &centroids[0])).collect();

    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            break;
        }
        let mut target = rng.random::<f64>() * total;
        let mut pick = n - 1;
        for (i, &w) in d2.iter().enumerate() {
            if target < w {
                pick = i;
                break;
            }
            target -= w;
        }
        if d2[pick] <= 0.0 {
            // rounding landed on an already chosen point
            pick = d2
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .unwrap();
        }
        let c = ec.row(pick).to_vec();
        for (i, row) in ec.iter_rows().enumerate() {
            d2[i] = d2[i].min(sq_dist(row, &c));
        }
        centroids.push(c);
    }

    let mut labels: Vec<usize> = ec.iter_rows().map(|r| nearest(r, &centroids)).collect();
    let dim = ec.dim();
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let mut sums = vec![vec![0.0; dim]; centroids.len()];
        let mut counts = vec![0usize; centroids.len()];
        for (row, &l) in ec.iter_rows().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(row) {
                *s += v;
            }
        }
        for (c, (sum, count)) in sums.into_iter().zip(counts).enumerate() {
            if count > 0 {
                centroids[c] = sum.into_iter().map(|s| s / count as f64).collect();
            }
        }
        let next: Vec<usize> = ec.iter_rows().map(|r| nearest(r, &centroids)).collect();
        if next == labels {
            break;
        }
        labels = next;
    }

    KMeans {
        centroids,
        labels,
        iterations,
    }
}

fn smoothed(counts: &[usize], total: usize) -> Vec<f64> {
    let raw: Vec<f64> = counts
        .iter()
        .map(|&c| c as f64 / total as f64 + SMOOTHING)
        .collect();
    let z: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / z).collect()
}

/// Cluster the stacked rows of `p` and `q` and return the smoothed cluster
/// histograms of each side, or `None` when every row is identical.
pub fn quantized_histograms(
    p: &EmbeddedCorpus,
    q: &EmbeddedCorpus,
    cfg: &MetricConfig,
) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
    check_same_dim(MetricId::Mauve, p, q)?;
    let total = p.rows() + q.rows();
    let clusters = cfg.mauve_num_clusters.resolve(total);
    if total < 2 * clusters {
        return Err(Error::metric(
            "MAUVE",
            format!("{total} rows is fewer than twice the {clusters} clusters"),
        ));
    }
    let joint = EmbeddedCorpus::concat("joint", &[p, q])?;
    let first = joint.row(0);
    if joint.iter_rows().all(|r| r == first) {
        return Ok(None);
    }
    let km = kmeans(&joint, clusters, cfg.seed, MAX_LLOYD_ITERATIONS);
    let used = km.centroids.len();
    let mut hp = vec![0usize; used];
    let mut hq = vec![0usize; used];
    for (i, &l) in km.labels.iter().enumerate() {
        if i < p.rows() {
            hp[l] += 1;
        } else {
            hq[l] += 1;
        }
    }
    Ok(Some((smoothed(&hp, p.rows()), smoothed(&hq, q.rows()))))
}

fn kl(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .filter(|(x, _)| **x > 0.0)
        .map(|(x, y)| x * (x / y).ln())
        .sum()
}

/// Area under the divergence frontier of histograms `p` and `q`.
///
/// For `lambda` on a uniform grid of `grid` interior points of (0, 1) the
/// frontier point is `(exp(-c KL(q || R)), exp(-c KL(p || R)))` with
/// `R = lambda p + (1 - lambda) q`. The curve is closed with `(0, 1)` and
/// `(1, 0)` and integrated with the trapezoidal rule.
pub fn frontier_auc(p: &[f64], q: &[f64], c: f64, grid: usize) -> f64 {
    let mut points: Vec<(f64, f64)> = Vec::with_capacity(grid + 2);
    points.push((0.0, 1.0));
    points.push((1.0, 0.0));
    let mut mix = vec![0.0; p.len()];
    for t in 1..=grid {
        let lambda = t as f64 / (grid + 1) as f64;
        for ((m, a), b) in mix.iter_mut().zip(p).zip(q) {
            *m = lambda * a + (1.0 - lambda) * b;
        }
        points.push(((-c * kl(q, &mix)).exp(), (-c * kl(p, &mix)).exp()));
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

/// `1 - AUC` of the divergence frontier.
pub fn mauve_distance(p: &EmbeddedCorpus, q: &EmbeddedCorpus, cfg: &MetricConfig) -> Result<f64> {
    match quantized_histograms(p, q, cfg)? {
        None => Ok(0.0),
        Some((hp, hq)) => {
            let auc = frontier_auc(&hp, &hq, cfg.mauve_scale_c, cfg.mauve_grid_size);
            Ok((1.0 - auc).clamp(0.0, 1.0))
        }
    }
}
