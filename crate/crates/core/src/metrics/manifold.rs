//! k-NN manifold estimates: improved precision/recall and density/coverage.
//!
//! Each row of a point cloud owns a ball whose radius is the distance to its
//! k-th nearest other row. Everything here is exact brute force.

use crate::corpus_io::EmbeddedCorpus;
use crate::error::{Error, Result};

use super::{check_same_dim, euclidean, f1, MetricConfig, MetricId};

/// Distance from every row to its `k`-th nearest other row.
pub fn knn_radius(ec: &EmbeddedCorpus, k: usize) -> Result<Vec<f64>> {
    let n = ec.rows();
    if k == 0 || k >= n {
        return Err(Error::InvalidParameter(format!(
            "k-NN radius needs 1 <= k < N, got k = {k}, N = {n}"
        )));
    }
    let mut scratch = Vec::with_capacity(n - 1);
    Ok((0..n)
        .map(|i| {
            scratch.clear();
            let xi = ec.row(i);
            scratch.extend((0..n).filter(|&j| j != i).map(|j| euclidean(xi, ec.row(j))));
            let (_, kth, _) = scratch.select_nth_unstable_by(k - 1, f64::total_cmp);
            *kth
        })
        .collect())
}

fn cross_distances(p: &EmbeddedCorpus, q: &EmbeddedCorpus) -> Vec<f64> {
    let mut out = Vec::with_capacity(p.rows() * q.rows());
    for a in p.iter_rows() {
        out.extend(q.iter_rows().map(|b| euclidean(a, b)));
    }
    out
}

fn check_k(metric: MetricId, p: &EmbeddedCorpus, q: &EmbeddedCorpus, k: usize) -> Result<()> {
    check_same_dim(metric, p, q)?;
    let min = p.rows().min(q.rows());
    if k == 0 || k >= min {
        return Err(Error::metric(
            metric.name(),
            format!("knn_k = {k} must satisfy 1 <= k < min corpus size = {min}"),
        ));
    }
    Ok(())
}

/// Improved precision and recall of `q` against reference `p`.
///
/// Precision is the fraction of `q` rows inside at least one ball of `p`;
/// recall is the fraction of `p` rows inside at least one ball of `q`.
pub fn precision_recall(p: &EmbeddedCorpus, q: &EmbeddedCorpus, k: usize) -> Result<(f64, f64)> {
    check_k(MetricId::Pr, p, q, k)?;
    let rp = knn_radius(p, k)?;
    let rq = knn_radius(q, k)?;
    let (np, nq) = (p.rows(), q.rows());
    let dist = cross_distances(p, q);
    let at = |a: usize, b: usize| dist[a * nq + b];

    let precision = (0..nq).filter(|&b| (0..np).any(|a| at(a, b) <= rp[a])).count() as f64 / nq as f64;
    let recall = (0..np).filter(|&a| (0..nq).any(|b| at(a, b) <= rq[b])).count() as f64 / np as f64;
    Ok((precision, recall))
}

/// Density (clamped to 1) and coverage of `q` against reference `p`.
pub fn density_coverage(p: &EmbeddedCorpus, q: &EmbeddedCorpus, k: usize) -> Result<(f64, f64)> {
    check_k(MetricId::Dc, p, q, k)?;
    let rp = knn_radius(p, k)?;
    let (np, nq) = (p.rows(), q.rows());
    let dist = cross_distances(p, q);
    let at = |a: usize, b: usize| dist[a * nq + b];

    let memberships: usize = (0..nq)
        .map(|b| (0..np).filter(|&a| at(a, b) <= rp[a]).count())
        .sum();
    let density = (memberships as f64 / (k * nq) as f64).min(1.0);
    let coverage = (0..np).filter(|&a| (0..nq).any(|b| at(a, b) <= rp[a])).count() as f64 / np as f64;
    Ok((density, coverage))
}

/// `1 - F1(precision, recall)`.
pub fn pr_distance(p: &EmbeddedCorpus, q: &EmbeddedCorpus, cfg: &MetricConfig) -> Result<f64> {
    let (precision, recall) = precision_recall(p, q, cfg.knn_k)?;
    Ok(1.0 - f1(precision, recall))
}

/// `1 - F1(density, coverage)`.
pub fn dc_distance(p: &EmbeddedCorpus, q: &EmbeddedCorpus, cfg: &MetricConfig) -> Result<f64> {
    let (density, coverage) = density_coverage(p, q, cfg.knn_k)?;
    Ok(1.0 - f1(density, coverage))
}
