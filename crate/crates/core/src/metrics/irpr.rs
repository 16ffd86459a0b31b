use crate::corpus_io::EmbeddedCorpus;
use crate::error::{Error, Result};

use super::{check_same_dim, f1, MetricId};

fn unit_rows(ec: &EmbeddedCorpus) -> Result<Vec<Vec<f64>>> {
    ec.iter_rows()
        .enumerate()
        .map(|(i, r)| {
            let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                Err(Error::metric("IRPR", format!("row {i} has zero norm")))
            } else {
                Ok(r.iter().map(|v| v / norm).collect())
            }
        })
        .collect()
}

/// Mean over `from` of the best `(1 + cos) / 2` similarity into `to`.
fn mean_best_similarity(from: &[Vec<f64>], to: &[Vec<f64>]) -> f64 {
    from.iter()
        .map(|x| {
            to.iter()
                .map(|y| {
                    let cos: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
                    (1.0 + cos.clamp(-1.0, 1.0)) / 2.0
                })
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum::<f64>()
        / from.len() as f64
}

/// Nearest-neighbour cosine precision and recall, reported as `1 - F1`.
pub fn irpr_distance(p: &EmbeddedCorpus, q: &EmbeddedCorpus) -> Result<f64> {
    check_same_dim(MetricId::Irpr, p, q)?;
    let (pu, qu) = (unit_rows(p)?, unit_rows(q)?);
    let precision = mean_best_similarity(&qu, &pu);
    let recall = mean_best_similarity(&pu, &qu);
    Ok((1.0 - f1(precision, recall)).max(0.0))
}
