use std::collections::HashSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus_io::Corpus;
use crate::error::{Error, Result};
use crate::measures::spearman;
use crate::metrics::{CorpusMetric, Sample};
use crate::rng::rng_for;

/// Distinct tokens over total tokens.
pub fn ttr(corpus: &Corpus) -> f64 {
    let distinct: HashSet<&str> = corpus.iter_tokens().collect();
    distinct.len() as f64 / corpus.token_count() as f64
}

/// Mean distance between disjoint random sub-corpora of `a` of size
/// `sub_size`, one fresh pair per repetition.
pub fn self_distance(
    a: &Sample,
    metric: &dyn CorpusMetric,
    sub_size: usize,
    reps: usize,
    seed: u64,
) -> Result<f64> {
    if reps == 0 || sub_size == 0 {
        return Err(Error::InvalidParameter(
            "self distance needs reps >= 1 and sub_size >= 1".into(),
        ));
    }
    if 2 * sub_size > a.len() {
        return Err(Error::InsufficientSource(format!(
            "two disjoint samples of {sub_size} need {} rows, {} has {}",
            2 * sub_size,
            a.id(),
            a.len()
        )));
    }
    let mut total = 0.0;
    for rep in 0..reps {
        let mut idx: Vec<usize> = (0..a.len()).collect();
        idx.shuffle(&mut rng_for(seed, &[0x5d, rep as u64]));
        let (first, rest) = idx.split_at_mut(sub_size);
        let second = &mut rest[..sub_size];
        first.sort_unstable();
        second.sort_unstable();
        total += metric.distance(&a.subset(a.id(), first), &a.subset(a.id(), second))?;
    }
    Ok(total / reps as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    pub metric: String,
    pub reference: String,
    pub steps: Vec<String>,
    /// Common size every corpus was subsampled to.
    pub sample_size: usize,
    pub distances: Vec<f64>,
    pub baseline: f64,
    /// Least-squares slope of distance against step number.
    pub slope: f64,
    pub spearman: f64,
    pub ttr_reference: f64,
    pub ttr_steps: Vec<f64>,
}

fn subsample(s: &Sample, size: usize, seed: u64, tag: u64) -> Sample {
    let mut idx: Vec<usize> = (0..s.len()).collect();
    idx.shuffle(&mut rng_for(seed, &[tag]));
    idx.truncate(size);
    idx.sort_unstable();
    s.subset(s.id(), &idx)
}

/// Distances from `reference` to each of the ordered `steps`, all corpora
/// cut down to the smallest size, with the trend's slope and rank
/// correlation and the reference's self-distance as a floor.
pub fn ifc_trend(
    reference: &Sample,
    steps: &[Sample],
    metric: &dyn CorpusMetric,
    baseline_reps: usize,
    seed: u64,
) -> Result<TrendReport> {
    if steps.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "need at least 3 steps, got {}",
            steps.len()
        )));
    }
    if baseline_reps < 2 {
        return Err(Error::InvalidParameter(
            "the baseline needs at least 2 sub-corpus pairs".into(),
        ));
    }
    let size = steps
        .iter()
        .map(Sample::len)
        .chain([reference.len()])
        .min()
        .unwrap_or(0);
    let r = subsample(reference, size, seed, 0);
    let distances = steps
        .iter()
        .enumerate()
        .map(|(t, s)| metric.distance(&r, &subsample(s, size, seed, t as u64 + 1)))
        .collect::<Result<Vec<f64>>>()?;
    let baseline = self_distance(
        reference,
        metric,
        size.min(reference.len() / 2),
        baseline_reps,
        seed,
    )?;

    let xs: Vec<f64> = (1..=steps.len()).map(|t| t as f64).collect();
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = distances.iter().sum::<f64>() / distances.len() as f64;
    let sxy: f64 = xs.iter().zip(&distances).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let rho = if distances.iter().all(|&d| d == distances[0]) {
        0.0
    } else {
        spearman(&xs, &distances)?
    };

    Ok(TrendReport {
        metric: metric.name(),
        reference: reference.id().to_owned(),
        steps: steps.iter().map(|s| s.id().to_owned()).collect(),
        sample_size: size,
        distances,
        baseline,
        slope: sxy / sxx,
        spearman: rho,
        ttr_reference: ttr(reference.text()),
        ttr_steps: steps.iter().map(|s| ttr(s.text())).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus_io::hash_embed;
    use crate::metrics::{Metric, MetricConfig, MetricId};

    struct Zero;

    impl CorpusMetric for Zero {
        fn name(&self) -> String {
            "zero".into()
        }

        fn distance(&self, _: &Sample, _: &Sample) -> Result<f64> {
            Ok(0.0)
        }
    }

    fn lines(prefix: &str, n: usize, vocab: usize) -> Vec<String> {
        (0..n)
            .map(|t| {
                (0..5)
                    .map(|w| format!("{prefix}{}", (t * 5 + w * 7 + t / 3) % vocab))
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect()
    }

    fn sample(id: &str, text: Vec<String>) -> Sample {
        let c = Corpus::new(id, text).unwrap();
        let e = hash_embed(&c, 16, 2).unwrap();
        Sample::new(c, Some(e)).unwrap()
    }

    #[test]
    fn ttr_examples() {
        assert_eq!(ttr(&Corpus::new("t", vec!["a a a a".into()]).unwrap()), 0.25);
        assert_eq!(
            ttr(&Corpus::new("t", vec!["a b".into(), "c d".into()]).unwrap()),
            1.0
        );
        let ttrs: Vec<f64> = [40, 20, 5]
            .iter()
            .map(|&v| ttr(&Corpus::new("t", lines("w", 60, v)).unwrap()))
            .collect();
        assert!(ttrs.windows(2).all(|w| w[0] > w[1]), "{ttrs:?}");
    }

    #[test]
    fn self_distance_basics() {
        let s = sample("a", lines("w", 40, 30));
        assert_eq!(self_distance(&s, &Zero, 10, 3, 0).unwrap(), 0.0);
        let chi = Metric::new(MetricId::Chi, MetricConfig::default());
        let one = self_distance(&s, &chi, 10, 1, 4).unwrap();
        assert!(one >= 0.0);
        assert!(self_distance(&s, &chi, 21, 1, 0).is_err());
    }

    #[test]
    fn trend_follows_mixing() {
        let reference = sample("ref", lines("w", 200, 50));
        let noise = lines("noise", 200, 50);
        let fresh = lines("w", 400, 50);
        // step t keeps t/5 of its sentences from the reference distribution
        let steps: Vec<Sample> = (0..5)
            .map(|t| {
                let keep = 20 * t;
                let mut text: Vec<String> = fresh[200 + keep..200 + 2 * keep].to_vec();
                text.extend_from_slice(&noise[..100 - keep]);
                sample(&format!("g{t}"), text)
            })
            .collect();
        let fid = Metric::new(MetricId::Fid, MetricConfig::default());
        let rep = ifc_trend(&reference, &steps, &fid, 3, 7).unwrap();
        assert_eq!(rep.sample_size, 100);
        assert!(rep.slope < 0.0 && rep.spearman < -0.8, "{rep:?}");
        assert_eq!(rep.ttr_steps.len(), 5);
    }

    #[test]
    fn trend_of_identical_steps_sits_at_baseline() {
        let reference = sample("ref", lines("w", 120, 40));
        let steps: Vec<Sample> = (0..3).map(|_| reference.clone()).collect();
        let rep = ifc_trend(&reference, &steps, &Zero, 2, 0).unwrap();
        assert!(rep.distances.iter().all(|&d| d == rep.baseline));
        assert_eq!(rep.spearman, 0.0);
        assert!(ifc_trend(&reference, &steps[..2], &Zero, 2, 0).is_err());
    }
}
