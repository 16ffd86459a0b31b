//! Known-Similarity Corpora: construction, distance tables and the
//! judgement set.
//!
//! Corpus indices are 1-based throughout (`c_1..c_k`), matching how pairs
//! and judgements are written down.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus_io::Corpus;
use crate::error::{Error, Result};
use crate::metrics::{CorpusMetric, Sample};
use crate::rng::rng_for;

const TAG_A: u64 = 0xA;
const TAG_B: u64 = 0xB;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Provenance {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Member {
    pub source: Provenance,
    pub index: usize,
}

/// Number of A samples in `c_i`: `n (k - i) / (k - 1)` rounded half up.
pub fn a_count(n: usize, k: usize, i: usize) -> usize {
    (2 * n * (k - i) + (k - 1)) / (2 * (k - 1))
}

pub fn a_counts(n: usize, k: usize) -> Vec<usize> {
    (1..=k).map(|i| a_count(n, k, i)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KscCollection {
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    pub source_ids: (String, String),
    /// `corpora[i - 1]` holds the members of `c_i`, A samples first.
    pub corpora: Vec<Vec<Member>>,
}

/// Draw `k` corpora of `n` samples each, `c_i` holding `a_count(n, k, i)`
/// samples from `a` and the rest from `b`. Every sample is used at most
/// once across the whole collection.
pub fn build_ksc(a: &Corpus, b: &Corpus, n: usize, k: usize, seed: u64) -> Result<KscCollection> {
    if k < 3 {
        return Err(Error::InvalidParameter(format!("k must be >= 3, got {k}")));
    }
    if n < k - 1 {
        return Err(Error::InvalidParameter(format!(
            "n must be >= k - 1 = {}, got {n}",
            k - 1
        )));
    }
    let counts = a_counts(n, k);
    let need_a: usize = counts.iter().sum();
    let need_b = n * k - need_a;
    if a.len() < need_a || b.len() < need_b {
        return Err(Error::InsufficientSource(format!(
            "n = {n}, k = {k} needs {need_a} samples from {} (has {}) and {need_b} from {} (has {}), about nk/2 = {} each",
            a.id(),
            a.len(),
            b.id(),
            b.len(),
            n * k / 2
        )));
    }

    let mut pool_a: Vec<usize> = (0..a.len()).collect();
    let mut pool_b: Vec<usize> = (0..b.len()).collect();
    pool_a.shuffle(&mut rng_for(seed, &[TAG_A]));
    pool_b.shuffle(&mut rng_for(seed, &[TAG_B]));
    let (mut next_a, mut next_b) = (pool_a.into_iter(), pool_b.into_iter());

    let corpora = counts
        .iter()
        .map(|&na| {
            let from_a = next_a.by_ref().take(na).map(|index| Member {
                source: Provenance::A,
                index,
            });
            let from_b = next_b.by_ref().take(n - na).map(|index| Member {
                source: Provenance::B,
                index,
            });
            from_a.chain(from_b).collect()
        })
        .collect();

    Ok(KscCollection {
        n,
        k,
        seed,
        source_ids: (a.id().to_owned(), b.id().to_owned()),
        corpora,
    })
}

impl KscCollection {
    /// Members of `c_i` (1-based).
    pub fn corpus(&self, i: usize) -> &[Member] {
        &self.corpora[i - 1]
    }

    pub fn a_count(&self, i: usize) -> usize {
        self.corpus(i)
            .iter()
            .filter(|m| m.source == Provenance::A)
            .count()
    }

    /// Build the `k` corpora as samples of the two sources.
    pub fn materialize(&self, a: &Sample, b: &Sample) -> Result<Vec<Sample>> {
        if (a.id(), b.id()) != (self.source_ids.0.as_str(), self.source_ids.1.as_str()) {
            return Err(Error::InvalidParameter(format!(
                "collection was built from ({}, {}), got ({}, {})",
                self.source_ids.0,
                self.source_ids.1,
                a.id(),
                b.id()
            )));
        }
        self.corpora
            .iter()
            .enumerate()
            .map(|(pos, members)| {
                let pick = |src| -> Vec<usize> {
                    members
                        .iter()
                        .filter(|m| m.source == src)
                        .map(|m| m.index)
                        .collect()
                };
                let id = format!("c{}", pos + 1);
                let (from_a, from_b) = (pick(Provenance::A), pick(Provenance::B));
                match (from_a.is_empty(), from_b.is_empty()) {
                    (_, true) => Ok(a.subset(&id, &from_a)),
                    (true, false) => Ok(b.subset(&id, &from_b)),
                    _ => Sample::concat(&id, &[&a.subset(&id, &from_a), &b.subset(&id, &from_b)]),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceEntry {
    pub rep: usize,
    pub i: usize,
    pub j: usize,
    pub ell: usize,
    pub raw: f64,
    pub z: f64,
}

/// Distances `d(c_i, c_j)` for every `i < j` and repetition, with z-scores
/// pooled over the whole table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceTable {
    pub metric: String,
    pub k: usize,
    pub repetitions: usize,
    pub entries: Vec<DistanceEntry>,
}

fn pairs(k: usize) -> Vec<(usize, usize)> {
    (1..=k).flat_map(|i| (i + 1..=k).map(move |j| (i, j))).collect()
}

impl DistanceTable {
    /// Table from raw values in `(rep, i, j)` order; z-scores are filled in.
    fn from_raw(metric: String, k: usize, repetitions: usize, raw: Vec<f64>) -> Result<Self> {
        let z = normalize_z(&raw)?;
        let entries = (0..repetitions)
            .flat_map(|rep| pairs(k).into_iter().map(move |(i, j)| (rep, i, j)))
            .zip(raw.into_iter().zip(z))
            .map(|((rep, i, j), (raw, z))| DistanceEntry {
                rep,
                i,
                j,
                ell: j - i,
                raw,
                z,
            })
            .collect();
        Ok(DistanceTable {
            metric,
            k,
            repetitions,
            entries,
        })
    }

    /// Table of a synthetic distance `f(rep, i, j)`.
    pub fn from_fn(
        metric: impl Into<String>,
        k: usize,
        repetitions: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let raw = (0..repetitions)
            .flat_map(|rep| pairs(k).into_iter().map(move |(i, j)| (rep, i, j)))
            .map(|(rep, i, j)| f(rep, i, j))
            .collect();
        Self::from_raw(metric.into(), k, repetitions, raw)
    }

    /// Merge single-repetition tables of one metric into one table,
    /// renumbering repetitions and re-pooling the z-scores.
    pub fn pool(tables: Vec<DistanceTable>) -> Result<Self> {
        let first = tables
            .first()
            .ok_or_else(|| Error::InvalidParameter("no tables to pool".into()))?;
        let (metric, k) = (first.metric.clone(), first.k);
        if let Some(t) = tables.iter().find(|t| t.metric != metric || t.k != k) {
            return Err(Error::InvalidParameter(format!(
                "cannot pool {} (k = {}) with {metric} (k = {k})",
                t.metric, t.k
            )));
        }
        let repetitions = tables.iter().map(|t| t.repetitions).sum();
        let raw = tables
            .into_iter()
            .flat_map(|t| t.entries.into_iter().map(|e| e.raw))
            .collect();
        Self::from_raw(metric, k, repetitions, raw)
    }

    pub fn raw(&self, rep: usize, i: usize, j: usize) -> Result<f64> {
        self.entries
            .binary_search_by(|e| (e.rep, e.i, e.j).cmp(&(rep, i, j)))
            .map(|pos| self.entries[pos].raw)
            .map_err(|_| Error::MissingPair { rep, i, j })
    }

    pub fn ells(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.ell as f64).collect()
    }

    pub fn zs(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.z).collect()
    }
}

/// Distances between every pair of materialized KSC corpora, `c_i` as the
/// reference. Errors name the failing pair.
pub fn compute_distances(corpora: &[Sample], metric: &dyn CorpusMetric) -> Result<DistanceTable> {
    let k = corpora.len();
    if k < 3 {
        return Err(Error::InvalidParameter(format!(
            "need at least 3 corpora, got {k}"
        )));
    }
    let raw = pairs(k)
        .into_par_iter()
        .map(|(i, j)| {
            metric
                .distance(&corpora[i - 1], &corpora[j - 1])
                .map_err(|e| Error::Pair {
                    i,
                    j,
                    source: Box::new(e),
                })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    DistanceTable::from_raw(metric.name(), k, 1, raw)
}

/// `(v - mean) / sd` with the sample standard deviation; all zeros for a
/// constant input.
pub fn normalize_z(values: &[f64]) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "z-normalization needs at least 2 values, got {}",
            values.len()
        )));
    }
    if values.iter().all(|&v| v == values[0]) {
        return Ok(vec![0.0; values.len()]);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    Ok(values.iter().map(|v| (v - mean) / sd).collect())
}

/// The prediction `d(c_q, c_r) <= d(c_i, c_j)` for `(q, r)` strictly inside
/// `(i, j)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgement {
    pub inner: (usize, usize),
    pub outer: (usize, usize),
}

impl Judgement {
    /// Hardness weight `1 / (gap difference)`: judgements between pairs of
    /// similar separation count more.
    pub fn weight(&self) -> f64 {
        let outer = self.outer.1 - self.outer.0;
        let inner = self.inner.1 - self.inner.0;
        1.0 / (outer - inner) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgementSet {
    pub k: usize,
    pub judgements: Vec<Judgement>,
}

impl JudgementSet {
    pub fn len(&self) -> usize {
        self.judgements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.judgements.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Judgement> {
        self.judgements.iter()
    }

    pub fn total_weight(&self) -> f64 {
        self.judgements.iter().map(Judgement::weight).sum()
    }
}

/// Every `((q, r), (i, j))` with `i <= q < r <= j` and `(q, r) != (i, j)`,
/// ordered by outer interval then inner interval.
pub fn judgement_set(k: usize) -> JudgementSet {
    let mut judgements = Vec::new();
    for (i, j) in pairs(k) {
        for q in i..j {
            for r in q + 1..=j {
                if (q, r) != (i, j) {
                    judgements.push(Judgement {
                        inner: (q, r),
                        outer: (i, j),
                    });
                }
            }
        }
    }
    JudgementSet { k, judgements }
}
