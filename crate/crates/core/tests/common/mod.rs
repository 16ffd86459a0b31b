#![allow(dead_code)]

use kscbench::corpus_io::{hash_embed, Corpus};
use kscbench::Sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Sentences of 6 to 11 tokens drawn from a Zipf-weighted vocabulary
/// `{prefix}0 .. {prefix}{vocab - 1}`.
pub fn zipf_lines(prefix: &str, vocab: usize, n: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<f64> = (1..=vocab).map(|r| 1.0 / r as f64).collect();
    let total: f64 = weights.iter().sum();
    (0..n)
        .map(|_| {
            let len = rng.random_range(6..12);
            (0..len)
                .map(|_| {
                    let mut u = rng.random::<f64>() * total;
                    let mut pick = vocab - 1;
                    for (r, w) in weights.iter().enumerate() {
                        if u < *w {
                            pick = r;
                            break;
                        }
                        u -= w;
                    }
                    format!("{prefix}{pick}")
                })
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect()
}

pub fn embedded(id: &str, lines: Vec<String>, dims: usize) -> Sample {
    let c = Corpus::new(id, lines).unwrap();
    let e = hash_embed(&c, dims, 17).unwrap();
    Sample::new(c, Some(e)).unwrap()
}

/// Two sources with disjoint vocabularies: their hashed embeddings form
/// separated clouds.
pub fn separated_sources(n: usize, dims: usize, vocab: usize) -> (Sample, Sample) {
    (
        embedded("a", zipf_lines("alpha", vocab, n, 1), dims),
        embedded("b", zipf_lines("beta", vocab, n, 2), dims),
    )
}

/// One source split in half, so both halves share a distribution.
pub fn null_sources(n: usize, dims: usize) -> (Sample, Sample) {
    let lines = zipf_lines("w", 60, 2 * n, 3);
    (
        embedded("a", lines[..n].to_vec(), dims),
        embedded("b", lines[n..].to_vec(), dims),
    )
}
