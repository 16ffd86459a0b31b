use std::collections::HashMap;

use crate::corpus_io::Corpus;
use crate::error::{Error, Result};

use super::MetricConfig;

fn token_counts(corpus: &Corpus) -> HashMap<&str, usize> {
    let mut counts = HashMap::new();
    for t in corpus.iter_tokens() {
        *counts.entry(t).or_insert(0) += 1;
    }
    counts
}

/// Tokens sorted by descending count, ties broken by the token itself.
fn ranked<'a>(counts: &HashMap<&'a str, usize>) -> Vec<(&'a str, usize)> {
    let mut v: Vec<(&str, usize)> = counts.iter().map(|(&t, &c)| (t, c)).collect();
    v.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    v
}

/// Chi-squared comparison of token frequencies over the `top_n_tokens` most
/// frequent tokens of the combined vocabulary.
///
/// Both corpora are rescaled to a common token total, the expected count of
/// a token is the mean of the two rescaled counts, and the summed statistic
/// `X2` is mapped into `[0, 1)` as `X2 / (X2 + T)` with `T` the rescaled
/// number of compared tokens. Since `X2 <= T` the value never exceeds 1/2.
pub fn chi_distance(p: &Corpus, q: &Corpus, cfg: &MetricConfig) -> Result<f64> {
    let counts_p = token_counts(p);
    let counts_q = token_counts(q);
    let mut combined = counts_p.clone();
    for (&t, &c) in &counts_q {
        *combined.entry(t).or_insert(0) += c;
    }
    if combined.is_empty() {
        return Err(Error::metric("CHI", "empty combined vocabulary"));
    }

    let total_p = p.token_count() as f64;
    let total_q = q.token_count() as f64;
    let common = 0.5 * (total_p + total_q);

    let mut x2 = 0.0;
    let mut compared = 0.0;
    for (token, _) in ranked(&combined).into_iter().take(cfg.top_n_tokens) {
        let o_p = *counts_p.get(token).unwrap_or(&0) as f64 * common / total_p;
        let o_q = *counts_q.get(token).unwrap_or(&0) as f64 * common / total_q;
        let e = 0.5 * (o_p + o_q);
        if e > 0.0 {
            x2 += (o_p - e) * (o_p - e) / e + (o_q - e) * (o_q - e) / e;
        }
        compared += o_p + o_q;
    }
    if compared <= 0.0 {
        return Err(Error::metric("CHI", "no tokens to compare"));
    }
    Ok(x2 / (x2 + compared))
}

/// Zipf exponent of a corpus: minus the least-squares slope of log frequency
/// against log rank over the `top_n` most frequent tokens.
pub fn zipf_coefficient(corpus: &Corpus, top_n: usize) -> Result<f64> {
    let counts = token_counts(corpus);
    let ranked = ranked(&counts);
    let used = ranked.len().min(top_n);
    if used < 2 {
        return Err(Error::metric(
            "ZIPF",
            format!("{} needs at least 2 distinct tokens to fit a slope", corpus.id()),
        ));
    }
    let xs: Vec<f64> = (1..=used).map(|r| (r as f64).ln()).collect();
    let ys: Vec<f64> = ranked[..used].iter().map(|&(_, c)| (c as f64).ln()).collect();
    let n = used as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(-sxy / sxx)
}

/// `|z_P - z_Q|` for the fitted Zipf exponents.
pub fn zipf_distance(p: &Corpus, q: &Corpus, cfg: &MetricConfig) -> Result<f64> {
    let zp = zipf_coefficient(p, cfg.top_n_tokens)?;
    let zq = zipf_coefficient(q, cfg.top_n_tokens)?;
    Ok((zp - zq).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(lines: &[&str]) -> Corpus {
        Corpus::new("t", lines.iter().map(|s| s.to_string()).collect()).unwrap()
    }

    /// Build a corpus whose token `w{r}` occurs exactly `counts[r]` times.
    fn with_counts(counts: &[usize]) -> Corpus {
        let lines: Vec<String> = counts
            .iter()
            .enumerate()
            .flat_map(|(r, &c)| std::iter::repeat_n(format!("w{r}"), c))
            .collect();
        Corpus::new("z", lines).unwrap()
    }

    /// Direct evaluation of the chi statistic on explicit count tables,
    /// independent of tokenization and ranking.
    fn chi_oracle(p: &[f64], q: &[f64]) -> f64 {
        let (tp, tq): (f64, f64) = (p.iter().sum(), q.iter().sum());
        let common = (tp + tq) / 2.0;
        let mut x2 = 0.0;
        let mut t = 0.0;
        for (a, b) in p.iter().zip(q) {
            let (a, b) = (a * common / tp, b * common / tq);
            let e = (a + b) / 2.0;
            if e > 0.0 {
                x2 += (a - e).powi(2) / e + (b - e).powi(2) / e;
            }
            t += a + b;
        }
        x2 / (x2 + t)
    }

    #[test]
    fn chi_identical_is_zero() {
        let c = corpus(&["the cat sat", "on the mat"]);
        assert_eq!(chi_distance(&c, &c, &MetricConfig::default()).unwrap(), 0.0);
    }

    #[test]
    fn chi_matches_count_table_oracle() {
        let p = corpus(&["a a b c"]);
        let q = corpus(&["a b b d"]);
        let got = chi_distance(&p, &q, &MetricConfig::default()).unwrap();
        // vocabulary order does not matter for the oracle: a, b, c, d
        let want = chi_oracle(&[2.0, 1.0, 1.0, 0.0], &[1.0, 2.0, 0.0, 1.0]);
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn chi_disjoint_exceeds_shared() {
        let cfg = MetricConfig::default();
        let disjoint = chi_distance(&corpus(&["a b c d"]), &corpus(&["e f g h"]), &cfg).unwrap();
        assert!(
            (disjoint
                - chi_oracle(
                    &[1., 1., 1., 1., 0., 0., 0., 0.],
                    &[0., 0., 0., 0., 1., 1., 1., 1.]
                ))
            .abs()
                < 1e-12
        );
        assert!(disjoint > 0.0 && disjoint < 1.0);
        for shared in [
            ["a b c d", "a b c e"],
            ["a b c d", "a a b b"],
            ["a b c d", "d c b e"],
        ] {
            let v = chi_distance(&corpus(&[shared[0]]), &corpus(&[shared[1]]), &cfg).unwrap();
            assert!(v < disjoint, "{shared:?}: {v} >= {disjoint}");
        }
    }

    #[test]
    fn chi_mixtures_are_closer_than_pure_sources() {
        let cfg = MetricConfig::default();
        let a = [
            "alpha beta gamma",
            "beta gamma delta",
            "alpha alpha delta",
            "gamma beta alpha",
        ];
        let b = ["one two three", "two three four", "one one four", "three two one"];
        let mix1: Vec<&str> = vec![a[0], a[1], b[0], b[1]];
        let mix2: Vec<&str> = vec![a[2], a[3], b[2], b[3]];
        let pure = chi_distance(&corpus(&a), &corpus(&b), &cfg).unwrap();
        let mixed = chi_distance(&corpus(&mix1), &corpus(&mix2), &cfg).unwrap();
        assert!(mixed < pure, "{mixed} >= {pure}");
    }

    #[test]
    fn chi_respects_top_n() {
        let p = corpus(&["a a a a b"]);
        let q = corpus(&["a a a a c"]);
        let cfg = MetricConfig {
            top_n_tokens: 1,
            ..Default::default()
        };
        assert_eq!(chi_distance(&p, &q, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn zipf_recovers_power_law_slopes() {
        // 60 is divisible by 1..=6, so both tables are exact power laws
        let harmonic: Vec<usize> = (1..=6).map(|r| 60 / r).collect();
        let squared: Vec<usize> = (1..=6).map(|r| 3600 / (r * r)).collect();
        let z1 = zipf_coefficient(&with_counts(&harmonic), 5000).unwrap();
        let z2 = zipf_coefficient(&with_counts(&squared), 5000).unwrap();
        assert!((z1 - 1.0).abs() < 1e-6, "{z1}");
        assert!((z2 - 2.0).abs() < 1e-6, "{z2}");
        let cfg = MetricConfig::default();
        let d = zipf_distance(&with_counts(&harmonic), &with_counts(&squared), &cfg).unwrap();
        assert!((d - 1.0).abs() < 1e-6);
    }

    #[test]
    fn zipf_symmetric_and_zero_on_self() {
        let cfg = MetricConfig::default();
        let p = corpus(&["a a a b b c", "d"]);
        let q = corpus(&["x y y z z z z"]);
        assert_eq!(zipf_distance(&p, &p, &cfg).unwrap(), 0.0);
        assert_eq!(
            zipf_distance(&p, &q, &cfg).unwrap(),
            zipf_distance(&q, &p, &cfg).unwrap()
        );
    }

    #[test]
    fn zipf_degenerate_cases() {
        assert_eq!(zipf_coefficient(&corpus(&["a b c d"]), 5000).unwrap(), 0.0);
        assert!(zipf_coefficient(&corpus(&["a a a"]), 5000).is_err());
    }
}
