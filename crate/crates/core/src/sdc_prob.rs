//! Exact probability model of corpora built from a pair of paraphrase
//! corpora, plus a Monte-Carlo simulator to check it against.
//!
//! A *double lottery* forms a multiset of `n` items by drawing `i` items and
//! then `n - i` items, each draw without replacement, from an `n`-element
//! universe. With an idealized semantic embedding both draws come from the
//! same universe `{1..n}` (a paraphrase maps to the same point); with a
//! non-semantic embedding the first draw comes from `{n+1..2n}` and the
//! second from `{2n+1..3n}`.
//!
//! `U_i` is the number of unique items in such a multiset and `Z_ij` the
//! similarity count between two independent multisets built with `i` and
//! `j`: the size of the unique-element intersection for the distributional
//! metric, or `n (1 - d_AVD)` for the Average Hausdorff metric. The AVD
//! count can be a half integer, so those distributions live on a doubled
//! lattice (`lattice = 2`, support values are `2 Z`).

use std::fmt;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_for;

/// Largest `n` for which binomials are computed exactly in integers.
const EXACT_LIMIT: usize = 64;
const TRIAL_BLOCK: usize = 4096;

/// Exact `C(n, k)` for `n <= 64`.
fn binomial_exact(n: usize, k: usize) -> u128 {
    debug_assert!(n <= EXACT_LIMIT);
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for t in 1..=k {
        // c * (n - k + t) is divisible by t at every step
        c = c * (n - k + t) as u128 / t as u128;
    }
    c
}

fn ln_binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (1..=k).map(|t| ((n - k + t) as f64 / t as f64).ln()).sum()
}

/// `P(X = x)` for `X ~ H(N, M, r)`: `r` draws without replacement from `N`
/// items of which `M` are of type 1, `X` counting the type-1 draws.
pub fn hypergeom_pmf(population: usize, successes: usize, draws: usize, x: usize) -> Result<f64> {
    if successes > population || draws > population {
        return Err(Error::InvalidParameter(format!(
            "hypergeometric needs M <= N and r <= N, got N = {population}, M = {successes}, r = {draws}"
        )));
    }
    let failures = population - successes;
    if x > draws.min(successes) || draws - x > failures {
        return Ok(0.0);
    }
    if population <= EXACT_LIMIT {
        let num = binomial_exact(successes, x) * binomial_exact(failures, draws - x);
        let den = binomial_exact(population, draws);
        Ok(num as f64 / den as f64)
    } else {
        Ok(
            (ln_binomial(successes, x) + ln_binomial(failures, draws - x) - ln_binomial(population, draws))
                .exp(),
        )
    }
}

/// Dense pmf of `H(N, M, r)` over `0..=r`.
fn hypergeom_dense(population: usize, successes: usize, draws: usize) -> Vec<f64> {
    (0..=draws)
        .map(|x| hypergeom_pmf(population, successes, draws, x).expect("validated parameters"))
        .collect()
}

fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (x, &pa) in a.iter().enumerate() {
        if pa == 0.0 {
            continue;
        }
        for (y, &pb) in b.iter().enumerate() {
            out[x + y] += pa * pb;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PmfKind {
    UniqueCount,
    Hypergeometric,
    Semantic,
    NonSemantic,
    NonDistributionalSemantic,
    Empirical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmfParams {
    pub n: usize,
    pub i: usize,
    pub j: Option<usize>,
    pub kind: PmfKind,
}

/// A finite pmf over integer lattice points. The value of a support point
/// is `support / lattice`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretePmf {
    pub support: Vec<i64>,
    pub probs: Vec<f64>,
    pub lattice: u32,
    pub params: PmfParams,
}

impl DiscretePmf {
    /// Build from weights indexed by lattice point `0..weights.len()`,
    /// dropping exact zeros.
    pub fn from_dense(weights: &[f64], lattice: u32, params: PmfParams) -> Self {
        let (support, probs) = weights
            .iter()
            .enumerate()
            .filter(|(_, &p)| p != 0.0)
            .map(|(s, &p)| (s as i64, p))
            .unzip();
        DiscretePmf {
            support,
            probs,
            lattice,
            params,
        }
    }

    pub fn point_mass(value: i64, lattice: u32, params: PmfParams) -> Self {
        DiscretePmf {
            support: vec![value],
            probs: vec![1.0],
            lattice,
            params,
        }
    }

    /// Probability of lattice point `s`.
    pub fn prob(&self, s: i64) -> f64 {
        self.support
            .binary_search(&s)
            .map(|k| self.probs[k])
            .unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn values(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let l = f64::from(self.lattice);
        self.support
            .iter()
            .zip(&self.probs)
            .map(move |(&s, &p)| (s as f64 / l, p))
    }

    pub fn mean(&self) -> f64 {
        self.values().map(|(v, p)| v * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.values().map(|(v, p)| (v - m) * (v - m) * p).sum()
    }

    /// Total-variation distance; both pmfs must share a lattice.
    pub fn tv_distance(&self, other: &DiscretePmf) -> f64 {
        assert_eq!(self.lattice, other.lattice, "pmfs on different lattices");
        let mut points: Vec<i64> = self.support.iter().chain(&other.support).copied().collect();
        points.sort_unstable();
        points.dedup();
        0.5 * points
            .iter()
            .map(|&s| (self.prob(s) - other.prob(s)).abs())
            .sum::<f64>()
    }

    /// Largest pointwise probability difference.
    pub fn max_abs_diff(&self, other: &DiscretePmf) -> f64 {
        assert_eq!(self.lattice, other.lattice, "pmfs on different lattices");
        self.support
            .iter()
            .chain(&other.support)
            .map(|&s| (self.prob(s) - other.prob(s)).abs())
            .fold(0.0, f64::max)
    }
}

fn check_indices(n: usize, idx: &[usize]) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be >= 1".into()));
    }
    if let Some(bad) = idx.iter().find(|&&k| k > n) {
        return Err(Error::InvalidParameter(format!("index {bad} exceeds n = {n}")));
    }
    Ok(())
}

/// Dense `P(U_i = u)` over `u in 0..=n`.
fn unique_dense(n: usize, i: usize) -> Vec<f64> {
    let hyper = hypergeom_dense(n, n - i, i);
    (0..=n)
        .map(|u| hyper.get(n - u).copied().unwrap_or(0.0))
        .collect()
}

/// Distribution of the number of unique items `U_i = n - X`,
/// `X ~ H(n, n - i, i)`.
pub fn unique_count_pmf(n: usize, i: usize) -> Result<DiscretePmf> {
    check_indices(n, &[i])?;
    Ok(DiscretePmf::from_dense(
        &unique_dense(n, i),
        1,
        PmfParams {
            n,
            i,
            j: None,
            kind: PmfKind::UniqueCount,
        },
    ))
}

/// `E[U_i] = n - i (n - i) / n`.
pub fn expected_unique(n: usize, i: usize) -> f64 {
    let (n, i) = (n as f64, i as f64);
    n - i * (n - i) / n
}

/// Distribution of the unique-element intersection `Z_ij` of two semantic
/// double lotteries: `Z | u_i, u_j ~ H(n, u_j, u_i)` mixed over the
/// independent unique counts.
pub fn semantic_intersection_pmf(n: usize, i: usize, j: usize) -> Result<DiscretePmf> {
    check_indices(n, &[i, j])?;
    let pu_i = unique_dense(n, i);
    let pu_j = unique_dense(n, j);
    let mut w = vec![0.0; n + 1];
    for (ui, &pi) in pu_i.iter().enumerate().filter(|(_, &p)| p > 0.0) {
        for (uj, &pj) in pu_j.iter().enumerate().filter(|(_, &p)| p > 0.0) {
            for (z, h) in hypergeom_dense(n, uj, ui).into_iter().enumerate() {
                w[z] += h * pi * pj;
            }
        }
    }
    Ok(DiscretePmf::from_dense(
        &w,
        1,
        PmfParams {
            n,
            i,
            j: Some(j),
            kind: PmfKind::Semantic,
        },
    ))
}

/// `E[Z_ij] = n - (1/n) [i(n-i) + j(n-j) - ij(n-i)(n-j)/n^2]`.
pub fn expected_intersection_semantic(n: usize, i: usize, j: usize) -> f64 {
    let (n, i, j) = (n as f64, i as f64, j as f64);
    n - (i * (n - i) + j * (n - j) - i * j * (n - i) * (n - j) / (n * n)) / n
}

/// Leading-order distributional distance `(i(n-i) + j(n-j)) / n^2`.
pub fn sdc_distance_approx(n: usize, i: usize, j: usize) -> f64 {
    let (n, i, j) = (n as f64, i as f64, j as f64);
    (i * (n - i) + j * (n - j)) / (n * n)
}

/// Distribution of `Z_ij = Z_1 + Z_2` for non-semantic lotteries, with
/// `Z_1 ~ H(n, i, j)` and `Z_2 ~ H(n, n - i, n - j)` independent.
pub fn nonsemantic_intersection_pmf(n: usize, i: usize, j: usize) -> Result<DiscretePmf> {
    check_indices(n, &[i, j])?;
    let w = convolve(&hypergeom_dense(n, i, j), &hypergeom_dense(n, n - i, n - j));
    Ok(DiscretePmf::from_dense(
        &w,
        1,
        PmfParams {
            n,
            i,
            j: Some(j),
            kind: PmfKind::NonSemantic,
        },
    ))
}

/// `E[Z_ij] = ij/n + (n-i)(n-j)/n`.
pub fn expected_intersection_nonsemantic(n: usize, i: usize, j: usize) -> f64 {
    let (n, i, j) = (n as f64, i as f64, j as f64);
    i * j / n + (n - i) * (n - j) / n
}

/// Distribution of the AVD similarity count for semantic lotteries, built
/// from the four conditionally independent hypergeometric terms
/// `H(n, u_j, i)`, `H(n, u_j, n - i)`, `H(n, u_i, j)`, `H(n, u_i, n - j)`
/// whose sum is `2 Z`. Support is on the doubled lattice.
pub fn nondistributional_semantic_pmf(n: usize, i: usize, j: usize) -> Result<DiscretePmf> {
    check_indices(n, &[i, j])?;
    let pu_i = unique_dense(n, i);
    let pu_j = unique_dense(n, j);
    let mut w = vec![0.0; 2 * n + 1];
    for (ui, &pi) in pu_i.iter().enumerate().filter(|(_, &p)| p > 0.0) {
        let from_j = convolve(&hypergeom_dense(n, ui, j), &hypergeom_dense(n, ui, n - j));
        for (uj, &pj) in pu_j.iter().enumerate().filter(|(_, &p)| p > 0.0) {
            let from_i = convolve(&hypergeom_dense(n, uj, i), &hypergeom_dense(n, uj, n - i));
            for (s, p) in convolve(&from_i, &from_j).into_iter().enumerate() {
                w[s] += p * pi * pj;
            }
        }
    }
    Ok(DiscretePmf::from_dense(
        &w,
        2,
        PmfParams {
            n,
            i,
            j: Some(j),
            kind: PmfKind::NonDistributionalSemantic,
        },
    ))
}

/// Average Hausdorff distance between two multisets under an element
/// distance `d`.
pub fn avd_distance_with<T>(a: &[T], b: &[T], d: impl Fn(&T, &T) -> f64) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidParameter("AVD needs non-empty inputs".into()));
    }
    let directed = |from: &[T], to: &[T]| -> f64 {
        from.iter()
            .map(|x| to.iter().map(|y| d(x, y)).fold(f64::INFINITY, f64::min))
            .sum::<f64>()
            / from.len() as f64
    };
    Ok(0.5 * (directed(a, b) + directed(b, a)))
}

/// Average Hausdorff distance under the 0/1 element metric `1 - [a == b]`.
pub fn avd_distance<T: PartialEq>(a: &[T], b: &[T]) -> Result<f64> {
    avd_distance_with(a, b, |x, y| if x == y { 0.0 } else { 1.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LotteryMode {
    Semantic,
    NonSemantic,
}

impl fmt::Display for LotteryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LotteryMode::Semantic => "semantic",
            LotteryMode::NonSemantic => "nonsemantic",
        })
    }
}

impl std::str::FromStr for LotteryMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "semantic" => Ok(LotteryMode::Semantic),
            "nonsemantic" => Ok(LotteryMode::NonSemantic),
            _ => Err(Error::InvalidParameter(format!("unknown lottery mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimilarityKind {
    SetIntersection,
    Avd,
}

impl std::str::FromStr for SimilarityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "setintersection" | "intersection" | "set" => Ok(SimilarityKind::SetIntersection),
            "avd" => Ok(SimilarityKind::Avd),
            _ => Err(Error::InvalidParameter(format!("unknown similarity kind {s:?}"))),
        }
    }
}

/// One double-lottery multiset: the first draw of size `i` and the second
/// of size `n - i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DoubleLotterySample {
    pub first: Vec<u32>,
    pub second: Vec<u32>,
}

impl DoubleLotterySample {
    pub fn multiset(&self) -> Vec<u32> {
        self.first.iter().chain(&self.second).copied().collect()
    }

    pub fn unique(&self) -> Vec<u32> {
        let mut u = self.multiset();
        u.sort_unstable();
        u.dedup();
        u
    }
}

fn draw(universe_start: u32, n: usize, amount: usize, rng: &mut impl Rng) -> Vec<u32> {
    index::sample(rng, n, amount)
        .into_iter()
        .map(|k| universe_start + k as u32)
        .collect()
}

/// Draw one lottery with an explicit generator.
pub fn draw_lottery(n: usize, i: usize, mode: LotteryMode, rng: &mut impl Rng) -> DoubleLotterySample {
    let (first_start, second_start) = match mode {
        LotteryMode::Semantic => (1, 1),
        LotteryMode::NonSemantic => (n as u32 + 1, 2 * n as u32 + 1),
    };
    DoubleLotterySample {
        first: draw(first_start, n, i, rng),
        second: draw(second_start, n, n - i, rng),
    }
}

pub fn double_lottery_sample(
    n: usize,
    i: usize,
    mode: LotteryMode,
    seed: u64,
) -> Result<DoubleLotterySample> {
    check_indices(n, &[i])?;
    let mut rng = rng_for(seed, &[n as u64, i as u64]);
    Ok(draw_lottery(n, i, mode, &mut rng))
}

/// Number of unique elements shared by the two multisets.
pub fn set_intersection_size(a: &DoubleLotterySample, b: &DoubleLotterySample) -> usize {
    let ub = b.unique();
    a.unique().iter().filter(|x| ub.binary_search(x).is_ok()).count()
}

/// `sum_a [a in B] + sum_b [b in A]` with multiplicity, i.e. twice the
/// rescaled AVD similarity `n (1 - d_AVD)` when both multisets have size `n`.
pub fn avd_similarity_doubled(a: &DoubleLotterySample, b: &DoubleLotterySample) -> usize {
    let (ma, mb) = (a.multiset(), b.multiset());
    let (ua, ub) = (a.unique(), b.unique());
    ma.iter().filter(|x| ub.binary_search(x).is_ok()).count()
        + mb.iter().filter(|x| ua.binary_search(x).is_ok()).count()
}

/// Empirical distribution of the similarity count over `trials` paired
/// lotteries. Trials run in fixed-size blocks, each with its own derived
/// generator, so the result does not depend on the thread count.
pub fn monte_carlo_intersection(
    n: usize,
    i: usize,
    j: usize,
    mode: LotteryMode,
    kind: SimilarityKind,
    trials: usize,
    seed: u64,
) -> Result<DiscretePmf> {
    check_indices(n, &[i, j])?;
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be >= 1".into()));
    }
    let lattice: u32 = match kind {
        SimilarityKind::SetIntersection => 1,
        SimilarityKind::Avd => 2,
    };
    let slots = lattice as usize * n + 1;
    let blocks = trials.div_ceil(TRIAL_BLOCK);
    let counts = (0..blocks)
        .into_par_iter()
        .map(|block| {
            let mut rng = rng_for(seed, &[n as u64, i as u64, j as u64, block as u64]);
            let mut counts = vec![0u64; slots];
            let todo = TRIAL_BLOCK.min(trials - block * TRIAL_BLOCK);
            for _ in 0..todo {
                let a = draw_lottery(n, i, mode, &mut rng);
                let b = draw_lottery(n, j, mode, &mut rng);
                let s = match kind {
                    SimilarityKind::SetIntersection => set_intersection_size(&a, &b),
                    SimilarityKind::Avd => avd_similarity_doubled(&a, &b),
                };
                counts[s] += 1;
            }
            counts
        })
        .reduce(
            || vec![0u64; slots],
            |mut acc, c| {
                acc.iter_mut().zip(c).for_each(|(a, b)| *a += b);
                acc
            },
        );
    let weights: Vec<f64> = counts.iter().map(|&c| c as f64 / trials as f64).collect();
    Ok(DiscretePmf::from_dense(
        &weights,
        lattice,
        PmfParams {
            n,
            i,
            j: Some(j),
            kind: PmfKind::Empirical,
        },
    ))
}

/// The analytic similarity-count models, for sweeping over `(i, j)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SdcModel {
    /// Distributional metric, semantic embedding.
    Semantic,
    /// Either metric, non-semantic embedding.
    NonSemantic,
    /// AVD metric, semantic embedding.
    NonDistributionalSemantic,
}

impl SdcModel {
    pub fn pmf(self, n: usize, i: usize, j: usize) -> Result<DiscretePmf> {
        match self {
            SdcModel::Semantic => semantic_intersection_pmf(n, i, j),
            SdcModel::NonSemantic => nonsemantic_intersection_pmf(n, i, j),
            SdcModel::NonDistributionalSemantic => nondistributional_semantic_pmf(n, i, j),
        }
    }

    /// Expected similarity count; closed form where one exists.
    pub fn expected(self, n: usize, i: usize, j: usize) -> Result<f64> {
        check_indices(n, &[i, j])?;
        match self {
            SdcModel::Semantic => Ok(expected_intersection_semantic(n, i, j)),
            SdcModel::NonSemantic => Ok(expected_intersection_nonsemantic(n, i, j)),
            SdcModel::NonDistributionalSemantic => Ok(self.pmf(n, i, j)?.mean()),
        }
    }

    /// Expected similarity for every `(i, j)` in `0..=n`; rows are `i`.
    pub fn expectation_grid(self, n: usize) -> Result<Vec<Vec<f64>>> {
        (0..=n)
            .map(|i| (0..=n).map(|j| self.expected(n, i, j)).collect())
            .collect()
    }
}

impl std::str::FromStr for SdcModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "semantic" => Ok(SdcModel::Semantic),
            "nonsemantic" => Ok(SdcModel::NonSemantic),
            "nondistributionalsemantic" | "avdsemantic" => Ok(SdcModel::NonDistributionalSemantic),
            _ => Err(Error::InvalidParameter(format!("unknown model {s:?}"))),
        }
    }
}
