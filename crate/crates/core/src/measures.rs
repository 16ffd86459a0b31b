//! Quality measures of a metric, computed from its KSC distance tables and
//! from sweeps over the source corpora.

use std::time::Instant;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ksc::{DistanceTable, JudgementSet};
use crate::metrics::{CorpusMetric, Sample};
use crate::rng::rng_for;

const MIN_TIMED: f64 = 0.010;

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|&x| x == v[0])
}

/// Average ranks (1-based), ties sharing the mean of their positions.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && v[order[end]] == v[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &o in &order[start..end] {
            ranks[o] = rank;
        }
        start = end;
    }
    ranks
}

fn check_pair(xs: &[f64], ys: &[f64], min: usize) -> Result<()> {
    if xs.len() != ys.len() || xs.len() < min {
        return Err(Error::Degenerate(format!(
            "need two equal-length series of at least {min} values, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    if is_constant(xs) || is_constant(ys) {
        return Err(Error::Degenerate("correlation of a constant series".into()));
    }
    Ok(())
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_pair(xs, ys, 2)?;
    let (mx, my) = (mean(xs), mean(ys));
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rank correlation with average ranks for ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_pair(xs, ys, 3)?;
    pearson(&average_ranks(xs), &average_ranks(ys))
}

/// One-way ANOVA effect size
/// `(SS_treat - df_treat MS_res) / (SS_tot + MS_res)`.
pub fn omega_squared(groups: &[Vec<f64>]) -> Result<f64> {
    if groups.len() < 2 {
        return Err(Error::Degenerate(format!(
            "need at least 2 groups, got {}",
            groups.len()
        )));
    }
    if groups.iter().any(Vec::is_empty) {
        return Err(Error::Degenerate("a group has no observations".into()));
    }
    let total: usize = groups.iter().map(Vec::len).sum();
    if total <= groups.len() {
        return Err(Error::Degenerate("no residual degrees of freedom".into()));
    }
    let all: Vec<f64> = groups.iter().flatten().copied().collect();
    let grand = mean(&all);
    let ss_tot: f64 = all.iter().map(|v| (v - grand).powi(2)).sum();
    let ss_treat: f64 = groups
        .iter()
        .map(|g| g.len() as f64 * (mean(g) - grand).powi(2))
        .sum();
    let df_treat = (groups.len() - 1) as f64;
    let ms_res = (ss_tot - ss_treat).max(0.0) / (total - groups.len()) as f64;
    if ss_tot + ms_res == 0.0 {
        return Ok(0.0);
    }
    Ok((ss_treat - df_treat * ms_res) / (ss_tot + ms_res))
}

/// Coefficient of determination of the least-squares line of `ys` on `xs`.
pub fn r_squared(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_pair(xs, ys, 2)?;
    let (mx, my) = (mean(xs), mean(ys));
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - my - slope * (x - mx)).powi(2))
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    Ok((1.0 - ss_res / ss_tot).clamp(0.0, 1.0))
}

/// Spearman correlation between separation and z-score. A metric that
/// returns the same value everywhere scores 0.
pub fn monotonicity(table: &DistanceTable) -> Result<f64> {
    let z = table.zs();
    if is_constant(&z) {
        return Ok(0.0);
    }
    spearman(&table.ells(), &z)
}

/// ω² of the z-scores grouped by separation.
pub fn separability(table: &DistanceTable) -> Result<f64> {
    let mut groups = vec![Vec::new(); table.k - 1];
    for e in &table.entries {
        groups[e.ell - 1].push(e.z);
    }
    omega_squared(&groups)
}

/// R² of z-score on separation; 0 for a constant metric.
pub fn linearity(table: &DistanceTable) -> Result<f64> {
    let z = table.zs();
    if is_constant(&z) {
        return Ok(0.0);
    }
    r_squared(&table.ells(), &z)
}

/// Visit every (judgement, repetition) with its inner and outer distance.
fn judged(table: &DistanceTable, j: &JudgementSet, mut visit: impl FnMut(f64, bool)) -> Result<()> {
    if j.k != table.k {
        return Err(Error::InvalidParameter(format!(
            "judgements for k = {} applied to a table with k = {}",
            j.k, table.k
        )));
    }
    if j.is_empty() || table.repetitions == 0 {
        return Err(Error::Degenerate("no judgements to score".into()));
    }
    for rep in 0..table.repetitions {
        for jd in j.iter() {
            let inner = table.raw(rep, jd.inner.0, jd.inner.1)?;
            let outer = table.raw(rep, jd.outer.0, jd.outer.1)?;
            visit(jd.weight(), inner <= outer);
        }
    }
    Ok(())
}

/// Fraction of judgements `d(c_q, c_r) <= d(c_i, c_j)` that hold, over all
/// repetitions. Ties count as correct.
pub fn accuracy(table: &DistanceTable, j: &JudgementSet) -> Result<f64> {
    let (mut hit, mut total) = (0usize, 0usize);
    judged(table, j, |_, ok| {
        total += 1;
        hit += usize::from(ok);
    })?;
    Ok(hit as f64 / total as f64)
}

/// Accuracy with each judgement weighted by its hardness, normalized by the
/// total weight.
pub fn weighted_accuracy(table: &DistanceTable, j: &JudgementSet) -> Result<f64> {
    let (mut hit, mut total) = (0.0, 0.0);
    judged(table, j, |w, ok| {
        total += w;
        if ok {
            hit += w;
        }
    })?;
    Ok(hit / total)
}

/// `1 - mean(|d - d_inf| / d_inf)`.
pub fn robustness_score(distances: &[f64], asymptote: f64) -> Result<f64> {
    if asymptote == 0.0 || !asymptote.is_finite() {
        return Err(Error::Degenerate(format!("asymptotic distance is {asymptote}")));
    }
    if distances.is_empty() {
        return Err(Error::Degenerate("no sweep points".into()));
    }
    let err: Vec<f64> = distances
        .iter()
        .map(|d| (d - asymptote).abs() / asymptote.abs())
        .collect();
    Ok(1.0 - mean(&err))
}

/// Sample sizes and repetitions of the size and imbalance sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobustnessConfig {
    pub size_grid: Vec<usize>,
    pub imbalance_grid: Vec<usize>,
    pub imbalance_total: usize,
    pub repetitions: usize,
    pub asymptote_size: usize,
    pub asymptote_repetitions: usize,
}

impl RobustnessConfig {
    /// The sweep `{50, 250, ..., 2850}` with total 2900 and asymptote 3000,
    /// scaled so the asymptote sample has `asymptote_size` rows.
    pub fn scaled(asymptote_size: usize) -> Self {
        let scale = |v: usize| (v * asymptote_size).div_ceil(3000).max(1);
        let grid: Vec<usize> = (0..15).map(|t| scale(50 + 200 * t)).collect();
        RobustnessConfig {
            size_grid: grid.clone(),
            imbalance_grid: grid,
            imbalance_total: scale(2900),
            repetitions: 10,
            asymptote_size,
            asymptote_repetitions: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.size_grid.is_empty() || self.imbalance_grid.is_empty() {
            return bad("robustness grids must not be empty".into());
        }
        if self.repetitions == 0 || self.asymptote_repetitions == 0 {
            return bad("robustness repetitions must be >= 1".into());
        }
        if let Some(&s) = self
            .imbalance_grid
            .iter()
            .find(|&&s| s == 0 || s >= self.imbalance_total)
        {
            return bad(format!(
                "imbalance grid point {s} must lie in 1..{}",
                self.imbalance_total
            ));
        }
        if self.size_grid.contains(&0) || self.asymptote_size == 0 {
            return bad("sample sizes must be >= 1".into());
        }
        Ok(())
    }

    pub fn max_source_rows(&self) -> usize {
        let grid_max = self.size_grid.iter().copied().max().unwrap_or(0);
        grid_max.max(self.asymptote_size).max(self.imbalance_total)
    }
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        RobustnessConfig::scaled(600)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub size_a: usize,
    pub size_b: usize,
    pub rep: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessResult {
    pub score: f64,
    pub asymptote: f64,
    pub points: Vec<SweepPoint>,
}

fn draw(source: &Sample, size: usize, seed: u64, tags: &[u64]) -> Result<Sample> {
    if size > source.len() {
        return Err(Error::InsufficientSource(format!(
            "cannot draw {size} samples from {} ({} available)",
            source.id(),
            source.len()
        )));
    }
    let mut rng = rng_for(seed, tags);
    let mut idx = index::sample(&mut rng, source.len(), size).into_vec();
    idx.sort_unstable();
    Ok(source.subset(source.id(), &idx))
}

fn sized_distance(
    a: &Sample,
    b: &Sample,
    metric: &dyn CorpusMetric,
    (size_a, size_b, rep): (usize, usize, usize),
    seed: u64,
    tag: u64,
) -> Result<SweepPoint> {
    let tags = [tag, size_a as u64, size_b as u64, rep as u64];
    let sa = draw(a, size_a, seed, &[tags[0], tags[1], tags[2], tags[3], 0xA])?;
    let sb = draw(b, size_b, seed, &[tags[0], tags[1], tags[2], tags[3], 0xB])?;
    Ok(SweepPoint {
        size_a,
        size_b,
        rep,
        distance: metric.distance(&sa, &sb)?,
    })
}

fn sweep(
    a: &Sample,
    b: &Sample,
    metric: &dyn CorpusMetric,
    cfg: &RobustnessConfig,
    sizes: Vec<(usize, usize)>,
    seed: u64,
    tag: u64,
) -> Result<RobustnessResult> {
    cfg.validate()?;
    let asym: Vec<(usize, usize, usize)> = (0..cfg.asymptote_repetitions)
        .map(|r| (cfg.asymptote_size, cfg.asymptote_size, r))
        .collect();
    let asymptote = asym
        .into_par_iter()
        .map(|job| sized_distance(a, b, metric, job, seed, 0xA5))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let asymptote = mean(&asymptote.iter().map(|p| p.distance).collect::<Vec<_>>());

    let jobs: Vec<(usize, usize, usize)> = sizes
        .into_iter()
        .flat_map(|(sa, sb)| (0..cfg.repetitions).map(move |r| (sa, sb, r)))
        .collect();
    let points = jobs
        .into_par_iter()
        .map(|job| sized_distance(a, b, metric, job, seed, tag))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let distances: Vec<f64> = points.iter().map(|p| p.distance).collect();
    Ok(RobustnessResult {
        score: robustness_score(&distances, asymptote)?,
        asymptote,
        points,
    })
}

/// Size robustness: how close the distance between equal-size samples of
/// `a` and `b` stays to the asymptotic distance across the size grid.
pub fn size_robustness(
    a: &Sample,
    b: &Sample,
    metric: &dyn CorpusMetric,
    cfg: &RobustnessConfig,
    seed: u64,
) -> Result<RobustnessResult> {
    let sizes = cfg.size_grid.iter().map(|&s| (s, s)).collect();
    sweep(a, b, metric, cfg, sizes, seed, 0x51)
}

/// Imbalance robustness: as [`size_robustness`] but with `|a_s| = s` and
/// `|b_s| = total - s`.
pub fn imbalance_robustness(
    a: &Sample,
    b: &Sample,
    metric: &dyn CorpusMetric,
    cfg: &RobustnessConfig,
    seed: u64,
) -> Result<RobustnessResult> {
    let total = cfg.imbalance_total;
    let sizes = cfg
        .imbalance_grid
        .iter()
        .map(|&s| (s, total.saturating_sub(s)))
        .collect();
    sweep(a, b, metric, cfg, sizes, seed, 0x11)
}

/// Hundreds of distance evaluations per second.
pub fn throughput(ops: usize, elapsed_secs: f64) -> f64 {
    ops as f64 / 100.0 / elapsed_secs
}

/// Time `n_ops` evaluations of `metric` on `(p, q)`, doubling the count
/// until the run takes at least 10 ms.
pub fn time_efficiency(metric: &dyn CorpusMetric, p: &Sample, q: &Sample, n_ops: usize) -> Result<f64> {
    if n_ops < 100 {
        return Err(Error::InvalidParameter(format!(
            "n_ops must be >= 100, got {n_ops}"
        )));
    }
    let mut ops = n_ops;
    loop {
        let start = Instant::now();
        for _ in 0..ops {
            std::hint::black_box(metric.distance(p, q)?);
        }
        let elapsed = start.elapsed().as_secs_f64();
        if elapsed >= MIN_TIMED {
            return Ok(throughput(ops, elapsed));
        }
        ops *= 2;
    }
}

/// One row of the summary: every measure of one metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureReport {
    pub metric: String,
    pub accuracy: Option<f64>,
    pub weighted_accuracy: Option<f64>,
    pub monotonicity: Option<f64>,
    pub separability: Option<f64>,
    pub linearity: Option<f64>,
    pub size_robustness: Option<f64>,
    pub imbalance_robustness: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_t: Option<f64>,
    pub repetitions: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl MeasureReport {
    pub const CSV_HEADER: [&'static str; 9] = ["metric", "A", "A_w", "T", "rho", "omega2", "R2", "S", "I"];

    pub fn empty(metric: impl Into<String>, repetitions: usize) -> Self {
        MeasureReport {
            metric: metric.into(),
            accuracy: None,
            weighted_accuracy: None,
            monotonicity: None,
            separability: None,
            linearity: None,
            size_robustness: None,
            imbalance_robustness: None,
            time_t: None,
            repetitions,
            error: None,
        }
    }

    /// Fill the five table-based measures.
    pub fn from_table(table: &DistanceTable, j: &JudgementSet) -> Result<Self> {
        let mut r = MeasureReport::empty(&table.metric, table.repetitions);
        r.accuracy = Some(accuracy(table, j)?);
        r.weighted_accuracy = Some(weighted_accuracy(table, j)?);
        r.monotonicity = Some(monotonicity(table)?);
        r.separability = Some(separability(table)?);
        r.linearity = Some(linearity(table)?);
        Ok(r)
    }

    /// CSV fields in header order; missing values are empty.
    pub fn csv_row(&self) -> Vec<String> {
        let f = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        vec![
            self.metric.clone(),
            f(self.accuracy),
            f(self.weighted_accuracy),
            f(self.time_t),
            f(self.monotonicity),
            f(self.separability),
            f(self.linearity),
            f(self.size_robustness),
            f(self.imbalance_robustness),
        ]
    }
}
