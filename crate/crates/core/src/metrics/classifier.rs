//! Two-sample classifier test: a linear max-margin model trained by
//! stochastic subgradient descent on the L2-regularized hinge loss.

use rand::seq::SliceRandom;

use crate::corpus_io::EmbeddedCorpus;
use crate::error::{Error, Result};
use crate::rng::rng_for;

use super::{check_same_dim, MetricConfig, MetricId};

const MIN_ROWS: usize = 10;
const LAMBDA: f64 = 1e-3;
const ETA0: f64 = 0.5;

struct LinearSvm {
    w: Vec<f64>,
    b: f64,
}

impl LinearSvm {
    fn decision(&self, x: &[f64]) -> f64 {
        self.w.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.b
    }

    fn fit(xs: &[Vec<f64>], ys: &[f64], epochs: usize, rng: &mut impl rand::Rng) -> LinearSvm {
        let dim = xs[0].len();
        let mut model = LinearSvm {
            w: vec![0.0; dim],
            b: 0.0,
        };
        let mut order: Vec<usize> = (0..xs.len()).collect();
        let mut t = 0usize;
        for _ in 0..epochs {
            order.shuffle(rng);
            for &i in &order {
                let eta = ETA0 / (1.0 + ETA0 * LAMBDA * t as f64);
                t += 1;
                let margin = ys[i] * model.decision(&xs[i]);
                let shrink = 1.0 - eta * LAMBDA;
                model.w.iter_mut().for_each(|w| *w *= shrink);
                if margin < 1.0 {
                    for (w, v) in model.w.iter_mut().zip(&xs[i]) {
                        *w += eta * ys[i] * v;
                    }
                    model.b += eta * ys[i];
                }
            }
        }
        model
    }
}

/// Per-feature mean and standard deviation of the training rows.
fn standardizer(xs: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = xs.len() as f64;
    let dim = xs[0].len();
    let mut mean = vec![0.0; dim];
    for x in xs {
        for (m, v) in mean.iter_mut().zip(x) {
            *m += v / n;
        }
    }
    let mut sd = vec![0.0; dim];
    for x in xs {
        for ((s, v), m) in sd.iter_mut().zip(x).zip(&mean) {
            *s += (v - m) * (v - m) / n;
        }
    }
    for s in sd.iter_mut() {
        *s = if *s > 1e-24 { s.sqrt() } else { 1.0 };
    }
    (mean, sd)
}

/// Held-out accuracy of a linear classifier separating `p` from `q` on a
/// stratified split.
pub fn classifier_accuracy(p: &EmbeddedCorpus, q: &EmbeddedCorpus, cfg: &MetricConfig) -> Result<f64> {
    check_same_dim(MetricId::Classifier, p, q)?;
    if p.rows() < MIN_ROWS || q.rows() < MIN_ROWS {
        return Err(Error::metric(
            "CLASSIFIER",
            format!(
                "needs at least {MIN_ROWS} rows per side, got {} and {}",
                p.rows(),
                q.rows()
            ),
        ));
    }
    let mut rng = rng_for(cfg.seed, &[0x636c66]);

    let mut train: Vec<(&[f64], f64)> = Vec::new();
    let mut test: Vec<(&[f64], f64)> = Vec::new();
    for (ec, label) in [(p, -1.0), (q, 1.0)] {
        let mut idx: Vec<usize> = (0..ec.rows()).collect();
        idx.shuffle(&mut rng);
        let n_train = (cfg.classifier_split * ec.rows() as f64).round() as usize;
        let n_test = ec.rows() - n_train.min(ec.rows());
        if n_test < 2 || n_train == 0 {
            return Err(Error::metric(
                "CLASSIFIER",
                format!("split leaves {n_train} train / {n_test} test rows for one class"),
            ));
        }
        for (k, &i) in idx.iter().enumerate() {
            let item = (ec.row(i), label);
            if k < n_train {
                train.push(item);
            } else {
                test.push(item);
            }
        }
    }

    let raw: Vec<Vec<f64>> = train.iter().map(|(x, _)| x.to_vec()).collect();
    let (mean, sd) = standardizer(&raw);
    let scale = |x: &[f64]| -> Vec<f64> {
        x.iter()
            .zip(&mean)
            .zip(&sd)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    };
    let xs: Vec<Vec<f64>> = raw.iter().map(|x| scale(x)).collect();
    let ys: Vec<f64> = train.iter().map(|(_, y)| *y).collect();
    let model = LinearSvm::fit(&xs, &ys, cfg.classifier_epochs, &mut rng);

    let correct = test
        .iter()
        .filter(|(x, y)| {
            let predicted = if model.decision(&scale(x)) >= 0.0 {
                1.0
            } else {
                -1.0
            };
            predicted == *y
        })
        .count();
    Ok(correct as f64 / test.len() as f64)
}

/// `max(0, 2 * accuracy - 1)`: chance accuracy maps to 0, perfect to 1.
pub fn classifier_distance(p: &EmbeddedCorpus, q: &EmbeddedCorpus, cfg: &MetricConfig) -> Result<f64> {
    Ok((2.0 * classifier_accuracy(p, q, cfg)? - 1.0).max(0.0))
}
