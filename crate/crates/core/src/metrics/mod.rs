//! The eight corpus distance metrics.
//!
//! Every metric maps a reference corpus `P` and a target corpus `Q` to a
//! non-negative distance. Similarity-valued metrics are reported as `1 - v`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::corpus_io::{Corpus, EmbeddedCorpus};
use crate::error::{Error, Result};

mod classifier;
mod fid;
mod irpr;
mod lexical;
mod manifold;
mod mauve;

pub use classifier::{classifier_accuracy, classifier_distance};
pub use fid::{fid, matrix_sqrt_trace, GaussianMoments};
pub use irpr::irpr_distance;
pub use lexical::{chi_distance, zipf_coefficient, zipf_distance};
pub use manifold::{dc_distance, density_coverage, knn_radius, pr_distance, precision_recall};
pub use mauve::{frontier_auc, kmeans, mauve_distance, quantized_histograms};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MetricId {
    Chi,
    Zipf,
    Fid,
    Pr,
    Dc,
    Mauve,
    Classifier,
    Irpr,
}

impl MetricId {
    pub const ALL: [MetricId; 8] = [
        MetricId::Chi,
        MetricId::Zipf,
        MetricId::Fid,
        MetricId::Pr,
        MetricId::Dc,
        MetricId::Mauve,
        MetricId::Classifier,
        MetricId::Irpr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricId::Chi => "CHI",
            MetricId::Zipf => "ZIPF",
            MetricId::Fid => "FID",
            MetricId::Pr => "PR",
            MetricId::Dc => "DC",
            MetricId::Mauve => "MAUVE",
            MetricId::Classifier => "CLASSIFIER",
            MetricId::Irpr => "IRPR",
        }
    }

    /// CHI and ZIPF work on tokens; the rest need sentence embeddings.
    pub fn needs_embeddings(self) -> bool {
        !matches!(self, MetricId::Chi | MetricId::Zipf)
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MetricId::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnknownMetric(s.to_owned()))
    }
}

impl Serialize for MetricId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for MetricId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Number of k-means clusters used by MAUVE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClusterCount {
    /// `max(2, (N_P + N_Q) / 20)`
    #[default]
    Auto,
    Fixed(usize),
}

impl ClusterCount {
    pub fn resolve(self, total_rows: usize) -> usize {
        match self {
            ClusterCount::Auto => (total_rows / 20).max(2),
            ClusterCount::Fixed(k) => k,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ClusterCountRepr {
    Fixed(usize),
    Named(String),
}

impl Serialize for ClusterCount {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ClusterCount::Auto => ClusterCountRepr::Named("auto".into()).serialize(s),
            ClusterCount::Fixed(k) => ClusterCountRepr::Fixed(*k).serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for ClusterCount {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match ClusterCountRepr::deserialize(d)? {
            ClusterCountRepr::Fixed(k) => Ok(ClusterCount::Fixed(k)),
            ClusterCountRepr::Named(s) if s.eq_ignore_ascii_case("auto") => Ok(ClusterCount::Auto),
            ClusterCountRepr::Named(s) => Err(serde::de::Error::custom(format!(
                "expected \"auto\" or an integer, found {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricConfig {
    pub top_n_tokens: usize,
    pub knn_k: usize,
    pub mauve_num_clusters: ClusterCount,
    pub mauve_scale_c: f64,
    pub mauve_grid_size: usize,
    pub classifier_split: f64,
    pub classifier_epochs: usize,
    pub seed: u64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            top_n_tokens: 5000,
            knn_k: 5,
            mauve_num_clusters: ClusterCount::Auto,
            mauve_scale_c: 5.0,
            mauve_grid_size: 100,
            classifier_split: 0.7,
            classifier_epochs: 5,
            seed: 0,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.top_n_tokens == 0 {
            return bad("top_n_tokens must be >= 1".into());
        }
        if self.knn_k == 0 {
            return bad("knn_k must be >= 1".into());
        }
        if matches!(self.mauve_num_clusters, ClusterCount::Fixed(k) if k < 1) {
            return bad("mauve_num_clusters must be >= 1".into());
        }
        if !(self.mauve_scale_c > 0.0 && self.mauve_scale_c.is_finite()) {
            return bad(format!(
                "mauve_scale_c must be positive, got {}",
                self.mauve_scale_c
            ));
        }
        if self.mauve_grid_size == 0 {
            return bad("mauve_grid_size must be >= 1".into());
        }
        if !(self.classifier_split > 0.0 && self.classifier_split < 1.0) {
            return bad(format!(
                "classifier_split must lie in (0, 1), got {}",
                self.classifier_split
            ));
        }
        if self.classifier_epochs == 0 {
            return bad("classifier_epochs must be >= 1".into());
        }
        Ok(())
    }
}

/// A corpus as seen by a metric: its text and, when available, one
/// embedding row per sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    text: Corpus,
    embedded: Option<EmbeddedCorpus>,
}

impl Sample {
    pub fn new(text: Corpus, embedded: Option<EmbeddedCorpus>) -> Result<Self> {
        if let Some(ec) = &embedded {
            if ec.rows() != text.len() {
                return Err(Error::InvalidMatrix(format!(
                    "{} has {} sentences but {} embedding rows",
                    text.id(),
                    text.len(),
                    ec.rows()
                )));
            }
        }
        Ok(Sample { text, embedded })
    }

    pub fn text(&self) -> &Corpus {
        &self.text
    }

    pub fn embedded(&self) -> Option<&EmbeddedCorpus> {
        self.embedded.as_ref()
    }

    pub fn id(&self) -> &str {
        self.text.id()
    }

    pub fn len(&self) -> usize {
        self.text.len()
    }

    pub fn is_empty(&self) -> bool {
        self.text.is_empty()
    }

    pub fn subset(&self, id: &str, indices: &[usize]) -> Sample {
        Sample {
            text: self.text.subset(id, indices),
            embedded: self.embedded.as_ref().map(|e| e.select(id, indices)),
        }
    }

    /// Concatenate samples; embeddings are kept only if every part has them.
    pub fn concat(id: &str, parts: &[&Sample]) -> Result<Sample> {
        let texts: Vec<&Corpus> = parts.iter().map(|p| &p.text).collect();
        let text = Corpus::concat(id, &texts)?;
        let embedded = match parts
            .iter()
            .map(|p| p.embedded.as_ref())
            .collect::<Option<Vec<_>>>()
        {
            Some(es) => Some(EmbeddedCorpus::concat(id, &es)?),
            None => None,
        };
        Ok(Sample { text, embedded })
    }

    fn require_embedded(&self, metric: MetricId) -> Result<&EmbeddedCorpus> {
        self.embedded.as_ref().ok_or_else(|| Error::MissingEmbeddings {
            metric: metric.name().to_owned(),
        })
    }
}

/// Anything that can measure the distance from a reference corpus to a
/// target corpus. Implemented by [`Metric`] and by synthetic metrics in
/// tests.
pub trait CorpusMetric: Sync {
    fn name(&self) -> String;
    fn distance(&self, reference: &Sample, target: &Sample) -> Result<f64>;
}

/// One of the built-in metrics with its configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    pub id: MetricId,
    pub config: MetricConfig,
}

impl Metric {
    pub fn new(id: MetricId, config: MetricConfig) -> Self {
        Metric { id, config }
    }
}

impl CorpusMetric for Metric {
    fn name(&self) -> String {
        self.id.name().to_owned()
    }

    fn distance(&self, p: &Sample, q: &Sample) -> Result<f64> {
        let cfg = &self.config;
        match self.id {
            MetricId::Chi => chi_distance(p.text(), q.text(), cfg),
            MetricId::Zipf => zipf_distance(p.text(), q.text(), cfg),
            id => {
                let (pe, qe) = (p.require_embedded(id)?, q.require_embedded(id)?);
                match id {
                    MetricId::Fid => fid(pe, qe),
                    MetricId::Pr => pr_distance(pe, qe, cfg),
                    MetricId::Dc => dc_distance(pe, qe, cfg),
                    MetricId::Mauve => mauve_distance(pe, qe, cfg),
                    MetricId::Classifier => classifier_distance(pe, qe, cfg),
                    MetricId::Irpr => irpr_distance(pe, qe),
                    MetricId::Chi | MetricId::Zipf => unreachable!(),
                }
            }
        }
    }
}

/// Harmonic mean of precision and recall; zero when both are zero.
pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall <= 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn check_same_dim(metric: MetricId, p: &EmbeddedCorpus, q: &EmbeddedCorpus) -> Result<()> {
    if p.dim() != q.dim() {
        return Err(Error::metric(
            metric.name(),
            format!("dimension mismatch: {} vs {}", p.dim(), q.dim()),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_names_parse_case_insensitively() {
        for id in MetricId::ALL {
            assert_eq!(id.name().to_lowercase().parse::<MetricId>().unwrap(), id);
        }
        assert_eq!("Mauve".parse::<MetricId>().unwrap(), MetricId::Mauve);
        assert!(matches!("bleu".parse::<MetricId>(), Err(Error::UnknownMetric(_))));
    }

    #[test]
    fn config_serde_accepts_auto_and_integer_clusters() {
        let cfg: MetricConfig = toml::from_str("mauve_num_clusters = \"auto\"").unwrap();
        assert_eq!(cfg.mauve_num_clusters, ClusterCount::Auto);
        let cfg: MetricConfig = toml::from_str("mauve_num_clusters = 7\nknn_k = 3").unwrap();
        assert_eq!(cfg.mauve_num_clusters, ClusterCount::Fixed(7));
        assert_eq!(cfg.knn_k, 3);
        assert_eq!(cfg.top_n_tokens, 5000);
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<MetricConfig>(&json).unwrap(), cfg);
    }

    #[test]
    fn config_validation() {
        assert!(MetricConfig::default().validate().is_ok());
        let bad = MetricConfig {
            classifier_split: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = MetricConfig {
            knn_k: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn auto_clusters() {
        assert_eq!(ClusterCount::Auto.resolve(10), 2);
        assert_eq!(ClusterCount::Auto.resolve(200), 10);
        assert_eq!(ClusterCount::Fixed(4).resolve(200), 4);
    }

    #[test]
    fn f1_edge_cases() {
        assert_eq!(f1(0.0, 0.0), 0.0);
        assert!((f1(0.5, 1.0) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn embedding_metrics_need_embeddings() {
        let text = Corpus::new("a", vec!["x y".into(), "y z".into()]).unwrap();
        let s = Sample::new(text, None).unwrap();
        let m = Metric::new(MetricId::Fid, MetricConfig::default());
        assert!(matches!(m.distance(&s, &s), Err(Error::MissingEmbeddings { .. })));
    }
}
