//! Evaluation toolkit for corpus-level text distance metrics.
//!
//! Two source corpora are blended into a family of Known-Similarity Corpora
//! (KSC) whose pairwise distances have a known partial order. Each metric is
//! scored on how well its distances respect that order and how stable it is
//! under changes of sample size and size imbalance. The [`sdc_prob`] module
//! holds the exact probability model of corpora built from paraphrase pairs.

pub mod corpus_io;
mod error;
pub mod harness;
pub mod ksc;
pub mod measures;
pub mod metrics;
pub mod rng;
pub mod sdc_prob;

pub use corpus_io::{Corpus, EmbeddedCorpus};
pub use error::{Error, Result};
pub use ksc::{DistanceTable, JudgementSet, KscCollection};
pub use measures::MeasureReport;
pub use metrics::{CorpusMetric, Metric, MetricConfig, MetricId, Sample};
pub use sdc_prob::DiscretePmf;
