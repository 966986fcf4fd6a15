//! Sentence segmentation and feature-level opinion extraction.
//!
//! Opinions come either from the built-in lexicon scorer
//! ([`extract_opinions`]) or from an external annotator whose output is
//! read by [`import_annotations`]; [`merge_spans`] lets imported spans
//! override lexicon spans for the same sentence and feature.

mod extract;
mod import;
mod lexicon;
mod sentences;

use std::collections::BTreeMap;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ReviewStore;

pub use extract::extract_opinions;
pub use import::{import_annotations, ImportReport};
pub use lexicon::Lexicons;
pub use sentences::split_sentences;

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid lexicon{}: {reason}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    InvalidLexicon { line: Option<usize>, reason: String },
    #[error("invalid polarity thresholds: {0}")]
    InvalidThresholds(String),
    #[error("malformed annotation on line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolarityLabel {
    Positive,
    Negative,
    Neutral,
}

impl PolarityLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Positive => "positive",
            Self::Negative => "negative",
            Self::Neutral => "neutral",
        }
    }
}

impl std::fmt::Display for PolarityLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpanSource {
    Lexicon,
    Imported,
}

/// Score cut-offs: positive iff `score >= positive`, negative iff
/// `score <= negative`, neutral in between.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarityThresholds {
    pub positive: f64,
    pub negative: f64,
}

impl Default for PolarityThresholds {
    fn default() -> Self {
        PolarityThresholds { positive: 0.1, negative: -0.1 }
    }
}

impl PolarityThresholds {
    pub fn new(positive: f64, negative: f64) -> Result<Self, AnnotateError> {
        let in_range = |v: f64| (-1.0..=1.0).contains(&v);
        if !(in_range(positive) && in_range(negative)) || negative >= positive {
            return Err(AnnotateError::InvalidThresholds(format!(
                "need -1 <= negative < positive <= 1, got negative={negative} positive={positive}"
            )));
        }
        Ok(PolarityThresholds { positive, negative })
    }

    pub fn label(&self, score: f64) -> PolarityLabel {
        if score >= self.positive {
            PolarityLabel::Positive
        } else if score <= self.negative {
            PolarityLabel::Negative
        } else {
            PolarityLabel::Neutral
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractConfig {
    /// Tokens on either side of a feature term scanned for sentiment.
    pub window: usize,
    /// Tokens before a sentiment term scanned for negators.
    pub negation_lookback: usize,
    pub thresholds: PolarityThresholds,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig { window: 6, negation_lookback: 3, thresholds: PolarityThresholds::default() }
    }
}

/// One feature-level opinion grounded in a review sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpinionSpan {
    pub review_id: String,
    pub sentence_ordinal: usize,
    pub feature_surface: String,
    pub feature_canonical: String,
    pub polarity_score: f64,
    pub polarity_label: PolarityLabel,
    pub source: SpanSource,
}

/// Runs the lexicon extractor over every sentence of every review. Reviews
/// are processed in parallel; the result is in review-id order, then
/// sentence order, then order of first mention.
pub fn annotate_store(store: &ReviewStore, lexicons: &Lexicons, config: &ExtractConfig) -> Vec<OpinionSpan> {
    let reviews: Vec<_> = store.iter().collect();
    reviews
        .par_iter()
        .map(|stored| stored.sentences.iter().flat_map(|s| extract_opinions(s, lexicons, config)).collect::<Vec<_>>())
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// Combines lexicon and imported spans. An imported span replaces any
/// lexicon span with the same `(review_id, sentence_ordinal,
/// feature_canonical)`. Output is sorted by that triple.
pub fn merge_spans(lexicon: Vec<OpinionSpan>, imported: Vec<OpinionSpan>) -> Vec<OpinionSpan> {
    let mut merged: BTreeMap<(String, usize, String), OpinionSpan> = BTreeMap::new();
    for span in lexicon.into_iter().chain(imported) {
        let key = (span.review_id.clone(), span.sentence_ordinal, span.feature_canonical.clone());
        match merged.get(&key) {
            Some(existing) if existing.source == SpanSource::Imported && span.source == SpanSource::Lexicon => {}
            _ => {
                merged.insert(key, span);
            }
        }
    }
    merged.into_values().collect()
}
