//! Per-product opinion index.
//!
//! Spans are grouped under `(product, feature, label)` and ordered best
//! first: descending `|score|`, ties by `(review_id, sentence_ordinal,
//! feature_surface)`. The index is immutable once built.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotate::{OpinionSpan, PolarityLabel};
use crate::corpus::{ProductCatalog, ReviewStore};

pub const SNAPSHOT_FORMAT: &str = "opinion-index";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("span references unknown sentence {sentence_ordinal} of review {review_id:?}")]
    DanglingSpan { review_id: String, sentence_ordinal: usize },
    #[error("span {0} occurs more than once")]
    DuplicateSpan(SpanId),
    #[error("cannot read or write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("index snapshot line {line}: {reason}")]
    Snapshot { line: usize, reason: String },
}

/// Identity of a span for exclusion sets and provenance links.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SpanId {
    pub review_id: String,
    pub sentence_ordinal: usize,
    pub feature: String,
}

impl SpanId {
    pub fn of(span: &OpinionSpan) -> Self {
        SpanId {
            review_id: span.review_id.clone(),
            sentence_ordinal: span.sentence_ordinal,
            feature: span.feature_canonical.clone(),
        }
    }
}

impl std::fmt::Display for SpanId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}#{}:{}", self.review_id, self.sentence_ordinal, self.feature)
    }
}

type Key = (String, String, PolarityLabel);

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OpinionIndex {
    entries: BTreeMap<Key, Vec<OpinionSpan>>,
    /// Features with at least one non-neutral span, per product.
    feature_directory: BTreeMap<String, BTreeSet<String>>,
    by_id: BTreeMap<SpanId, (String, OpinionSpan)>,
}

/// The best-first ordering of spans within one key.
pub fn span_order(a: &OpinionSpan, b: &OpinionSpan) -> Ordering {
    b.polarity_score
        .abs()
        .total_cmp(&a.polarity_score.abs())
        .then_with(|| a.review_id.cmp(&b.review_id))
        .then_with(|| a.sentence_ordinal.cmp(&b.sentence_ordinal))
        .then_with(|| a.feature_surface.cmp(&b.feature_surface))
}

#[derive(Serialize, Deserialize)]
struct SnapshotHeader {
    format: String,
    version: u32,
    spans: usize,
}

#[derive(Serialize, Deserialize)]
struct SnapshotLine {
    product_id: String,
    #[serde(flatten)]
    span: OpinionSpan,
}

impl OpinionIndex {
    pub fn build(catalog: &ProductCatalog, store: &ReviewStore, spans: &[OpinionSpan]) -> Result<Self, IndexError> {
        let mut placed = Vec::with_capacity(spans.len());
        for span in spans {
            let dangling = || IndexError::DanglingSpan {
                review_id: span.review_id.clone(),
                sentence_ordinal: span.sentence_ordinal,
            };
            store.sentence(&span.review_id, span.sentence_ordinal).ok_or_else(dangling)?;
            let product = store.product_of(&span.review_id).filter(|p| catalog.contains(p)).ok_or_else(dangling)?;
            placed.push((product.to_string(), span.clone()));
        }
        Self::from_placed(placed)
    }

    fn from_placed(placed: Vec<(String, OpinionSpan)>) -> Result<Self, IndexError> {
        let mut index = OpinionIndex::default();
        for (product, span) in placed {
            let id = SpanId::of(&span);
            if index.by_id.contains_key(&id) {
                return Err(IndexError::DuplicateSpan(id));
            }
            if span.polarity_label != PolarityLabel::Neutral {
                index.feature_directory.entry(product.clone()).or_default().insert(span.feature_canonical.clone());
            }
            index
                .entries
                .entry((product.clone(), span.feature_canonical.clone(), span.polarity_label))
                .or_default()
                .push(span.clone());
            index.by_id.insert(id, (product, span));
        }
        for list in index.entries.values_mut() {
            list.sort_by(span_order);
        }
        Ok(index)
    }

    pub fn is_empty(&self) -> bool {
        self.by_id.is_empty()
    }

    pub fn span_count(&self) -> usize {
        self.by_id.len()
    }

    /// Non-excluded spans for a key in best-first order. Neutral keys yield
    /// nothing.
    pub fn candidates<'a: 'e, 'e>(
        &'a self,
        product: &str,
        feature: &str,
        label: PolarityLabel,
        exclude: &'e BTreeSet<SpanId>,
    ) -> impl Iterator<Item = &'a OpinionSpan> + 'e {
        let list = if label == PolarityLabel::Neutral {
            None
        } else {
            self.entries.get(&(product.to_string(), feature.to_string(), label))
        };
        list.into_iter().flatten().filter(move |s| !exclude.contains(&SpanId::of(s)))
    }

    /// First non-excluded span for the key, if any.
    pub fn query(
        &self,
        product: &str,
        feature: &str,
        label: PolarityLabel,
        exclude: &BTreeSet<SpanId>,
    ) -> Option<&OpinionSpan> {
        self.candidates(product, feature, label, exclude).next()
    }

    /// `(feature, count)` for a product, by descending count then name.
    /// With `label`, only spans of that label are counted; without, all.
    pub fn features_of(&self, product: &str, label: Option<PolarityLabel>) -> Vec<(String, usize)> {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        let from = (product.to_string(), String::new(), PolarityLabel::Positive);
        for ((p, feature, l), spans) in self.entries.range(from..) {
            if p != product {
                break;
            }
            if label.is_none_or(|want| want == *l) {
                *counts.entry(feature).or_default() += spans.len();
            }
        }
        let mut out: Vec<(String, usize)> = counts.into_iter().map(|(f, c)| (f.to_string(), c)).collect();
        out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        out
    }

    pub fn directory(&self, product: &str) -> Option<&BTreeSet<String>> {
        self.feature_directory.get(product)
    }

    /// Number of positive or negative spans indexed for a product.
    pub fn opinion_count(&self, product: &str) -> usize {
        self.features_of(product, Some(PolarityLabel::Positive)).iter().map(|f| f.1).sum::<usize>()
            + self.features_of(product, Some(PolarityLabel::Negative)).iter().map(|f| f.1).sum::<usize>()
    }

    /// Looks a span up by identity, returning it with its product id.
    pub fn span(&self, id: &SpanId) -> Option<(&str, &OpinionSpan)> {
        self.by_id.get(id).map(|(p, s)| (p.as_str(), s))
    }

    /// All spans with their product, in span-identity order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &OpinionSpan)> {
        self.by_id.values().map(|(p, s)| (p.as_str(), s))
    }

    /// Writes a line-record snapshot: a header line, then one span per line.
    pub fn save(&self, path: &Path) -> Result<(), IndexError> {
        let io = |source| IndexError::Io { path: path.to_path_buf(), source };
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        let header =
            SnapshotHeader { format: SNAPSHOT_FORMAT.into(), version: SNAPSHOT_VERSION, spans: self.by_id.len() };
        write_record(&mut w, &header).map_err(io)?;
        for (product, span) in self.by_id.values() {
            write_record(&mut w, &SnapshotLine { product_id: product.clone(), span: span.clone() }).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self, IndexError> {
        let io = |source| IndexError::Io { path: path.to_path_buf(), source };
        let reader = BufReader::new(File::open(path).map_err(io)?);
        let mut lines = reader.lines().enumerate();
        let bad = |line: usize, reason: String| IndexError::Snapshot { line, reason };
        let header: SnapshotHeader = match lines.next() {
            Some((_, l)) => serde_json::from_str(&l.map_err(io)?).map_err(|e| bad(1, e.to_string()))?,
            None => return Err(bad(1, "missing header".into())),
        };
        if header.format != SNAPSHOT_FORMAT || header.version != SNAPSHOT_VERSION {
            return Err(bad(1, format!("unsupported snapshot {} v{}", header.format, header.version)));
        }
        let mut placed = Vec::with_capacity(header.spans);
        for (i, line) in lines {
            let line = line.map_err(io)?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: SnapshotLine = serde_json::from_str(&line).map_err(|e| bad(i + 1, e.to_string()))?;
            placed.push((rec.product_id, rec.span));
        }
        if placed.len() != header.spans {
            return Err(bad(1, format!("header announces {} spans, found {}", header.spans, placed.len())));
        }
        Self::from_placed(placed)
    }
}

fn write_record<T: Serialize>(w: &mut impl Write, value: &T) -> std::io::Result<()> {
    serde_json::to_writer(&mut *w, value)?;
    w.write_all(b"\n")
}
