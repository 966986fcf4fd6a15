use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::extract::tokenize;
use super::{AnnotateError, Lexicons, OpinionSpan, PolarityThresholds, SpanSource};
use crate::corpus::{read_lines, CorpusError, IngestOptions, ReviewStore, Sentence};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnnotationRecord {
    review_id: String,
    sentence_ordinal: usize,
    feature: String,
    score: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ImportReport {
    pub lines_read: usize,
    pub imported: usize,
    pub malformed: Vec<(usize, String)>,
    /// Lines whose `(review_id, sentence_ordinal)` names no stored sentence.
    pub unknown_sentence: Vec<usize>,
    /// Lines whose feature does not occur in the referenced sentence.
    pub feature_not_in_sentence: Vec<usize>,
    /// Scores outside `[-1, 1]` that were clamped.
    pub clamped: Vec<usize>,
    /// Earlier imported records replaced by a later one for the same span.
    pub superseded: usize,
}

/// Finds `feature` as a token subsequence of `sentence` and returns the
/// sentence substring it covers, as written.
fn locate_feature(sentence: &Sentence, feature: &str) -> Option<String> {
    let needle: Vec<String> = tokenize(feature).into_iter().map(|t| t.norm).collect();
    if needle.is_empty() {
        return None;
    }
    let hay = tokenize(&sentence.text);
    let pos = hay.windows(needle.len()).position(|w| w.iter().zip(&needle).all(|(t, n)| t.norm == *n))?;
    let chars: Vec<char> = sentence.text.chars().collect();
    Some(chars[hay[pos].start..hay[pos + needle.len() - 1].end].iter().collect())
}

/// Reads externally produced `(review_id, sentence_ordinal, feature, score)`
/// annotations. Later records for the same span identity replace earlier
/// ones. The returned spans are sorted by review id, ordinal and feature.
pub fn import_annotations(
    path: &Path,
    store: &ReviewStore,
    lexicons: &Lexicons,
    thresholds: &PolarityThresholds,
    options: IngestOptions,
) -> Result<(Vec<OpinionSpan>, ImportReport), AnnotateError> {
    let lines = read_lines(path).map_err(|e| match e {
        CorpusError::Io { path, source } => AnnotateError::Io { path, source },
        other => AnnotateError::MalformedRecord { line: 0, reason: other.to_string() },
    })?;
    let mut report = ImportReport::default();
    let mut spans: BTreeMap<(String, usize, String), OpinionSpan> = BTreeMap::new();
    for (line, text) in lines {
        report.lines_read += 1;
        let record = match serde_json::from_str::<AnnotationRecord>(&text) {
            Ok(r) if r.score.is_finite() => r,
            Ok(r) => {
                let reason = format!("non-finite score {}", r.score);
                if options.strict {
                    return Err(AnnotateError::MalformedRecord { line, reason });
                }
                report.malformed.push((line, reason));
                continue;
            }
            Err(e) => {
                if options.strict {
                    return Err(AnnotateError::MalformedRecord { line, reason: e.to_string() });
                }
                report.malformed.push((line, e.to_string()));
                continue;
            }
        };
        let Some(sentence) = store.sentence(&record.review_id, record.sentence_ordinal) else {
            report.unknown_sentence.push(line);
            continue;
        };
        let (Some(surface), Some(canonical)) =
            (locate_feature(sentence, &record.feature), lexicons.canonicalize_feature(&record.feature))
        else {
            report.feature_not_in_sentence.push(line);
            continue;
        };
        let score = record.score.clamp(-1.0, 1.0);
        if score != record.score {
            report.clamped.push(line);
        }
        let span = OpinionSpan {
            review_id: record.review_id,
            sentence_ordinal: record.sentence_ordinal,
            feature_surface: surface,
            feature_canonical: canonical,
            polarity_score: score,
            polarity_label: thresholds.label(score),
            source: SpanSource::Imported,
        };
        let key = (span.review_id.clone(), span.sentence_ordinal, span.feature_canonical.clone());
        if spans.insert(key, span).is_some() {
            report.superseded += 1;
        }
    }
    report.imported = spans.len();
    Ok((spans.into_values().collect(), report))
}
