use crate::corpus::Sentence;

use super::{ExtractConfig, Lexicons, OpinionSpan, SpanSource};

/// A word token with character offsets into the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Token {
    pub start: usize,
    pub end: usize,
    /// Lowercased, with typographic apostrophes folded to `'`.
    pub norm: String,
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

/// Splits on whitespace and punctuation. Tokens are maximal alphanumeric
/// runs; an apostrophe between two alphanumerics stays inside the token.
pub(crate) fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if !chars[i].is_alphanumeric() {
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() {
            let inner_apostrophe = is_apostrophe(chars[i]) && chars.get(i + 1).is_some_and(|c| c.is_alphanumeric());
            if chars[i].is_alphanumeric() || inner_apostrophe {
                i += 1;
            } else {
                break;
            }
        }
        let norm =
            chars[start..i].iter().map(|&c| if is_apostrophe(c) { '\'' } else { c }).collect::<String>().to_lowercase();
        tokens.push(Token { start, end: i, norm });
    }
    tokens
}

struct FeatureMatch {
    first: usize,
    last: usize,
    canonical: String,
}

/// Greedy longest-match of lexicon feature phrases over the token stream.
fn match_features(tokens: &[Token], lexicons: &Lexicons) -> Vec<FeatureMatch> {
    let mut found = Vec::new();
    let longest = lexicons.max_feature_tokens();
    let mut i = 0;
    'scan: while i < tokens.len() {
        for len in (1..=longest.min(tokens.len() - i)).rev() {
            let key = tokens[i..i + len].iter().map(|t| t.norm.as_str()).collect::<Vec<_>>().join(" ");
            if let Some(canonical) = lexicons.lookup_feature(&key) {
                found.push(FeatureMatch { first: i, last: i + len - 1, canonical: canonical.to_string() });
                i += len;
                continue 'scan;
            }
        }
        i += 1;
    }
    found
}

/// Extracts one opinion span per canonical feature mentioned in `sentence`.
///
/// The score of a feature occurrence sums the weights of sentiment tokens
/// within `config.window` tokens of it. Each weight is scaled by the
/// intensifiers directly preceding the sentiment token and flipped when a
/// negator occurs within `config.negation_lookback` tokens before it. The
/// sum is clamped to `[-1, 1]`. When a feature occurs more than once in the
/// sentence, the occurrence with the largest magnitude is kept (earliest on
/// ties), so a sentence never yields two spans with the same identity.
pub fn extract_opinions(sentence: &Sentence, lexicons: &Lexicons, config: &ExtractConfig) -> Vec<OpinionSpan> {
    let tokens = tokenize(&sentence.text);
    let features = match_features(&tokens, lexicons);
    if features.is_empty() {
        return Vec::new();
    }
    let mut in_feature = vec![false; tokens.len()];
    for f in &features {
        in_feature[f.first..=f.last].iter_mut().for_each(|b| *b = true);
    }
    let chars: Vec<char> = sentence.text.chars().collect();

    let mut spans: Vec<OpinionSpan> = Vec::new();
    for f in &features {
        let mut score = 0.0;
        for (j, token) in tokens.iter().enumerate() {
            if in_feature[j] {
                continue;
            }
            let Some(weight) = lexicons.sentiment(&token.norm) else { continue };
            let distance = if j < f.first { f.first - j } else { j - f.last };
            if distance > config.window {
                continue;
            }
            let boost: f64 = tokens[..j].iter().rev().map_while(|t| lexicons.intensifier(&t.norm)).product();
            let negated =
                tokens[j.saturating_sub(config.negation_lookback)..j].iter().any(|t| lexicons.is_negator(&t.norm));
            let signed = if negated { -weight } else { weight };
            score += signed * boost;
        }
        let score = score.clamp(-1.0, 1.0);
        let surface: String = chars[tokens[f.first].start..tokens[f.last].end].iter().collect();
        let span = OpinionSpan {
            review_id: sentence.review_id.clone(),
            sentence_ordinal: sentence.ordinal,
            feature_surface: surface,
            feature_canonical: f.canonical.clone(),
            polarity_score: score,
            polarity_label: config.thresholds.label(score),
            source: SpanSource::Lexicon,
        };
        match spans.iter_mut().find(|s| s.feature_canonical == span.feature_canonical) {
            Some(existing) if span.polarity_score.abs() > existing.polarity_score.abs() => *existing = span,
            Some(_) => {}
            None => spans.push(span),
        }
    }
    spans
}
