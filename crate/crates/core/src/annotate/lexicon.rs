use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use super::extract::tokenize;
use super::AnnotateError;

const BUILTIN_LEXICON: &str = include_str!("../../data/lexicon.tsv");

/// Feature, sentiment, negator and intensifier vocabularies.
///
/// Lexicon files are line-oriented: a `[features]`, `[sentiment]`,
/// `[negators]` or `[intensifiers]` header opens a section, and each
/// following line is `term<TAB>value`. Feature values are canonical keys
/// (omit the value to use the stemmed term itself); sentiment values are
/// weights in `[-1, 1]`; intensifier values are positive multipliers;
/// negators take no value. Blank lines and `#` comments are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct Lexicons {
    feature_terms: BTreeMap<String, String>,
    sentiment_terms: BTreeMap<String, f64>,
    negators: BTreeSet<String>,
    intensifiers: BTreeMap<String, f64>,
    max_feature_tokens: usize,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    Features,
    Sentiment,
    Negators,
    Intensifiers,
}

fn invalid(line: Option<usize>, reason: impl Into<String>) -> AnnotateError {
    AnnotateError::InvalidLexicon { line, reason: reason.into() }
}

/// Lowercased token key used for every lexicon lookup.
fn token_key(term: &str) -> String {
    tokenize(term).into_iter().map(|t| t.norm).collect::<Vec<_>>().join(" ")
}

/// Drops one trailing `s` from keys longer than three characters.
pub(crate) fn strip_plural(key: &str) -> &str {
    if key.chars().count() > 3 && key.ends_with('s') {
        &key[..key.len() - 1]
    } else {
        key
    }
}

impl Lexicons {
    pub fn new<F, S, N, I>(features: F, sentiment: S, negators: N, intensifiers: I) -> Result<Self, AnnotateError>
    where
        F: IntoIterator<Item = (String, String)>,
        S: IntoIterator<Item = (String, f64)>,
        N: IntoIterator<Item = String>,
        I: IntoIterator<Item = (String, f64)>,
    {
        let mut lex = Lexicons {
            feature_terms: BTreeMap::new(),
            sentiment_terms: BTreeMap::new(),
            negators: BTreeSet::new(),
            intensifiers: BTreeMap::new(),
            max_feature_tokens: 0,
        };
        for (surface, canonical) in features {
            lex.add_feature(&surface, &canonical, None)?;
        }
        for (term, weight) in sentiment {
            lex.add_sentiment(&term, weight, None)?;
        }
        for term in negators {
            lex.add_negator(&term, None)?;
        }
        for (term, factor) in intensifiers {
            lex.add_intensifier(&term, factor, None)?;
        }
        lex.check_roles()?;
        Ok(lex)
    }

    /// The phone-domain lexicon shipped with the crate.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_LEXICON).expect("built-in lexicon is valid")
    }

    pub fn load(path: &Path) -> Result<Self, AnnotateError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| AnnotateError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, AnnotateError> {
        let mut lex = Lexicons {
            feature_terms: BTreeMap::new(),
            sentiment_terms: BTreeMap::new(),
            negators: BTreeSet::new(),
            intensifiers: BTreeMap::new(),
            max_feature_tokens: 0,
        };
        let mut section = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = Some(i + 1);
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = Some(match name.trim() {
                    "features" => Section::Features,
                    "sentiment" => Section::Sentiment,
                    "negators" => Section::Negators,
                    "intensifiers" => Section::Intensifiers,
                    other => return Err(invalid(line_no, format!("unknown section [{other}]"))),
                });
                continue;
            }
            let Some(section) = section else {
                return Err(invalid(line_no, "entry before any section header"));
            };
            let mut parts = raw.split('\t').map(str::trim);
            let term = parts.next().unwrap_or_default();
            let value = parts.next().filter(|v| !v.is_empty());
            if parts.next().is_some() {
                return Err(invalid(line_no, "more than two tab-separated fields"));
            }
            let number = |v: Option<&str>| -> Result<f64, AnnotateError> {
                let v = v.ok_or_else(|| invalid(line_no, format!("{term:?} needs a numeric value")))?;
                v.parse::<f64>().map_err(|_| invalid(line_no, format!("{v:?} is not a number")))
            };
            match section {
                Section::Features => {
                    let canonical = match value {
                        Some(v) => v.to_string(),
                        None => strip_plural(&token_key(term)).to_string(),
                    };
                    lex.add_feature(term, &canonical, line_no)?;
                }
                Section::Sentiment => lex.add_sentiment(term, number(value)?, line_no)?,
                Section::Negators => lex.add_negator(term, line_no)?,
                Section::Intensifiers => lex.add_intensifier(term, number(value)?, line_no)?,
            }
        }
        lex.check_roles()?;
        Ok(lex)
    }

    fn single_token(term: &str, line: Option<usize>) -> Result<String, AnnotateError> {
        let tokens = tokenize(term);
        match tokens.as_slice() {
            [one] => Ok(one.norm.clone()),
            [] => Err(invalid(line, "empty term")),
            _ => Err(invalid(line, format!("{term:?} must be a single token"))),
        }
    }

    fn add_feature(&mut self, surface: &str, canonical: &str, line: Option<usize>) -> Result<(), AnnotateError> {
        let key = token_key(surface);
        if key.is_empty() {
            return Err(invalid(line, "empty feature term"));
        }
        let canonical = canonical.trim();
        if canonical.is_empty() {
            return Err(invalid(line, format!("feature {surface:?} has an empty canonical key")));
        }
        if canonical.chars().any(char::is_uppercase) {
            return Err(invalid(line, format!("canonical key {canonical:?} is not lowercase")));
        }
        self.max_feature_tokens = self.max_feature_tokens.max(key.split(' ').count());
        self.feature_terms.insert(key, canonical.to_string());
        Ok(())
    }

    fn add_sentiment(&mut self, term: &str, weight: f64, line: Option<usize>) -> Result<(), AnnotateError> {
        let key = Self::single_token(term, line)?;
        if !(-1.0..=1.0).contains(&weight) {
            return Err(invalid(line, format!("weight {weight} for {term:?} outside [-1, 1]")));
        }
        self.sentiment_terms.insert(key, weight);
        Ok(())
    }

    fn add_negator(&mut self, term: &str, line: Option<usize>) -> Result<(), AnnotateError> {
        let key = Self::single_token(term, line)?;
        self.negators.insert(key);
        Ok(())
    }

    fn add_intensifier(&mut self, term: &str, factor: f64, line: Option<usize>) -> Result<(), AnnotateError> {
        let key = Self::single_token(term, line)?;
        if !(factor.is_finite() && factor > 0.0) {
            return Err(invalid(line, format!("multiplier {factor} for {term:?} must be positive")));
        }
        self.intensifiers.insert(key, factor);
        Ok(())
    }

    /// A token may play only one of the sentiment / negator / intensifier roles.
    fn check_roles(&self) -> Result<(), AnnotateError> {
        for term in self.sentiment_terms.keys() {
            if self.negators.contains(term) || self.intensifiers.contains_key(term) {
                return Err(invalid(None, format!("{term:?} has more than one role")));
            }
        }
        if let Some(term) = self.negators.iter().find(|t| self.intensifiers.contains_key(*t)) {
            return Err(invalid(None, format!("{term:?} has more than one role")));
        }
        Ok(())
    }

    /// Canonical feature for an already token-normalized phrase, trying the
    /// phrase itself and then its singular form.
    pub(crate) fn lookup_feature(&self, key: &str) -> Option<&str> {
        self.feature_terms.get(key).or_else(|| self.feature_terms.get(strip_plural(key))).map(String::as_str)
    }

    /// Canonical key for a free-form feature name: lexicon alias when known,
    /// otherwise the lowercased, singularized phrase.
    pub fn canonicalize_feature(&self, term: &str) -> Option<String> {
        let key = token_key(term);
        if key.is_empty() {
            return None;
        }
        Some(match self.lookup_feature(&key) {
            Some(canonical) => canonical.to_string(),
            None => strip_plural(&key).to_string(),
        })
    }

    pub fn sentiment(&self, token: &str) -> Option<f64> {
        self.sentiment_terms.get(token).copied()
    }

    pub fn is_negator(&self, token: &str) -> bool {
        self.negators.contains(token)
    }

    pub fn intensifier(&self, token: &str) -> Option<f64> {
        self.intensifiers.get(token).copied()
    }

    pub(crate) fn max_feature_tokens(&self) -> usize {
        self.max_feature_tokens
    }

    pub fn feature_term_count(&self) -> usize {
        self.feature_terms.len()
    }

    pub fn sentiment_term_count(&self) -> usize {
        self.sentiment_terms.len()
    }
}
