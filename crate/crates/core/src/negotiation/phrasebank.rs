use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;

use super::{NegotiationError, PairKind};
use crate::corpus::SearchableField;
use crate::dialog::Speaker;
use crate::seed::DialogRng;

const BUILTIN: &str = include_str!("../../data/phrasebank.txt");

/// Surface templates for every dialog-pair half and for the search stage.
///
/// Loading validates every section up front so realization can only fail on
/// a slot the caller left unbound.
#[derive(Debug, Clone, PartialEq)]
pub struct Phrasebank {
    pairs: BTreeMap<(PairKind, SpeakerKey), Vec<String>>,
    questions: BTreeMap<SearchableField, Vec<String>>,
    answers: Vec<String>,
    no_preference: Vec<String>,
    need_cues: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum SpeakerKey {
    Customer,
    Assistant,
}

impl From<Speaker> for SpeakerKey {
    fn from(s: Speaker) -> Self {
        match s {
            Speaker::Customer => SpeakerKey::Customer,
            Speaker::Assistant => SpeakerKey::Assistant,
        }
    }
}

/// Values for the placeholders of one utterance.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UtteranceSlots<'a> {
    pub feature: Option<&'a str>,
    pub product_title: Option<&'a str>,
    pub opinion: Option<&'a str>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Pair(PairKind, SpeakerKey),
    Question(SearchableField),
    Answer,
    NoPreference,
    NeedCue,
}

impl Section {
    fn parse(name: &str) -> Option<Self> {
        if let Some(field) = name.strip_prefix("search.question.") {
            return SearchableField::from_name(field).map(Section::Question);
        }
        match name {
            "search.answer" => return Some(Section::Answer),
            "search.no_preference" => return Some(Section::NoPreference),
            "cue.need" => return Some(Section::NeedCue),
            _ => {}
        }
        let (kind, speaker) = name.split_once('.')?;
        let kind = PairKind::ALL.into_iter().find(|k| k.name() == kind)?;
        let speaker = match speaker {
            "customer" => SpeakerKey::Customer,
            "assistant" => SpeakerKey::Assistant,
            _ => return None,
        };
        Some(Section::Pair(kind, speaker))
    }

    fn name(self) -> String {
        match self {
            Section::Pair(kind, SpeakerKey::Customer) => format!("{}.customer", kind.name()),
            Section::Pair(kind, SpeakerKey::Assistant) => format!("{}.assistant", kind.name()),
            Section::Question(field) => format!("search.question.{}", field.name()),
            Section::Answer => "search.answer".into(),
            Section::NoPreference => "search.no_preference".into(),
            Section::NeedCue => "cue.need".into(),
        }
    }

    fn allowed(self) -> &'static [&'static str] {
        match self {
            Section::Pair(..) => &["feature", "product_title", "opinion"],
            Section::Answer => &["value"],
            Section::NeedCue => &["feature"],
            Section::Question(_) | Section::NoPreference => &[],
        }
    }

    /// Checks placeholder counts required by the section.
    fn check(self, names: &[&str]) -> Result<(), String> {
        let count = |n: &str| names.iter().filter(|x| **x == n).count();
        match self {
            Section::Pair(PairKind::RequestInform, SpeakerKey::Customer) => {
                if count("opinion") != 0 {
                    return Err("the neutral question must not contain {opinion}".into());
                }
                if count("feature") == 0 {
                    return Err("the neutral question must contain {feature}".into());
                }
            }
            Section::Pair(kind, speaker) => {
                if count("opinion") != 1 {
                    return Err("must contain {opinion} exactly once".into());
                }
                if kind == PairKind::DenySwitchProduct
                    && speaker == SpeakerKey::Assistant
                    && count("product_title") == 0
                {
                    return Err("must name the offered product with {product_title}".into());
                }
            }
            Section::Answer => {
                if count("value") != 1 {
                    return Err("must contain {value} exactly once".into());
                }
            }
            Section::NeedCue => {
                if count("feature") != 1 {
                    return Err("must contain {feature} exactly once".into());
                }
            }
            Section::Question(_) | Section::NoPreference => {}
        }
        Ok(())
    }

    fn all() -> Vec<Section> {
        let mut all: Vec<Section> = PairKind::ALL
            .into_iter()
            .flat_map(|k| [Section::Pair(k, SpeakerKey::Customer), Section::Pair(k, SpeakerKey::Assistant)])
            .collect();
        all.extend(SearchableField::ALL.map(Section::Question));
        all.push(Section::Answer);
        all.push(Section::NoPreference);
        all.push(Section::NeedCue);
        all
    }
}

/// Splits a template into literal and placeholder pieces.
enum Piece<'a> {
    Literal(&'a str),
    Slot(&'a str),
}

fn pieces(template: &str) -> Result<Vec<Piece<'_>>, String> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find(['{', '}']) {
        if rest[open..].starts_with('}') {
            return Err("unmatched '}'".into());
        }
        let close = rest[open..].find('}').ok_or("unmatched '{'")? + open;
        let name = &rest[open + 1..close];
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_lowercase() || c == '_') {
            return Err(format!("bad placeholder {{{name}}}"));
        }
        out.push(Piece::Literal(&rest[..open]));
        out.push(Piece::Slot(name));
        rest = &rest[close + 1..];
    }
    out.push(Piece::Literal(rest));
    Ok(out)
}

/// Single-pass substitution; inserted values are never rescanned.
fn fill(template: &str, lookup: impl Fn(&str) -> Option<String>, section: &str) -> Result<String, NegotiationError> {
    let mut out = String::with_capacity(template.len() + 64);
    let parsed = pieces(template).map_err(|reason| NegotiationError::InvalidPhrasebank {
        line: None,
        section: Some(section.to_string()),
        reason,
    })?;
    for piece in parsed {
        match piece {
            Piece::Literal(s) => out.push_str(s),
            Piece::Slot(name) => match lookup(name) {
                Some(v) => out.push_str(&v),
                None => {
                    return Err(NegotiationError::UnboundSlot {
                        section: section.to_string(),
                        placeholder: name.to_string(),
                    })
                }
            },
        }
    }
    Ok(out)
}

impl Phrasebank {
    /// The shipped phrasebank.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN).expect("built-in phrasebank is valid")
    }

    pub fn load(path: &Path) -> Result<Self, NegotiationError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| NegotiationError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text)
    }

    /// Parses the sectioned format: `[section]` headers, one template per
    /// line, `#` comments. Every section must be present and non-empty.
    pub fn parse(text: &str) -> Result<Self, NegotiationError> {
        let invalid = |line: Option<usize>, section: Option<String>, reason: String| {
            NegotiationError::InvalidPhrasebank { line, section, reason }
        };
        let mut sections: Vec<(Section, Vec<String>)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let section = Section::parse(name.trim())
                    .ok_or_else(|| invalid(Some(line_no), None, format!("unknown section [{name}]")))?;
                if sections.iter().any(|(s, _)| *s == section) {
                    return Err(invalid(Some(line_no), Some(section.name()), "section repeated".into()));
                }
                sections.push((section, Vec::new()));
                continue;
            }
            let Some((section, entries)) = sections.last_mut() else {
                return Err(invalid(Some(line_no), None, "template outside any section".into()));
            };
            let at = |reason: String| invalid(Some(line_no), Some(section.name()), reason);
            let names: Vec<&str> = pieces(line)
                .map_err(at)?
                .into_iter()
                .filter_map(|p| match p {
                    Piece::Slot(n) => Some(n),
                    Piece::Literal(_) => None,
                })
                .collect();
            if let Some(bad) = names.iter().find(|n| !section.allowed().contains(n)) {
                return Err(at(format!("placeholder {{{bad}}} is not allowed here")));
            }
            section.check(&names).map_err(at)?;
            entries.push(line.to_string());
        }

        let mut bank = Phrasebank {
            pairs: BTreeMap::new(),
            questions: BTreeMap::new(),
            answers: Vec::new(),
            no_preference: Vec::new(),
            need_cues: Vec::new(),
        };
        for required in Section::all() {
            let entries = sections.iter().find(|(s, _)| *s == required).map(|(_, e)| e.clone()).unwrap_or_default();
            if entries.is_empty() {
                return Err(invalid(None, Some(required.name()), "section is missing or empty".into()));
            }
            match required {
                Section::Pair(kind, speaker) => {
                    bank.pairs.insert((kind, speaker), entries);
                }
                Section::Question(field) => {
                    bank.questions.insert(field, entries);
                }
                Section::Answer => bank.answers = entries,
                Section::NoPreference => bank.no_preference = entries,
                Section::NeedCue => bank.need_cues = entries,
            }
        }
        Ok(bank)
    }

    pub fn variants(&self, kind: PairKind, speaker: Speaker) -> &[String] {
        &self.pairs[&(kind, speaker.into())]
    }

    pub fn questions(&self, field: SearchableField) -> &[String] {
        &self.questions[&field]
    }

    pub fn answers(&self) -> &[String] {
        &self.answers
    }

    pub fn no_preference(&self) -> &[String] {
        &self.no_preference
    }

    pub fn need_cues(&self) -> &[String] {
        &self.need_cues
    }

    /// A customer statement that `feature` matters to them.
    pub fn render_need_cue(&self, feature: &str, rng: &mut DialogRng) -> String {
        let template = &self.need_cues[rng.gen_range(0..self.need_cues.len())];
        fill(template, |_| Some(feature.to_string()), "cue.need").expect("validated at load")
    }

    /// Fills one variant chosen with `rng`.
    pub(crate) fn render_pair_half(
        &self,
        kind: PairKind,
        speaker: Speaker,
        slots: &UtteranceSlots<'_>,
        rng: &mut DialogRng,
    ) -> Result<String, NegotiationError> {
        let variants = self.variants(kind, speaker);
        let template = &variants[rng.gen_range(0..variants.len())];
        let section = Section::Pair(kind, speaker.into()).name();
        fill(
            template,
            |name| {
                match name {
                    "feature" => slots.feature,
                    "product_title" => slots.product_title,
                    "opinion" => slots.opinion,
                    _ => None,
                }
                .map(str::to_string)
            },
            &section,
        )
    }

    pub(crate) fn render_question(&self, field: SearchableField, rng: &mut DialogRng) -> String {
        let variants = self.questions(field);
        variants[rng.gen_range(0..variants.len())].clone()
    }

    pub(crate) fn render_answer(&self, value: Option<&str>, rng: &mut DialogRng) -> String {
        match value {
            Some(v) => {
                let template = &self.answers[rng.gen_range(0..self.answers.len())];
                fill(template, |_| Some(v.to_string()), "search.answer").expect("validated at load")
            }
            None => self.no_preference[rng.gen_range(0..self.no_preference.len())].clone(),
        }
    }
}

/// Produces the customer and assistant texts for a bound pair. The customer
/// variant is drawn before the assistant variant.
pub fn realize(
    kind: PairKind,
    customer: &UtteranceSlots<'_>,
    assistant: &UtteranceSlots<'_>,
    phrasebank: &Phrasebank,
    rng: &mut DialogRng,
) -> Result<(String, String), NegotiationError> {
    let c = phrasebank.render_pair_half(kind, Speaker::Customer, customer, rng)?;
    let a = phrasebank.render_pair_half(kind, Speaker::Assistant, assistant, rng)?;
    Ok((c, a))
}
