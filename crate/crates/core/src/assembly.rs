//! Conversation templates and the generator that folds dialog pairs into
//! full conversations.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{validate_conversation, Violation};
use crate::dialog::{Conversation, PairTrace, Turn};
use crate::negotiation::{
    instantiate_pair, DialogPair, DialogState, NegotiationError, PairKind, PairOutcome, Resources,
};
use crate::search_dialog::{generate_search_dialog, sample_seed, SearchError, DEFAULT_P_SKIP};
use crate::seed::{derive_rng, derive_seed};

const BUILTIN_TEMPLATES: &str = include_str!("../data/templates.jsonl");

pub const MAX_TEMPLATE_PAIRS: usize = 8;

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid template{}: {reason}", line.map(|l| format!(" on line {l}")).unwrap_or_default())]
    InvalidTemplate { line: Option<usize>, reason: String },
    #[error("invalid generation parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("template {template_id} exhausted its retry budget after {retries} unsatisfiable attempts")]
    Exhausted { template_id: u32, retries: usize },
    #[error(transparent)]
    Search(#[from] SearchError),
    /// A state or resource inconsistency; indicates a bug, not bad input.
    #[error(transparent)]
    Negotiation(#[from] NegotiationError),
    /// The generated conversation failed its own re-validation; a bug.
    #[error("generated conversation {id} failed re-validation: {violations:?}")]
    Revalidation { id: String, violations: Vec<Violation> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversationTemplate {
    pub id: u32,
    pub sequence: Vec<PairKind>,
    /// Pair positions whose customer turn opens with a stated need.
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub need_cues: BTreeSet<usize>,
}

impl ConversationTemplate {
    pub fn new(id: u32, sequence: Vec<PairKind>) -> Result<Self, AssemblyError> {
        if sequence.is_empty() || sequence.len() > MAX_TEMPLATE_PAIRS {
            return Err(AssemblyError::InvalidTemplate {
                line: None,
                reason: format!("template {id} has {} pairs, need 1..={MAX_TEMPLATE_PAIRS}", sequence.len()),
            });
        }
        Ok(ConversationTemplate { id, sequence, need_cues: BTreeSet::new() })
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TemplateRecord {
    id: u32,
    sequence: Vec<String>,
}

/// Parses one template per line: `{"id": n, "sequence": [kind names]}`.
/// Ids must be unique.
pub fn parse_templates(text: &str) -> Result<Vec<ConversationTemplate>, AssemblyError> {
    let mut out: Vec<ConversationTemplate> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| AssemblyError::InvalidTemplate { line: Some(line_no), reason };
        let record: TemplateRecord = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        let steps = record
            .sequence
            .iter()
            .map(|name| PairKind::parse_step(name).ok_or_else(|| bad(format!("unknown pair kind {name:?}"))))
            .collect::<Result<Vec<_>, _>>()?;
        let sequence = steps.iter().map(|(kind, _)| *kind).collect();
        let need_cues = steps.iter().enumerate().filter(|(_, (_, cue))| *cue).map(|(i, _)| i).collect();
        if out.iter().any(|t| t.id == record.id) {
            return Err(bad(format!("duplicate template id {}", record.id)));
        }
        let template = ConversationTemplate::new(record.id, sequence).map_err(|e| match e {
            AssemblyError::InvalidTemplate { reason, .. } => bad(reason),
            other => other,
        })?;
        out.push(ConversationTemplate { need_cues, ..template });
    }
    Ok(out)
}

/// Inverse of [`parse_templates`].
pub fn render_templates(templates: &[ConversationTemplate]) -> String {
    let mut out = String::new();
    for t in templates {
        let names: Vec<&str> = t
            .sequence
            .iter()
            .enumerate()
            .map(|(i, k)| if t.need_cues.contains(&i) { PairKind::NEED_CUE_SWITCH } else { k.name() })
            .collect();
        out.push_str(&serde_json::json!({ "id": t.id, "sequence": names }).to_string());
        out.push('\n');
    }
    out
}

pub fn load_templates(path: &Path) -> Result<Vec<ConversationTemplate>, AssemblyError> {
    let text =
        std::fs::read_to_string(path).map_err(|source| AssemblyError::Io { path: path.to_path_buf(), source })?;
    parse_templates(&text)
}

/// The fourteen shipped templates. Ids 1/11 and 2/3 share a sequence.
pub fn builtin_templates() -> Vec<ConversationTemplate> {
    parse_templates(BUILTIN_TEMPLATES).expect("built-in templates are valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    /// Probability that the customer declines a search question.
    pub p_skip: f64,
    /// Unsatisfiable pair attempts allowed per conversation.
    pub retry_budget: usize,
    /// Breadth of the seeded choice among best-ranked spans.
    pub top_k: usize,
    /// Non-neutral spans a seed product needs.
    pub min_opinions: usize,
    /// Unsatisfiable attempts spent on one seed product before re-rolling it.
    pub local_retries: usize,
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams { p_skip: DEFAULT_P_SKIP, retry_budget: 25, top_k: 3, min_opinions: 3, local_retries: 4 }
    }
}

impl GenerationParams {
    pub fn validate(&self) -> Result<(), AssemblyError> {
        let bad = |m: String| Err(AssemblyError::InvalidParams(m));
        if !(0.0..=1.0).contains(&self.p_skip) {
            return bad(format!("p_skip must be in [0, 1], got {}", self.p_skip));
        }
        if self.retry_budget == 0 {
            return bad("retry_budget must be at least 1".into());
        }
        if self.top_k == 0 {
            return bad("top_k must be at least 1".into());
        }
        if self.min_opinions == 0 {
            return bad("min_opinions must be at least 1".into());
        }
        if self.local_retries == 0 {
            return bad("local_retries must be at least 1".into());
        }
        Ok(())
    }
}

/// A conversation and the unsatisfiable attempts spent on it.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub conversation: Conversation,
    pub retries: usize,
}

struct Search<'r, 'a> {
    template: &'r ConversationTemplate,
    res: &'r Resources<'a>,
    params: &'r GenerationParams,
    conv_seed: u64,
    reroll: u64,
    attempts: u64,
    /// Unsatisfiable outcomes left for the current seed product.
    local_left: usize,
    retries: usize,
}

impl Search<'_, '_> {
    /// Depth-first fold over the template. A satisfied pair whose suffix
    /// fails is re-drawn with a fresh stream; an unsatisfiable pair fails
    /// its state outright, since slot search is exhaustive.
    fn fold(&mut self, i: usize, state: &DialogState) -> Result<Option<Vec<DialogPair>>, GenerateError> {
        let Some(&kind) = self.template.sequence.get(i) else {
            return Ok(Some(Vec::new()));
        };
        for _ in 0..self.params.local_retries {
            if self.local_left == 0 {
                return Ok(None);
            }
            self.attempts += 1;
            let mut rng = derive_rng(self.conv_seed, &[1, self.reroll, self.attempts]);
            match instantiate_pair(kind, state, self.res, &mut rng, self.params.top_k, i)? {
                PairOutcome::Unsatisfiable => {
                    self.local_left -= 1;
                    self.retries += 1;
                    return Ok(None);
                }
                PairOutcome::Satisfied(mut pair) => {
                    if self.template.need_cues.contains(&i) {
                        let mut cue_rng = derive_rng(self.conv_seed, &[2, self.reroll, self.attempts]);
                        let turn = &mut pair.customer_turn;
                        let feature = turn.feature.as_deref().unwrap_or_default();
                        turn.text =
                            format!("{} {}", self.res.phrasebank.render_need_cue(feature, &mut cue_rng), turn.text);
                    }
                    if let Some(mut rest) = self.fold(i + 1, &pair.state_after)? {
                        rest.insert(0, *pair);
                        return Ok(Some(rest));
                    }
                }
            }
        }
        Ok(None)
    }
}

/// Generates one conversation for `template` from the stream `conv_seed`.
///
/// Backtracking is local first (re-drawing earlier pairs for the same seed
/// product, up to `local_retries` unsatisfiable attempts) and then global
/// (a new seed product and search dialog). Every unsatisfiable attempt
/// consumes `retry_budget`.
pub fn generate_conversation(
    template: &ConversationTemplate,
    res: &Resources<'_>,
    params: &GenerationParams,
    conv_seed: u64,
    id: &str,
) -> Result<Generated, GenerateError> {
    let mut spent = 0;
    for reroll in 0u64.. {
        if spent >= params.retry_budget {
            break;
        }
        let mut rng = derive_rng(conv_seed, &[0, reroll]);
        let seed_product = sample_seed(res.catalog, res.index, &mut rng, params.min_opinions)?;
        let search = match generate_search_dialog(&seed_product, res.catalog, res.phrasebank, &mut rng, params.p_skip) {
            Ok(s) => s,
            Err(SearchError::NoSearchableValues(_)) => {
                spent += 1;
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let state = DialogState::new(search.alternatives.clone());
        let mut walk = Search {
            template,
            res,
            params,
            conv_seed,
            reroll,
            attempts: 0,
            local_left: params.local_retries.min(params.retry_budget - spent),
            retries: 0,
        };
        let found = walk.fold(0, &state)?;
        spent += walk.retries;
        let Some(pairs) = found else { continue };

        let mut product_trajectory = vec![seed_product.clone()];
        product_trajectory.extend(
            pairs
                .iter()
                .filter(|p| p.kind == PairKind::DenySwitchProduct)
                .map(|p| p.bindings.assistant_product.clone()),
        );
        let pair_trace = pairs.iter().map(|p| PairTrace { kind: p.kind, bindings: p.bindings.clone() }).collect();
        let evaluation_turns: Vec<Turn> = pairs.into_iter().flat_map(|p| [p.customer_turn, p.assistant_turn]).collect();
        let conversation = Conversation {
            id: id.to_string(),
            template_id: template.id,
            master_seed: conv_seed,
            search_turns: search.turns,
            evaluation_turns,
            pair_trace,
            product_trajectory,
            alternatives: search.alternatives,
        };
        let violations =
            validate_conversation(&conversation, std::slice::from_ref(template), res.catalog, res.store, res.index);
        if !violations.is_empty() {
            return Err(GenerateError::Revalidation { id: id.to_string(), violations });
        }
        return Ok(Generated { conversation, retries: spent });
    }
    Err(GenerateError::Exhausted { template_id: template.id, retries: spent })
}

/// Conversation id for an instance of a template.
pub fn conversation_id(template_id: u32, ordinal: usize) -> String {
    format!("t{template_id:02}-{ordinal:04}")
}

/// Stream seed of one conversation; depends only on its own coordinates.
pub fn conversation_seed(master_seed: u64, template_id: u32, ordinal: usize) -> u64 {
    derive_seed(master_seed, &[u64::from(template_id), ordinal as u64])
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exhaustion {
    pub template_id: u32,
    pub ordinal: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateTally {
    pub attempted: usize,
    pub succeeded: usize,
    pub exhausted: usize,
    pub retries: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationReport {
    pub master_seed: u64,
    pub per_template_requested: usize,
    pub attempted: usize,
    pub succeeded: usize,
    pub retries: usize,
    pub exhausted: Vec<Exhaustion>,
    pub per_template: BTreeMap<u32, TemplateTally>,
}

/// Generates `per_template` conversations for every template in parallel.
///
/// Output order is `(template order, ordinal)` regardless of scheduling.
/// Exhaustion is recorded in the report, not raised; only inconsistent
/// resources produce an error.
pub fn generate_dataset(
    templates: &[ConversationTemplate],
    per_template: usize,
    master_seed: u64,
    res: &Resources<'_>,
    params: &GenerationParams,
) -> Result<(Vec<Conversation>, GenerationReport), GenerateError> {
    let jobs: Vec<(&ConversationTemplate, usize)> =
        templates.iter().flat_map(|t| (0..per_template).map(move |o| (t, o))).collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|(t, ordinal)| {
            let seed = conversation_seed(master_seed, t.id, *ordinal);
            generate_conversation(t, res, params, seed, &conversation_id(t.id, *ordinal))
        })
        .collect();

    let mut report = GenerationReport {
        master_seed,
        per_template_requested: per_template,
        attempted: jobs.len(),
        succeeded: 0,
        retries: 0,
        exhausted: Vec::new(),
        per_template: BTreeMap::new(),
    };
    let mut conversations = Vec::new();
    for ((t, ordinal), result) in jobs.iter().zip(results) {
        let tally = report.per_template.entry(t.id).or_default();
        tally.attempted += 1;
        match result {
            Ok(g) => {
                tally.succeeded += 1;
                tally.retries += g.retries;
                report.succeeded += 1;
                report.retries += g.retries;
                conversations.push(g.conversation);
            }
            Err(GenerateError::Exhausted { retries, .. }) => {
                tally.exhausted += 1;
                tally.retries += retries;
                report.retries += retries;
                report.exhausted.push(Exhaustion {
                    template_id: t.id,
                    ordinal: *ordinal,
                    reason: "retry budget exhausted".into(),
                });
            }
            Err(GenerateError::Search(e @ SearchError::NoEligibleProduct { .. })) => {
                tally.exhausted += 1;
                report.exhausted.push(Exhaustion { template_id: t.id, ordinal: *ordinal, reason: e.to_string() });
            }
            Err(e) => return Err(e),
        }
    }
    Ok((conversations, report))
}

/// Rejects empty or duplicate-id template lists and a zero count.
pub fn check_run(templates: &[ConversationTemplate], per_template: usize) -> Result<(), AssemblyError> {
    if per_template == 0 {
        return Err(AssemblyError::InvalidParams("per_template must be at least 1".into()));
    }
    if templates.is_empty() {
        return Err(AssemblyError::InvalidParams("no templates given".into()));
    }
    let mut ids = BTreeSet::new();
    if let Some(dup) = templates.iter().find(|t| !ids.insert(t.id)) {
        return Err(AssemblyError::InvalidParams(format!("template id {} appears twice", dup.id)));
    }
    Ok(())
}
