use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{read_dataset, DatasetError};
use crate::assembly::ConversationTemplate;
use crate::corpus::{ProductCatalog, ReviewStore};
use crate::dialog::{Conversation, Speaker, Turn};
use crate::index::{OpinionIndex, SpanId};
use crate::negotiation::{FeatureSlot, PairKind, ProductSlot};
use crate::search_dialog::{filter, PreferenceProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    Grounding,
    Polarity,
    TemplateConformance,
    ProductPool,
    SpanReuse,
    Alternation,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::Grounding => "grounding",
            Rule::Polarity => "polarity",
            Rule::TemplateConformance => "template_conformance",
            Rule::ProductPool => "product_pool",
            Rule::SpanReuse => "span_reuse",
            Rule::Alternation => "alternation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub conversation_id: String,
    pub rule: Rule,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub conversations_checked: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, rule: Rule) -> usize {
        self.violations.iter().filter(|v| v.rule == rule).count()
    }

    /// Human-readable summary: totals, then one line per violation.
    pub fn summary(&self) -> String {
        let mut per_rule: BTreeMap<Rule, usize> = BTreeMap::new();
        for v in &self.violations {
            *per_rule.entry(v.rule).or_default() += 1;
        }
        let mut out =
            format!("checked {} conversations, {} violations\n", self.conversations_checked, self.violations.len());
        for (rule, n) in per_rule {
            out.push_str(&format!("  {}: {n}\n", rule.name()));
        }
        for v in &self.violations {
            out.push_str(&format!("{} [{}] {}\n", v.conversation_id, v.rule.name(), v.detail));
        }
        out
    }
}

struct Checker<'a> {
    conversation: &'a Conversation,
    catalog: &'a ProductCatalog,
    store: &'a ReviewStore,
    index: &'a OpinionIndex,
    out: Vec<Violation>,
}

impl Checker<'_> {
    fn flag(&mut self, rule: Rule, detail: String) {
        self.out.push(Violation { conversation_id: self.conversation.id.clone(), rule, detail });
    }

    /// Kind of the pair an evaluation turn belongs to, by position.
    fn kind_at(&self, turn_pos: usize) -> Option<PairKind> {
        self.conversation.pair_trace.get(turn_pos / 2).map(|p| p.kind)
    }

    fn alternation(&mut self) {
        let c = self.conversation;
        let misplaced = |turns: &[Turn], first: Speaker| -> Vec<usize> {
            turns.iter().enumerate().filter(|(i, t)| (t.speaker == first) != (i % 2 == 0)).map(|(i, _)| i).collect()
        };
        let search = misplaced(&c.search_turns, Speaker::Assistant);
        if !search.is_empty() {
            self.flag(Rule::Alternation, format!("search turns {search:?} break assistant-first alternation"));
        }
        let evaluation = misplaced(&c.evaluation_turns, Speaker::Customer);
        if !evaluation.is_empty() {
            self.flag(Rule::Alternation, format!("evaluation turns {evaluation:?} break customer-first alternation"));
        }
    }

    fn conformance(&mut self, templates: &[ConversationTemplate]) {
        let c = self.conversation;
        let kinds: Vec<PairKind> = c.pair_trace.iter().map(|p| p.kind).collect();
        match templates.iter().find(|t| t.id == c.template_id) {
            None => self.flag(Rule::TemplateConformance, format!("unknown template id {}", c.template_id)),
            Some(t) if t.sequence != kinds => self.flag(
                Rule::TemplateConformance,
                format!("pair trace {kinds:?} differs from template {} sequence {:?}", t.id, t.sequence),
            ),
            Some(_) => {}
        }
        if c.evaluation_turns.len() != 2 * kinds.len() {
            self.flag(
                Rule::TemplateConformance,
                format!("{} evaluation turns for {} pairs", c.evaluation_turns.len(), kinds.len()),
            );
        }
        for (pos, turn) in c.evaluation_turns.iter().enumerate() {
            let Some(kind) = self.kind_at(pos) else { continue };
            let expected_act = if pos % 2 == 0 { kind.customer_act() } else { kind.assistant_act() };
            if turn.pair_kind != Some(kind) || turn.pair_index != Some(pos / 2) || turn.act != expected_act {
                self.flag(Rule::TemplateConformance, format!("evaluation turn {pos} does not match pair {}", pos / 2));
            }
        }
        for (i, pair) in c.evaluation_turns.chunks_exact(2).enumerate() {
            let Some(kind) = self.kind_at(2 * i) else { continue };
            let sig = kind.signature();
            let same_feature = pair[0].feature == pair[1].feature;
            let same_product = pair[0].product_id == pair[1].product_id;
            if same_feature != (sig.assistant.feature == FeatureSlot::FA)
                || same_product != (sig.assistant.product == ProductSlot::P1)
            {
                self.flag(Rule::TemplateConformance, format!("pair {i} slots do not fit {kind}"));
            }
        }
    }

    fn grounding_and_polarity(&mut self) {
        let c = self.conversation;
        for (pos, turn) in c.evaluation_turns.iter().enumerate() {
            let Some(kind) = self.kind_at(pos) else { continue };
            let is_customer = pos % 2 == 0;
            let sig = kind.signature();
            let slot = if is_customer { sig.customer } else { sig.assistant };
            let needs_grounding = !(is_customer && !kind.customer_is_grounded());
            if needs_grounding && turn.grounding.is_empty() {
                self.flag(Rule::Grounding, format!("evaluation turn {pos} states an opinion without grounding"));
            }
            if !needs_grounding && !turn.grounding.is_empty() {
                self.flag(
                    Rule::Grounding,
                    format!("evaluation turn {pos} is a neutral question but carries grounding"),
                );
            }
            for g in &turn.grounding {
                let id = g.span_id();
                let Some(sentence) = self.store.sentence(&g.review_id, g.sentence_ordinal) else {
                    self.flag(Rule::Grounding, format!("turn {pos} cites missing sentence {id}"));
                    continue;
                };
                if !turn.text.contains(&sentence.text) {
                    self.flag(Rule::Grounding, format!("turn {pos} does not contain the text of {id}"));
                    continue;
                }
                let Some((product, span)) = self.index.span(&id) else {
                    self.flag(Rule::Grounding, format!("turn {pos} cites {id}, which is not an indexed opinion"));
                    continue;
                };
                if turn.product_id.as_deref() != Some(product) || turn.feature.as_deref() != Some(g.feature.as_str()) {
                    self.flag(Rule::Grounding, format!("turn {pos} cites {id} about a different product or feature"));
                    continue;
                }
                if span.polarity_label != slot.label || g.label != span.polarity_label || g.score != span.polarity_score
                {
                    self.flag(
                        Rule::Polarity,
                        format!(
                            "turn {pos} cites {id} as {} ({}); corpus says {} ({}), slot needs {}",
                            g.label, g.score, span.polarity_label, span.polarity_score, slot.label
                        ),
                    );
                }
            }
        }
    }

    fn product_pool(&mut self) {
        let c = self.conversation;
        let seed = c.alternatives.seed_product.as_str();
        if !self.catalog.contains(seed) {
            self.flag(Rule::ProductPool, format!("seed product {seed} is not in the catalog"));
            return;
        }
        match PreferenceProfile::from_turns(&c.search_turns) {
            None => self.flag(Rule::ProductPool, "search answers do not form a preference profile".into()),
            Some(profile) => {
                let mut expected = filter(self.catalog, &profile);
                expected.insert(seed.to_string());
                let stated: BTreeSet<String> = c.alternatives.members.iter().cloned().collect();
                if stated != expected || stated.len() != c.alternatives.members.len() {
                    self.flag(Rule::ProductPool, "alternatives differ from the search answers' filter result".into());
                }
            }
        }

        let mut current = seed.to_string();
        let mut visited = BTreeSet::from([current.clone()]);
        let mut reachable: BTreeSet<String> = c.alternatives.members.iter().cloned().collect();
        reachable.extend(self.catalog.also_viewed_in_catalog(seed).into_iter().map(str::to_string));
        let mut trajectory = vec![current.clone()];
        for (pos, turn) in c.evaluation_turns.iter().enumerate() {
            let Some(product) = turn.product_id.clone() else {
                self.flag(Rule::ProductPool, format!("evaluation turn {pos} names no product"));
                continue;
            };
            if product == current {
                continue;
            }
            let switch = pos % 2 == 1 && self.kind_at(pos) == Some(PairKind::DenySwitchProduct);
            if !switch || visited.contains(&product) || !reachable.contains(&product) {
                self.flag(
                    Rule::ProductPool,
                    format!("evaluation turn {pos} moves to {product} outside the product pool"),
                );
                continue;
            }
            reachable.extend(self.catalog.also_viewed_in_catalog(&product).into_iter().map(str::to_string));
            visited.insert(product.clone());
            trajectory.push(product.clone());
            current = product;
        }
        if trajectory != c.product_trajectory {
            self.flag(
                Rule::ProductPool,
                format!("product trajectory {:?} should be {trajectory:?}", c.product_trajectory),
            );
        }
    }

    fn span_reuse(&mut self) {
        let mut seen: BTreeMap<SpanId, usize> = BTreeMap::new();
        for g in self.conversation.turns().flat_map(|t| &t.grounding) {
            *seen.entry(g.span_id()).or_default() += 1;
        }
        for (id, n) in seen.into_iter().filter(|(_, n)| *n > 1) {
            self.flag(Rule::SpanReuse, format!("span {id} is cited {n} times"));
        }
    }
}

/// Checks one conversation against all six rules, re-deriving every fact
/// from the corpus and index rather than from generator metadata.
pub fn validate_conversation(
    conversation: &Conversation,
    templates: &[ConversationTemplate],
    catalog: &ProductCatalog,
    store: &ReviewStore,
    index: &OpinionIndex,
) -> Vec<Violation> {
    let mut checker = Checker { conversation, catalog, store, index, out: Vec::new() };
    checker.grounding_and_polarity();
    checker.conformance(templates);
    checker.product_pool();
    checker.span_reuse();
    checker.alternation();
    checker.out
}

/// Validates every conversation of a dataset file. Violations are ordered
/// by conversation id, then by check order.
pub fn validate(
    path: &Path,
    templates: &[ConversationTemplate],
    catalog: &ProductCatalog,
    store: &ReviewStore,
    index: &OpinionIndex,
) -> Result<ValidationReport, DatasetError> {
    let conversations = read_dataset(path)?;
    let mut per_conversation: Vec<(String, Vec<Violation>)> = conversations
        .par_iter()
        .map(|c| (c.id.clone(), validate_conversation(c, templates, catalog, store, index)))
        .collect();
    per_conversation.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(ValidationReport {
        conversations_checked: conversations.len(),
        violations: per_conversation.into_iter().flat_map(|(_, v)| v).collect(),
    })
}
