//! Turns and conversations, shared by the generators and the dataset layer.

use serde::{Deserialize, Serialize};

use crate::annotate::{OpinionSpan, PolarityLabel};
use crate::index::SpanId;
use crate::negotiation::PairKind;
use crate::search_dialog::AlternativesSet;

/// Version of the conversation line-record format.
pub const DATASET_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    Customer,
    Assistant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Search,
    Evaluation,
}

/// What a turn does. Evaluation acts follow the two halves of the pair
/// names: a Request is answered by an Inform, a Deny by a Disagree or a
/// switch, and a Search by an Agree, a switch or a Warn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DialogAct {
    AskPreference,
    StatePreference,
    Request,
    Inform,
    Deny,
    Disagree,
    SwitchProduct,
    SwitchFeature,
    Search,
    Agree,
    Warn,
}

/// Provenance link from a turn to the review sentence it embeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundingRef {
    pub review_id: String,
    pub sentence_ordinal: usize,
    pub feature: String,
    pub score: f64,
    pub label: PolarityLabel,
}

impl GroundingRef {
    pub fn of(span: &OpinionSpan) -> Self {
        GroundingRef {
            review_id: span.review_id.clone(),
            sentence_ordinal: span.sentence_ordinal,
            feature: span.feature_canonical.clone(),
            score: span.polarity_score,
            label: span.polarity_label,
        }
    }

    pub fn span_id(&self) -> SpanId {
        SpanId {
            review_id: self.review_id.clone(),
            sentence_ordinal: self.sentence_ordinal,
            feature: self.feature.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: Speaker,
    pub stage: Stage,
    pub act: DialogAct,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub product_id: Option<String>,
    /// Canonical feature for evaluation turns, searchable field name for
    /// search turns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature: Option<String>,
    /// Preferred value stated in a search answer; absent for "no preference".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_kind: Option<PairKind>,
    #[serde(default)]
    pub grounding: Vec<GroundingRef>,
}

/// Slot assignment of one instantiated dialog pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotBindings {
    pub customer_product: String,
    pub customer_feature: String,
    /// Absent for the neutral question of a Request–Inform pair.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub customer_span: Option<SpanId>,
    pub assistant_product: String,
    pub assistant_feature: String,
    pub assistant_span: SpanId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTrace {
    pub kind: PairKind,
    pub bindings: SlotBindings,
}

/// A generated two-stage conversation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ConversationRecord", try_from = "ConversationRecord")]
pub struct Conversation {
    pub id: String,
    pub template_id: u32,
    pub master_seed: u64,
    pub search_turns: Vec<Turn>,
    pub evaluation_turns: Vec<Turn>,
    pub pair_trace: Vec<PairTrace>,
    pub product_trajectory: Vec<String>,
    pub alternatives: AlternativesSet,
}

impl Conversation {
    pub fn turns(&self) -> impl Iterator<Item = &Turn> {
        self.search_turns.iter().chain(&self.evaluation_turns)
    }
}

/// On-disk form: one flat, stage-tagged turn list.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConversationRecord {
    schema_version: u32,
    id: String,
    template_id: u32,
    master_seed: u64,
    turns: Vec<Turn>,
    pair_trace: Vec<PairTrace>,
    product_trajectory: Vec<String>,
    alternatives: AlternativesSet,
}

impl From<Conversation> for ConversationRecord {
    fn from(c: Conversation) -> Self {
        ConversationRecord {
            schema_version: DATASET_SCHEMA_VERSION,
            id: c.id,
            template_id: c.template_id,
            master_seed: c.master_seed,
            turns: c.search_turns.into_iter().chain(c.evaluation_turns).collect(),
            pair_trace: c.pair_trace,
            product_trajectory: c.product_trajectory,
            alternatives: c.alternatives,
        }
    }
}

impl TryFrom<ConversationRecord> for Conversation {
    type Error = String;

    fn try_from(r: ConversationRecord) -> Result<Self, String> {
        if r.schema_version != DATASET_SCHEMA_VERSION {
            return Err(format!(
                "schema_version {} is not supported (expected {DATASET_SCHEMA_VERSION})",
                r.schema_version
            ));
        }
        let split = r.turns.iter().position(|t| t.stage == Stage::Evaluation).unwrap_or(r.turns.len());
        if r.turns[split..].iter().any(|t| t.stage == Stage::Search) {
            return Err("search turns must precede evaluation turns".into());
        }
        let mut turns = r.turns;
        let evaluation_turns = turns.split_off(split);
        Ok(Conversation {
            id: r.id,
            template_id: r.template_id,
            master_seed: r.master_seed,
            search_turns: turns,
            evaluation_turns,
            pair_trace: r.pair_trace,
            product_trajectory: r.product_trajectory,
            alternatives: r.alternatives,
        })
    }
}
