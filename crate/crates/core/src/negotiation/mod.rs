//! Dialog-pair instantiation for the evaluation stage.
//!
//! A pair is one customer utterance and the assistant's reply. Its kind
//! fixes which product, feature and polarity each side must talk about;
//! [`instantiate_pair`] searches the opinion index for spans that fill
//! those slots and [`realize`] wraps the chosen review sentences in
//! phrasebank connectives.

mod phrasebank;

use std::collections::BTreeSet;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotate::{OpinionSpan, PolarityLabel};
use crate::corpus::{ProductCatalog, ReviewStore};
use crate::dialog::{DialogAct, GroundingRef, SlotBindings, Speaker, Stage, Turn};
use crate::index::{OpinionIndex, SpanId};
use crate::search_dialog::AlternativesSet;
use crate::seed::DialogRng;

pub use phrasebank::{realize, Phrasebank, UtteranceSlots};

#[derive(Debug, Error)]
pub enum NegotiationError {
    #[error("invalid dialog state: {0}")]
    InvalidState(String),
    #[error("placeholder {{{placeholder}}} in [{section}] has no value")]
    UnboundSlot { section: String, placeholder: String },
    #[error("invalid phrasebank{}{}: {reason}",
        section.as_ref().map(|s| format!(" [{s}]")).unwrap_or_default(),
        line.map(|l| format!(" line {l}")).unwrap_or_default())]
    InvalidPhrasebank { line: Option<usize>, section: Option<String>, reason: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PairKind {
    RequestInform,
    DenyDisagreement,
    DenySwitchProduct,
    DenySwitchFeature,
    SearchAgreement,
    SearchSwitchFeature,
    SearchWarning,
}

/// Which product a slot talks about: the current one or a switch target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProductSlot {
    P1,
    P2,
}

/// Which feature a slot talks about: the customer's or a different one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureSlot {
    FA,
    FB,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot {
    pub product: ProductSlot,
    pub feature: FeatureSlot,
    pub label: PolarityLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Signature {
    pub customer: Slot,
    pub assistant: Slot,
}

impl PairKind {
    pub const ALL: [PairKind; 7] = [
        Self::RequestInform,
        Self::DenyDisagreement,
        Self::DenySwitchProduct,
        Self::DenySwitchFeature,
        Self::SearchAgreement,
        Self::SearchSwitchFeature,
        Self::SearchWarning,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::RequestInform => "RequestInform",
            Self::DenyDisagreement => "DenyDisagreement",
            Self::DenySwitchProduct => "DenySwitchProduct",
            Self::DenySwitchFeature => "DenySwitchFeature",
            Self::SearchAgreement => "SearchAgreement",
            Self::SearchSwitchFeature => "SearchSwitchFeature",
            Self::SearchWarning => "SearchWarning",
        }
    }

    /// Accepts the enumeration names and the two template-table aliases
    /// that name a product switch ("Deny--Switch Item", "Search--Switch
    /// Product"), with either a double hyphen or an en dash.
    pub fn from_name(name: &str) -> Option<Self> {
        Self::parse_step(name).map(|(kind, _)| kind)
    }

    /// Template step name for a DenySwitchProduct whose customer opens
    /// with a stated need.
    pub const NEED_CUE_SWITCH: &'static str = "Search--Switch Product";

    /// Like [`PairKind::from_name`], also reporting whether the customer
    /// opens with a stated need; true only for "Search--Switch Product".
    pub fn parse_step(name: &str) -> Option<(Self, bool)> {
        let name = name.trim();
        if let Some(kind) = Self::ALL.into_iter().find(|k| k.name() == name) {
            return Some((kind, false));
        }
        match name.replace('\u{2013}', "--").as_str() {
            "Deny--Switch Item" => Some((Self::DenySwitchProduct, false)),
            Self::NEED_CUE_SWITCH => Some((Self::DenySwitchProduct, true)),
            _ => None,
        }
    }

    pub fn signature(self) -> Signature {
        use FeatureSlot::*;
        use PolarityLabel::*;
        use ProductSlot::*;
        let slot = |product, feature, label| Slot { product, feature, label };
        let (customer, assistant) = match self {
            Self::RequestInform => (slot(P1, FA, Neutral), slot(P1, FA, Positive)),
            Self::DenyDisagreement => (slot(P1, FA, Negative), slot(P1, FA, Positive)),
            Self::DenySwitchProduct => (slot(P1, FA, Negative), slot(P2, FA, Positive)),
            Self::DenySwitchFeature => (slot(P1, FA, Negative), slot(P1, FB, Positive)),
            Self::SearchAgreement => (slot(P1, FA, Positive), slot(P1, FA, Positive)),
            Self::SearchSwitchFeature => (slot(P1, FA, Positive), slot(P1, FB, Positive)),
            Self::SearchWarning => (slot(P1, FA, Positive), slot(P1, FB, Negative)),
        };
        Signature { customer, assistant }
    }

    pub fn customer_act(self) -> DialogAct {
        match self {
            Self::RequestInform => DialogAct::Request,
            Self::DenyDisagreement | Self::DenySwitchProduct | Self::DenySwitchFeature => DialogAct::Deny,
            Self::SearchAgreement | Self::SearchSwitchFeature | Self::SearchWarning => DialogAct::Search,
        }
    }

    pub fn assistant_act(self) -> DialogAct {
        match self {
            Self::RequestInform => DialogAct::Inform,
            Self::DenyDisagreement => DialogAct::Disagree,
            Self::DenySwitchProduct => DialogAct::SwitchProduct,
            Self::DenySwitchFeature | Self::SearchSwitchFeature => DialogAct::SwitchFeature,
            Self::SearchAgreement => DialogAct::Agree,
            Self::SearchWarning => DialogAct::Warn,
        }
    }

    /// False only for the neutral question of a Request–Inform pair.
    pub fn customer_is_grounded(self) -> bool {
        self != Self::RequestInform
    }
}

impl std::fmt::Display for PairKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Evaluation-stage state threaded from pair to pair.
#[derive(Debug, Clone, PartialEq)]
pub struct DialogState {
    pub current_product: String,
    pub alternatives: AlternativesSet,
    pub visited: BTreeSet<String>,
    pub used_spans: BTreeSet<SpanId>,
    pub discussed_features: BTreeSet<String>,
}

impl DialogState {
    /// Starts at the seed product of the alternatives set.
    pub fn new(alternatives: AlternativesSet) -> Self {
        let current = alternatives.seed_product.clone();
        DialogState {
            visited: BTreeSet::from([current.clone()]),
            current_product: current,
            alternatives,
            used_spans: BTreeSet::new(),
            discussed_features: BTreeSet::new(),
        }
    }

    /// Products a switch may move to from the current product.
    pub fn switch_pool(&self, catalog: &ProductCatalog) -> BTreeSet<String> {
        let mut pool: BTreeSet<String> = self.alternatives.members.iter().cloned().collect();
        pool.extend(catalog.also_viewed_in_catalog(&self.current_product).into_iter().map(str::to_string));
        pool.retain(|p| !self.visited.contains(p));
        pool
    }

    pub fn check(&self, catalog: &ProductCatalog) -> Result<(), NegotiationError> {
        let bad = |m: String| Err(NegotiationError::InvalidState(m));
        if !catalog.contains(&self.current_product) {
            return bad(format!("current product {} is not in the catalog", self.current_product));
        }
        if !self.visited.contains(&self.current_product) {
            return bad(format!("current product {} was never visited", self.current_product));
        }
        if !self.alternatives.members.contains(&self.alternatives.seed_product) {
            return bad("seed product is not an alternatives member".into());
        }
        let mut reachable: BTreeSet<&str> = self.alternatives.members.iter().map(String::as_str).collect();
        for p in &self.visited {
            reachable.extend(catalog.also_viewed_in_catalog(p));
        }
        if let Some(stray) = self.visited.iter().find(|p| !reachable.contains(p.as_str())) {
            return bad(format!("visited product {stray} is outside the product pool"));
        }
        Ok(())
    }
}

/// Spans and targets chosen for one pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotChoice {
    pub customer_product: String,
    pub customer_feature: String,
    pub customer_span: Option<OpinionSpan>,
    pub assistant_product: String,
    pub assistant_feature: String,
    pub assistant_span: OpinionSpan,
}

impl SlotChoice {
    pub fn bindings(&self) -> SlotBindings {
        SlotBindings {
            customer_product: self.customer_product.clone(),
            customer_feature: self.customer_feature.clone(),
            customer_span: self.customer_span.as_ref().map(SpanId::of),
            assistant_product: self.assistant_product.clone(),
            assistant_feature: self.assistant_feature.clone(),
            assistant_span: SpanId::of(&self.assistant_span),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DialogPair {
    pub kind: PairKind,
    pub customer_turn: Turn,
    pub assistant_turn: Turn,
    pub bindings: SlotBindings,
    pub state_after: DialogState,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PairOutcome {
    Satisfied(Box<DialogPair>),
    Unsatisfiable,
}

/// Read-only inputs shared by every pair of a run.
#[derive(Debug, Clone, Copy)]
pub struct Resources<'a> {
    pub catalog: &'a ProductCatalog,
    pub store: &'a ReviewStore,
    pub index: &'a OpinionIndex,
    pub phrasebank: &'a Phrasebank,
}

/// Shuffles the first `k` items and leaves the rest in their given order.
fn top_k_order<T>(mut items: Vec<T>, k: usize, rng: &mut DialogRng) -> Vec<T> {
    let head = k.max(1).min(items.len());
    items[..head].shuffle(rng);
    items
}

/// Undiscussed features first, each group shuffled.
fn feature_order(features: Vec<String>, discussed: &BTreeSet<String>, rng: &mut DialogRng) -> Vec<String> {
    let (mut fresh, mut seen): (Vec<String>, Vec<String>) = features.into_iter().partition(|f| !discussed.contains(f));
    fresh.shuffle(rng);
    seen.shuffle(rng);
    fresh.extend(seen);
    fresh
}

fn features_with(index: &OpinionIndex, product: &str, label: PolarityLabel) -> Vec<String> {
    index.features_of(product, Some(label)).into_iter().map(|(f, _)| f).collect()
}

/// Seeded exhaustive search for a slot assignment of `kind` in `state`.
///
/// Candidate orders are seeded: features prefer undiscussed ones, spans
/// are drawn from a shuffled top-`k` prefix before the remaining spans in
/// best-first order. Every combination is eventually tried, so `None`
/// means no assignment exists.
pub fn solve_slots(
    kind: PairKind,
    state: &DialogState,
    index: &OpinionIndex,
    catalog: &ProductCatalog,
    rng: &mut DialogRng,
    k: usize,
) -> Option<SlotChoice> {
    let sig = kind.signature();
    let p1 = state.current_product.as_str();
    let used = &state.used_spans;
    // The neutral question needs a feature the assistant can answer positively.
    let fa_label = match sig.customer.label {
        PolarityLabel::Neutral => sig.assistant.label,
        l => l,
    };
    let fa_order = feature_order(features_with(index, p1, fa_label), &state.discussed_features, rng);
    let p2_pool: Vec<String> = if sig.assistant.product == ProductSlot::P2 {
        state.switch_pool(catalog).into_iter().collect()
    } else {
        Vec::new()
    };

    for fa in fa_order {
        let customer_spans: Vec<Option<&OpinionSpan>> = if sig.customer.label == PolarityLabel::Neutral {
            vec![None]
        } else {
            top_k_order(index.candidates(p1, &fa, sig.customer.label, used).collect(), k, rng)
                .into_iter()
                .map(Some)
                .collect()
        };
        for customer_span in customer_spans {
            let mut exclude = used.clone();
            if let Some(span) = customer_span {
                exclude.insert(SpanId::of(span));
            }
            let targets: Vec<(String, String)> = match (sig.assistant.product, sig.assistant.feature) {
                (ProductSlot::P1, FeatureSlot::FA) => vec![(p1.to_string(), fa.clone())],
                (ProductSlot::P2, _) => {
                    let mut pool: Vec<String> = p2_pool
                        .iter()
                        .filter(|p| index.query(p, &fa, sig.assistant.label, &exclude).is_some())
                        .cloned()
                        .collect();
                    pool.shuffle(rng);
                    pool.into_iter().map(|p| (p, fa.clone())).collect()
                }
                (ProductSlot::P1, FeatureSlot::FB) => {
                    let fbs: Vec<String> =
                        features_with(index, p1, sig.assistant.label).into_iter().filter(|f| *f != fa).collect();
                    feature_order(fbs, &state.discussed_features, rng)
                        .into_iter()
                        .map(|fb| (p1.to_string(), fb))
                        .collect()
                }
            };
            for (product, feature) in targets {
                let spans: Vec<&OpinionSpan> =
                    index.candidates(&product, &feature, sig.assistant.label, &exclude).collect();
                if let Some(span) = top_k_order(spans, k, rng).into_iter().next() {
                    return Some(SlotChoice {
                        customer_product: p1.to_string(),
                        customer_feature: fa.clone(),
                        customer_span: customer_span.cloned(),
                        assistant_product: product,
                        assistant_feature: feature,
                        assistant_span: span.clone(),
                    });
                }
            }
        }
    }
    None
}

fn sentence_text<'a>(store: &'a ReviewStore, span: &OpinionSpan) -> Result<&'a str, NegotiationError> {
    store.sentence(&span.review_id, span.sentence_ordinal).map(|s| s.text.as_str()).ok_or_else(|| {
        NegotiationError::InvalidState(format!("indexed span {} has no stored sentence", SpanId::of(span)))
    })
}

fn title<'a>(catalog: &'a ProductCatalog, product: &str) -> Result<&'a str, NegotiationError> {
    catalog
        .get(product)
        .map(|p| p.title.as_str())
        .ok_or_else(|| NegotiationError::InvalidState(format!("product {product} is not in the catalog")))
}

/// Binds and realizes one dialog pair.
///
/// Returns [`PairOutcome::Unsatisfiable`] when no slot assignment exists;
/// errors only on an inconsistent state or resources.
pub fn instantiate_pair(
    kind: PairKind,
    state: &DialogState,
    res: &Resources<'_>,
    rng: &mut DialogRng,
    k: usize,
    pair_index: usize,
) -> Result<PairOutcome, NegotiationError> {
    state.check(res.catalog)?;
    let Some(choice) = solve_slots(kind, state, res.index, res.catalog, rng, k) else {
        return Ok(PairOutcome::Unsatisfiable);
    };

    let customer_opinion = choice.customer_span.as_ref().map(|s| sentence_text(res.store, s)).transpose()?;
    let assistant_opinion = sentence_text(res.store, &choice.assistant_span)?;
    // Connectives name the feature as the cited sentence does; the neutral
    // question borrows the wording of the answer it asks for.
    let customer_feature_text =
        choice.customer_span.as_ref().unwrap_or(&choice.assistant_span).feature_surface.to_lowercase();
    let assistant_feature_text = choice.assistant_span.feature_surface.to_lowercase();
    let customer_slots = UtteranceSlots {
        feature: Some(&customer_feature_text),
        product_title: Some(title(res.catalog, &choice.customer_product)?),
        opinion: customer_opinion,
    };
    let assistant_slots = UtteranceSlots {
        feature: Some(&assistant_feature_text),
        product_title: Some(title(res.catalog, &choice.assistant_product)?),
        opinion: Some(assistant_opinion),
    };
    let (customer_text, assistant_text) = realize(kind, &customer_slots, &assistant_slots, res.phrasebank, rng)?;

    let turn = |speaker, act, text, product: &str, feature: &str, span: Option<&OpinionSpan>| Turn {
        speaker,
        stage: Stage::Evaluation,
        act,
        text,
        product_id: Some(product.to_string()),
        feature: Some(feature.to_string()),
        value: None,
        pair_index: Some(pair_index),
        pair_kind: Some(kind),
        grounding: span.map(GroundingRef::of).into_iter().collect(),
    };
    let customer_turn = turn(
        Speaker::Customer,
        kind.customer_act(),
        customer_text,
        &choice.customer_product,
        &choice.customer_feature,
        choice.customer_span.as_ref(),
    );
    let assistant_turn = turn(
        Speaker::Assistant,
        kind.assistant_act(),
        assistant_text,
        &choice.assistant_product,
        &choice.assistant_feature,
        Some(&choice.assistant_span),
    );

    let mut after = state.clone();
    after.used_spans.extend(choice.customer_span.iter().map(SpanId::of));
    after.used_spans.insert(SpanId::of(&choice.assistant_span));
    after.discussed_features.insert(choice.customer_feature.clone());
    after.discussed_features.insert(choice.assistant_feature.clone());
    after.visited.insert(choice.assistant_product.clone());
    after.current_product = choice.assistant_product.clone();

    Ok(PairOutcome::Satisfied(Box::new(DialogPair {
        kind,
        customer_turn,
        assistant_turn,
        bindings: choice.bindings(),
        state_after: after,
    })))
}
