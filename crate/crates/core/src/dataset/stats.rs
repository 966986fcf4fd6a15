use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::dialog::{Conversation, Stage};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub conversations: usize,
    pub per_template: BTreeMap<u32, usize>,
    pub per_pair_kind: BTreeMap<String, usize>,
    pub mean_turns: f64,
    pub distinct_products: usize,
    pub distinct_features: usize,
    /// Citations of a span beyond its first within the same conversation.
    pub span_reuse: usize,
}

pub fn stats(conversations: &[Conversation]) -> DatasetStats {
    let mut s = DatasetStats { conversations: conversations.len(), ..Default::default() };
    let mut products = BTreeSet::new();
    let mut features = BTreeSet::new();
    let mut turns = 0usize;
    for c in conversations {
        *s.per_template.entry(c.template_id).or_default() += 1;
        for p in &c.pair_trace {
            *s.per_pair_kind.entry(p.kind.name().to_string()).or_default() += 1;
        }
        let mut cited = BTreeSet::new();
        for t in c.turns() {
            turns += 1;
            products.extend(t.product_id.iter().cloned());
            if t.stage == Stage::Evaluation {
                features.extend(t.feature.iter().cloned());
            }
            for g in &t.grounding {
                if !cited.insert(g.span_id()) {
                    s.span_reuse += 1;
                }
            }
        }
        products.extend(c.product_trajectory.iter().cloned());
    }
    if !conversations.is_empty() {
        s.mean_turns = turns as f64 / conversations.len() as f64;
    }
    s.distinct_products = products.len();
    s.distinct_features = features.len();
    s
}
