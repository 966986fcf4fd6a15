//! Information-search stage: feature-value questions that narrow the
//! catalog to a set of alternatives.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{ProductCatalog, SearchableField};
use crate::dialog::{DialogAct, Speaker, Stage, Turn};
use crate::index::OpinionIndex;
use crate::negotiation::Phrasebank;
use crate::seed::DialogRng;

pub const DEFAULT_P_SKIP: f64 = 0.25;

#[derive(Debug, Error, PartialEq)]
pub enum SearchError {
    #[error("no product has at least {min_opinions} non-neutral opinions")]
    NoEligibleProduct { min_opinions: usize },
    #[error("product {0} is not in the catalog")]
    UnknownProduct(String),
    #[error("product {0} has no value for any searchable field")]
    NoSearchableValues(String),
    #[error("skip probability {0} is outside [0, 1]")]
    InvalidProbability(f64),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preference {
    Value(String),
    NoPreference,
}

/// One answer per searchable field, in question order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferenceProfile {
    answers: BTreeMap<SearchableField, Preference>,
}

impl Default for PreferenceProfile {
    fn default() -> Self {
        PreferenceProfile { answers: SearchableField::ALL.map(|f| (f, Preference::NoPreference)).into() }
    }
}

impl PreferenceProfile {
    /// Unlisted fields default to no preference.
    pub fn new(answers: impl IntoIterator<Item = (SearchableField, Preference)>) -> Self {
        let mut profile = Self::default();
        profile.answers.extend(answers);
        profile
    }

    pub fn get(&self, field: SearchableField) -> &Preference {
        &self.answers[&field]
    }

    pub fn set(&mut self, field: SearchableField, preference: Preference) {
        self.answers.insert(field, preference);
    }

    pub fn iter(&self) -> impl Iterator<Item = (SearchableField, &Preference)> {
        self.answers.iter().map(|(f, p)| (*f, p))
    }

    /// Rebuilds the profile from the customer answers of a search dialog.
    /// Returns `None` if an answer names an unknown field or a field twice.
    pub fn from_turns<'a>(turns: impl IntoIterator<Item = &'a Turn>) -> Option<Self> {
        let mut profile = Self::default();
        let mut seen = BTreeSet::new();
        for turn in turns {
            if turn.act != DialogAct::StatePreference {
                continue;
            }
            let field = SearchableField::from_name(turn.feature.as_deref()?)?;
            if !seen.insert(field) {
                return None;
            }
            let pref = turn.value.clone().map_or(Preference::NoPreference, Preference::Value);
            profile.set(field, pref);
        }
        Some(profile)
    }
}

/// Products surviving the search stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlternativesSet {
    pub seed_product: String,
    /// Sorted product ids; always contains `seed_product`.
    pub members: Vec<String>,
}

/// Products matching every answered field, case-insensitively. Products
/// lacking an answered field never match.
pub fn filter(catalog: &ProductCatalog, profile: &PreferenceProfile) -> BTreeSet<String> {
    let wanted: Vec<(SearchableField, String)> = profile
        .iter()
        .filter_map(|(f, p)| match p {
            Preference::Value(v) => Some((f, v.to_lowercase())),
            Preference::NoPreference => None,
        })
        .collect();
    catalog
        .iter()
        .filter(|product| {
            wanted.iter().all(|(f, v)| product.searchable(*f).is_some_and(|have| have.to_lowercase() == *v))
        })
        .map(|p| p.id.clone())
        .collect()
}

/// Products with at least `min_opinions` non-neutral spans, in id order.
pub fn eligible_products<'a>(catalog: &'a ProductCatalog, index: &OpinionIndex, min_opinions: usize) -> Vec<&'a str> {
    catalog.ids().filter(|id| index.opinion_count(id) >= min_opinions).collect()
}

/// Uniform seeded choice among [`eligible_products`].
pub fn sample_seed(
    catalog: &ProductCatalog,
    index: &OpinionIndex,
    rng: &mut DialogRng,
    min_opinions: usize,
) -> Result<String, SearchError> {
    let eligible = eligible_products(catalog, index, min_opinions);
    if eligible.is_empty() {
        return Err(SearchError::NoEligibleProduct { min_opinions });
    }
    Ok(eligible[rng.gen_range(0..eligible.len())].to_string())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchDialog {
    pub turns: Vec<Turn>,
    pub profile: PreferenceProfile,
    pub alternatives: AlternativesSet,
}

/// Asks about each searchable field in fixed order; the customer answers
/// with the seed product's value or, with probability `p_skip` or when the
/// seed has no value, states no preference.
///
/// Per field the generator is drawn in a fixed order (skip decision,
/// question variant, answer variant) whether or not the value exists.
pub fn generate_search_dialog(
    seed_product: &str,
    catalog: &ProductCatalog,
    phrasebank: &Phrasebank,
    rng: &mut DialogRng,
    p_skip: f64,
) -> Result<SearchDialog, SearchError> {
    if !(0.0..=1.0).contains(&p_skip) {
        return Err(SearchError::InvalidProbability(p_skip));
    }
    let seed = catalog.get(seed_product).ok_or_else(|| SearchError::UnknownProduct(seed_product.to_string()))?;
    if SearchableField::ALL.iter().all(|f| seed.searchable(*f).is_none()) {
        return Err(SearchError::NoSearchableValues(seed_product.to_string()));
    }

    let mut turns = Vec::with_capacity(2 * SearchableField::ALL.len());
    let mut profile = PreferenceProfile::default();
    for field in SearchableField::ALL {
        let skip = rng.gen_bool(p_skip);
        let value = seed.searchable(field).filter(|_| !skip);
        let search_turn = |speaker, act, text: String, value: Option<&str>| Turn {
            speaker,
            stage: Stage::Search,
            act,
            text,
            product_id: None,
            feature: Some(field.name().to_string()),
            value: value.map(str::to_string),
            pair_index: None,
            pair_kind: None,
            grounding: Vec::new(),
        };
        turns.push(search_turn(
            Speaker::Assistant,
            DialogAct::AskPreference,
            phrasebank.render_question(field, rng),
            None,
        ));
        turns.push(search_turn(
            Speaker::Customer,
            DialogAct::StatePreference,
            phrasebank.render_answer(value, rng),
            value,
        ));
        if let Some(v) = value {
            profile.set(field, Preference::Value(v.to_string()));
        }
    }

    let mut members = filter(catalog, &profile);
    members.insert(seed_product.to_string());
    let alternatives =
        AlternativesSet { seed_product: seed_product.to_string(), members: members.into_iter().collect() };
    Ok(SearchDialog { turns, profile, alternatives })
}
