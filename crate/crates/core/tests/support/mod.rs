//! Fixture builders and brute-force oracles shared by integration tests.
//!
//! The oracles deliberately avoid library helpers (`searchable`, `span_order`,
//! `switch_pool`, the index) so that agreement is evidence, not tautology.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;
use salesdialog::annotate::{annotate_store, SpanSource};
use salesdialog::corpus::{ingest_metadata, ingest_reviews, IngestOptions, Product, Review, SearchableField};
use salesdialog::negotiation::{DialogState, FeatureSlot, ProductSlot, Resources};
use salesdialog::search_dialog::{AlternativesSet, Preference, PreferenceProfile};
use salesdialog::{
    ExtractConfig, Lexicons, OpinionIndex, OpinionSpan, PairKind, Phrasebank, PolarityLabel, PolarityThresholds,
    ProductCatalog, ReviewStore, SpanId,
};

pub const FEATURES: [&str; 4] = ["battery", "screen", "camera", "signal"];

pub fn product(id: &str, attrs: [Option<&str>; 4], also: &[&str]) -> Product {
    let [brand, os, memory, color] = attrs.map(|a| a.map(str::to_string));
    Product {
        id: id.into(),
        title: format!("Phone {id}"),
        category_path: vec!["Cell Phones".into()],
        brand,
        os,
        memory,
        color,
        price: None,
        also_viewed: also.iter().map(|s| s.to_string()).collect(),
        description: None,
    }
}

/// Catalog, store and index plus the raw span list the index was built from.
pub struct Fixture {
    pub catalog: ProductCatalog,
    pub store: ReviewStore,
    pub index: OpinionIndex,
    pub phrasebank: Phrasebank,
    /// `(product, span)` for every indexed span, in construction order.
    pub spans: Vec<(String, OpinionSpan)>,
}

impl Fixture {
    pub fn resources(&self) -> Resources<'_> {
        Resources { catalog: &self.catalog, store: &self.store, index: &self.index, phrasebank: &self.phrasebank }
    }
}

/// One single-sentence review per opinion `(product, feature, score)`.
pub fn fixture(products: Vec<Product>, opinions: &[(&str, &str, f64)]) -> Fixture {
    let (catalog, _) = ProductCatalog::from_products(products).unwrap();
    let thresholds = PolarityThresholds::default();
    let mut reviews = Vec::new();
    let mut spans = Vec::new();
    for (i, (p, f, score)) in opinions.iter().enumerate() {
        let text = format!("Review {i} talks about the {f}.");
        let id = format!("r{i:04}");
        reviews.push(Review {
            id: id.clone(),
            product_id: p.to_string(),
            raw_text: text.clone(),
            normalized_text: text,
            rating: None,
        });
        spans.push((
            p.to_string(),
            OpinionSpan {
                review_id: id,
                sentence_ordinal: 0,
                feature_surface: f.to_string(),
                feature_canonical: f.to_string(),
                polarity_score: *score,
                polarity_label: thresholds.label(*score),
                source: SpanSource::Imported,
            },
        ));
    }
    let store = ReviewStore::from_reviews(&catalog, reviews).unwrap();
    let raw: Vec<OpinionSpan> = spans.iter().map(|(_, s)| s.clone()).collect();
    let index = OpinionIndex::build(&catalog, &store, &raw).unwrap();
    Fixture { catalog, store, index, phrasebank: Phrasebank::builtin(), spans }
}

const BRANDS: [&str; 3] = ["Samsung", "LG", "Apple"];
const OSES: [&str; 2] = ["Android", "iOS"];
const MEMORIES: [&str; 3] = ["16GB", "32GB", "64GB"];
const COLORS: [&str; 3] = ["Black", "black", "Silver"];

fn maybe<'a, R: Rng>(rng: &mut R, values: &[&'a str]) -> Option<&'a str> {
    if rng.gen_bool(0.15) {
        None
    } else {
        values.choose(rng).copied()
    }
}

/// Random fixture with at most 10 products and at most 200 spans. Scores
/// are drawn from a small grid so ties in |score| occur.
pub fn random_fixture<R: Rng>(rng: &mut R) -> Fixture {
    let n_products = rng.gen_range(2..=10);
    let ids: Vec<String> = (0..n_products).map(|i| format!("P{i}")).collect();
    let mut products = Vec::new();
    for id in &ids {
        let also: Vec<&str> = ids.iter().filter(|_| rng.gen_bool(0.25)).map(String::as_str).collect();
        let mut also: Vec<&str> = also.into_iter().filter(|a| *a != id).collect();
        if rng.gen_bool(0.2) {
            also.push("OUTSIDE");
        }
        let attrs = [maybe(rng, &BRANDS), maybe(rng, &OSES), maybe(rng, &MEMORIES), maybe(rng, &COLORS)];
        products.push(product(id, attrs, &also));
    }
    let n_spans = rng.gen_range(0..=60);
    let grid = [-0.9, -0.5, -0.2, -0.05, 0.0, 0.05, 0.2, 0.5, 0.9];
    let owned: Vec<(String, String, f64)> = (0..n_spans)
        .map(|_| {
            (
                ids.choose(rng).unwrap().clone(),
                FEATURES[..rng.gen_range(1..=FEATURES.len())].choose(rng).unwrap().to_string(),
                *grid.choose(rng).unwrap(),
            )
        })
        .collect();
    let opinions: Vec<(&str, &str, f64)> = owned.iter().map(|(p, f, s)| (p.as_str(), f.as_str(), *s)).collect();
    fixture(products, &opinions)
}

pub fn random_profile<R: Rng>(rng: &mut R) -> PreferenceProfile {
    let pick = |rng: &mut R, values: &[&str]| {
        if rng.gen_bool(0.4) {
            Preference::NoPreference
        } else {
            let v = values.choose(rng).unwrap();
            Preference::Value(if rng.gen_bool(0.3) { v.to_uppercase() } else { v.to_string() })
        }
    };
    PreferenceProfile::new([
        (SearchableField::Brand, pick(rng, &BRANDS)),
        (SearchableField::Os, pick(rng, &OSES)),
        (SearchableField::Memory, pick(rng, &MEMORIES)),
        (SearchableField::Color, pick(rng, &COLORS)),
    ])
}

/// A valid dialog state: random seed, members, visited subset of members,
/// random used spans and discussed features.
pub fn random_state<R: Rng>(rng: &mut R, fx: &Fixture) -> DialogState {
    let ids: Vec<String> = fx.catalog.ids().map(str::to_string).collect();
    let seed = ids.choose(rng).unwrap().clone();
    let mut members: Vec<String> = ids.iter().filter(|p| **p == seed || rng.gen_bool(0.4)).cloned().collect();
    members.sort();
    let mut state = DialogState::new(AlternativesSet { seed_product: seed, members: members.clone() });
    for m in &members {
        if rng.gen_bool(0.2) {
            state.visited.insert(m.clone());
        }
    }
    let visited: Vec<String> = state.visited.iter().cloned().collect();
    state.current_product = visited.choose(rng).unwrap().clone();
    for (_, span) in &fx.spans {
        if rng.gen_bool(0.2) {
            state.used_spans.insert(SpanId::of(span));
        }
    }
    for f in FEATURES {
        if rng.gen_bool(0.3) {
            state.discussed_features.insert(f.to_string());
        }
    }
    state
}

/// Field-by-field predicate scan.
pub fn brute_filter(catalog: &ProductCatalog, profile: &PreferenceProfile) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    'products: for p in catalog.iter() {
        for (field, pref) in profile.iter() {
            let Preference::Value(want) = pref else { continue };
            let have = match field {
                SearchableField::Brand => &p.brand,
                SearchableField::Os => &p.os,
                SearchableField::Memory => &p.memory,
                SearchableField::Color => &p.color,
            };
            match have {
                Some(h) if h.eq_ignore_ascii_case(want) => {}
                _ => continue 'products,
            }
        }
        out.insert(p.id.clone());
    }
    out
}

/// Linear scan under the documented order: |score| descending, then review
/// id, sentence ordinal and surface ascending.
pub fn brute_candidates<'a>(
    spans: &'a [(String, OpinionSpan)],
    product: &str,
    feature: &str,
    label: PolarityLabel,
    exclude: &BTreeSet<SpanId>,
) -> Vec<&'a OpinionSpan> {
    if label == PolarityLabel::Neutral {
        return Vec::new();
    }
    let mut hits: Vec<&OpinionSpan> = spans
        .iter()
        .filter(|(p, s)| {
            p == product
                && s.feature_canonical == feature
                && s.polarity_label == label
                && !exclude.contains(&SpanId::of(s))
        })
        .map(|(_, s)| s)
        .collect();
    hits.sort_by(|a, b| {
        let (x, y) = (a.polarity_score.abs(), b.polarity_score.abs());
        y.partial_cmp(&x)
            .unwrap()
            .then(a.review_id.cmp(&b.review_id))
            .then(a.sentence_ordinal.cmp(&b.sentence_ordinal))
            .then(a.feature_surface.cmp(&b.feature_surface))
    });
    hits
}

/// One fully bound pair: customer `(product, feature, span)` and assistant
/// `(product, feature, span)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Assignment {
    pub customer_product: String,
    pub customer_feature: String,
    pub customer_span: Option<SpanId>,
    pub assistant_product: String,
    pub assistant_feature: String,
    pub assistant_span: SpanId,
}

/// Every slot assignment satisfying `kind` in `state`, by direct
/// enumeration over all span pairs.
pub fn brute_assignments(
    kind: PairKind,
    state: &DialogState,
    catalog: &ProductCatalog,
    spans: &[(String, OpinionSpan)],
) -> Vec<Assignment> {
    let sig = kind.signature();
    let p1 = &state.current_product;
    let mut pool: BTreeSet<String> = state.alternatives.members.iter().cloned().collect();
    if let Some(current) = catalog.get(p1) {
        pool.extend(current.also_viewed.iter().filter(|a| catalog.get(a).is_some()).cloned());
    }
    let usable = |p: &String, s: &OpinionSpan, label| {
        s.polarity_label == label
            && s.polarity_label != PolarityLabel::Neutral
            && !state.used_spans.contains(&SpanId::of(s))
            && catalog.get(p).is_some()
    };
    let mut out = Vec::new();
    let customer_options: Vec<Option<(&String, &OpinionSpan)>> = if sig.customer.label == PolarityLabel::Neutral {
        vec![None]
    } else {
        spans.iter().filter(|(p, s)| p == p1 && usable(p, s, sig.customer.label)).map(|(p, s)| Some((p, s))).collect()
    };
    for customer in customer_options {
        for (ap, aspan) in spans.iter().filter(|(p, s)| usable(p, s, sig.assistant.label)) {
            if let Some((_, cs)) = customer {
                if SpanId::of(cs) == SpanId::of(aspan) {
                    continue;
                }
            }
            let product_ok = match sig.assistant.product {
                ProductSlot::P1 => ap == p1,
                ProductSlot::P2 => ap != p1 && pool.contains(ap) && !state.visited.contains(ap),
            };
            if !product_ok {
                continue;
            }
            let fa = match customer {
                Some((_, cs)) => cs.feature_canonical.clone(),
                // Unbound customer feature: every feature P1 has a span for.
                None => aspan.feature_canonical.clone(),
            };
            let feature_ok = match sig.assistant.feature {
                FeatureSlot::FA => aspan.feature_canonical == fa,
                FeatureSlot::FB => aspan.feature_canonical != fa,
            };
            if !feature_ok {
                continue;
            }
            if customer.is_none() && sig.assistant.feature == FeatureSlot::FB {
                continue;
            }
            out.push(Assignment {
                customer_product: p1.clone(),
                customer_feature: fa,
                customer_span: customer.map(|(_, s)| SpanId::of(s)),
                assistant_product: ap.clone(),
                assistant_feature: aspan.feature_canonical.clone(),
                assistant_span: SpanId::of(aspan),
            });
        }
    }
    out
}

pub fn sample_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/sample")
}

/// The bundled sample corpus, ingested and annotated with default settings.
pub fn sample_fixture() -> Fixture {
    let dir = sample_dir();
    let (catalog, _) = ingest_metadata(&dir.join("meta.jsonl"), IngestOptions::default()).unwrap();
    let (store, _) = ingest_reviews(&dir.join("reviews.jsonl"), &catalog, IngestOptions::default()).unwrap();
    let raw = annotate_store(&store, &Lexicons::builtin(), &ExtractConfig::default());
    let index = OpinionIndex::build(&catalog, &store, &raw).unwrap();
    let spans = index.iter().map(|(p, s)| (p.to_string(), s.clone())).collect();
    Fixture { catalog, store, index, phrasebank: Phrasebank::builtin(), spans }
}
