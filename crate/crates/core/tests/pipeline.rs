mod support;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use proptest::prelude::*;
use salesdialog::assembly::{
    builtin_templates, conversation_seed, generate_conversation, generate_dataset, GenerateError,
};
use salesdialog::corpus::{ingest_metadata, ingest_reviews, CorpusSnapshot, IngestOptions};
use salesdialog::dataset::{read_dataset, stats, validate_conversation, write_dataset, Rule};
use salesdialog::dialog::{Speaker, Stage};
use salesdialog::negotiation::{DialogState, ProductSlot};
use salesdialog::search_dialog::AlternativesSet;
use salesdialog::{Conversation, ConversationTemplate, GenerationParams, PairKind, PolarityLabel, SpanId};
use support::*;

fn template(id: u32) -> ConversationTemplate {
    builtin_templates().into_iter().find(|t| t.id == id).unwrap()
}

/// Slot-level `(product, feature)` bindings of every way to satisfy a
/// whole template from `state`, enumerated pair by pair.
fn brute_template(
    sequence: &[PairKind],
    state: &DialogState,
    fx: &Fixture,
) -> Vec<Vec<(String, String, String, String)>> {
    let Some((&kind, rest)) = sequence.split_first() else { return vec![Vec::new()] };
    let mut out = Vec::new();
    for a in brute_assignments(kind, state, &fx.catalog, &fx.spans) {
        let mut next = state.clone();
        next.used_spans.extend(a.customer_span.clone());
        next.used_spans.insert(a.assistant_span.clone());
        next.discussed_features.insert(a.customer_feature.clone());
        next.discussed_features.insert(a.assistant_feature.clone());
        next.visited.insert(a.assistant_product.clone());
        next.current_product = a.assistant_product.clone();
        let head = (a.customer_product, a.customer_feature, a.assistant_product, a.assistant_feature);
        for mut tail in brute_template(rest, &next, fx) {
            tail.insert(0, head.clone());
            out.push(tail);
        }
    }
    out
}

fn slot_trace(c: &Conversation) -> Vec<(String, String, String, String)> {
    c.pair_trace
        .iter()
        .map(|p| {
            let b = &p.bindings;
            (
                b.customer_product.clone(),
                b.customer_feature.clone(),
                b.assistant_product.clone(),
                b.assistant_feature.clone(),
            )
        })
        .collect()
}

#[test]
fn ingest_skips_seven_orphans_of_one_hundred() {
    let dir = tempfile::tempdir().unwrap();
    let meta = dir.path().join("meta.jsonl");
    let reviews = dir.path().join("reviews.jsonl");
    let mut m = std::fs::File::create(&meta).unwrap();
    for id in ["A", "B", "C"] {
        writeln!(m, r#"{{"id":"{id}","title":"Phone {id}","brand":"X"}}"#).unwrap();
    }
    let orphan_lines = [4, 18, 32, 46, 60, 74, 88];
    let mut r = std::fs::File::create(&reviews).unwrap();
    for line in 1..=100 {
        let product = if orphan_lines.contains(&line) { "GHOST" } else { ["A", "B", "C"][line % 3] };
        writeln!(r, r#"{{"id":"r{line}","product_id":"{product}","text":"Review number {line} is fine."}}"#).unwrap();
    }
    drop((m, r));
    let (catalog, _) = ingest_metadata(&meta, IngestOptions::default()).unwrap();
    let (store, report) = ingest_reviews(&reviews, &catalog, IngestOptions::default()).unwrap();
    assert_eq!(store.len(), 93);
    assert_eq!(report.orphans.iter().map(|(l, _)| *l).collect::<Vec<_>>(), orphan_lines);

    let snapshot = CorpusSnapshot::from_parts(&catalog, &store);
    let path = dir.path().join("corpus.json");
    snapshot.save(&path).unwrap();
    let back = CorpusSnapshot::load(&path).unwrap();
    assert_eq!(back, snapshot);
    let (catalog2, store2) = back.into_parts().unwrap();
    assert_eq!(catalog2, catalog);
    assert_eq!(store2.len(), 93);
}

#[test]
fn template_nine_satisfiable_one_way_yields_that_way() {
    let attrs = [Some("Acme"), Some("Android"), Some("32GB"), Some("Black")];
    let fx = fixture(
        vec![product("P", attrs, &["Q"]), product("Q", attrs, &[])],
        &[("P", "battery", 0.5), ("P", "battery", 0.4), ("P", "screen", 0.6), ("Q", "screen", 0.3)],
    );
    let t9 = template(9);
    assert_eq!(t9.sequence, vec![PairKind::SearchAgreement, PairKind::RequestInform]);

    let start = DialogState::new(AlternativesSet { seed_product: "P".into(), members: vec!["P".into(), "Q".into()] });
    let ways: BTreeSet<_> = brute_template(&t9.sequence, &start, &fx).into_iter().collect();
    assert_eq!(ways.len(), 1, "fixture must admit exactly one slot assignment: {ways:?}");

    let generated = generate_conversation(&t9, &fx.resources(), &GenerationParams::default(), 7, "t09-0000").unwrap();
    let c = generated.conversation;
    assert_eq!(c.search_turns.len(), 8);
    assert_eq!(c.evaluation_turns.len(), 4);
    assert_eq!(slot_trace(&c), ways.into_iter().next().unwrap());
}

#[test]
fn no_negative_opinions_exhausts_a_template_needing_one() {
    let attrs = [Some("Acme"), None, None, None];
    let opinions: Vec<(&str, &str, f64)> =
        ["battery", "screen", "camera", "battery", "screen", "camera"].iter().map(|f| ("P", *f, 0.5)).collect();
    let fx = fixture(vec![product("P", attrs, &[])], &opinions);
    let t1 = template(1);
    let params = GenerationParams::default();
    match generate_conversation(&t1, &fx.resources(), &params, 3, "t01-0000") {
        Err(GenerateError::Exhausted { template_id: 1, retries }) => assert_eq!(retries, params.retry_budget),
        other => panic!("expected exhaustion, got {other:?}"),
    }
    let (conversations, report) = generate_dataset(&[t1], 4, 9, &fx.resources(), &params).unwrap();
    assert!(conversations.is_empty());
    assert_eq!(report.exhausted.len(), 4);
    assert_eq!(report.per_template[&1].exhausted, 4);
}

fn multi_fixture() -> Fixture {
    let attrs = [Some("Acme"), Some("Android"), None, Some("Black")];
    let ids = ["P0", "P1", "P2", "P3"];
    let products = ids.iter().map(|id| product(id, attrs, &ids)).collect();
    let mut opinions = Vec::new();
    for p in ids {
        for f in FEATURES {
            for s in [0.6, 0.4, -0.5, -0.3] {
                opinions.push((p, f, s));
            }
        }
    }
    fixture(products, &opinions)
}

#[test]
fn equal_seeds_agree_and_different_seeds_differ() {
    let fx = multi_fixture();
    let templates = builtin_templates();
    let params = GenerationParams::default();
    let run = |seed| generate_dataset(&templates, 3, seed, &fx.resources(), &params).unwrap().0;
    let a = run(100);
    assert_eq!(a.len(), 42);
    assert_eq!(a, run(100));
    let b = run(101);
    let traces = |d: &[Conversation]| d.iter().map(|c| c.pair_trace.clone()).collect::<Vec<_>>();
    assert_ne!(traces(&a), traces(&b));
}

#[test]
fn search_led_product_switch_opens_with_a_stated_need() {
    let fx = multi_fixture();
    let templates = vec![template(12)];
    let (conversations, _) = generate_dataset(&templates, 5, 7, &fx.resources(), &GenerationParams::default()).unwrap();
    assert_eq!(conversations.len(), 5);
    let cues = fx.phrasebank.need_cues();
    for c in &conversations {
        assert!(validate_conversation(c, &templates, &fx.catalog, &fx.store, &fx.index).is_empty(), "{}", c.id);
        for (i, turn) in c.evaluation_turns.iter().enumerate().filter(|(i, _)| i % 2 == 0) {
            let feature = turn.feature.as_deref().unwrap();
            let cued = cues.iter().any(|cue| turn.text.starts_with(&format!("{} ", cue.replace("{feature}", feature))));
            assert_eq!(cued, i == 2, "{}: {}", c.id, turn.text);
        }
    }
}

#[test]
fn removing_a_template_leaves_other_conversations_byte_identical() {
    let fx = sample_fixture();
    let params = GenerationParams::default();
    let all = builtin_templates();
    let fewer: Vec<_> = all.iter().filter(|t| t.id != 5).cloned().collect();
    let json = |d: Vec<Conversation>| -> BTreeMap<String, String> {
        d.into_iter().map(|c| (c.id.clone(), serde_json::to_string(&c).unwrap())).collect()
    };
    let full = json(generate_dataset(&all, 3, 42, &fx.resources(), &params).unwrap().0);
    let reduced = json(generate_dataset(&fewer, 3, 42, &fx.resources(), &params).unwrap().0);
    assert!(!reduced.is_empty());
    for (id, line) in &reduced {
        assert_eq!(full.get(id), Some(line), "{id} changed");
    }
    assert_eq!(full.len() - reduced.len(), full.keys().filter(|k| k.starts_with("t05-")).count());
}

#[test]
fn generated_sample_conversations_pass_every_rule() {
    let fx = sample_fixture();
    let templates = builtin_templates();
    let (conversations, report) =
        generate_dataset(&templates, 5, 2024, &fx.resources(), &GenerationParams::default()).unwrap();
    assert_eq!(report.succeeded, conversations.len());
    for c in &conversations {
        assert!(validate_conversation(c, &templates, &fx.catalog, &fx.store, &fx.index).is_empty(), "{}", c.id);
        let t = templates.iter().find(|t| t.id == c.template_id).unwrap();
        assert_eq!(c.pair_trace.iter().map(|p| p.kind).collect::<Vec<_>>(), t.sequence);
        for (i, turn) in c.evaluation_turns.iter().enumerate() {
            assert_eq!(turn.speaker == Speaker::Customer, i % 2 == 0);
            assert_eq!(turn.stage, Stage::Evaluation);
        }
        let mut seen = BTreeSet::new();
        for g in c.turns().flat_map(|t| &t.grounding) {
            assert!(seen.insert(g.span_id()));
        }
    }
}

#[test]
fn stats_count_three_templates_twice_each() {
    let fx = sample_fixture();
    let templates: Vec<_> = [1, 9, 10].into_iter().map(template).collect();
    let (conversations, _) = generate_dataset(&templates, 2, 5, &fx.resources(), &GenerationParams::default()).unwrap();
    let s = stats(&conversations);
    assert_eq!(s.per_template, BTreeMap::from([(1, 2), (9, 2), (10, 2)]));
    assert_eq!(s.conversations, 6);
    assert_eq!(s.span_reuse, 0);
}

/// Generated conversation for template 6 (contains an agreement pair) on
/// the sample corpus.
fn mutation_base() -> (Fixture, Vec<ConversationTemplate>, Conversation) {
    let fx = sample_fixture();
    let templates = builtin_templates();
    let t6 = template(6);
    let c = generate_conversation(&t6, &fx.resources(), &GenerationParams::default(), conversation_seed(1, 6, 0), "m")
        .unwrap()
        .conversation;
    assert!(validate_conversation(&c, &templates, &fx.catalog, &fx.store, &fx.index).is_empty());
    (fx, templates, c)
}

fn only_violation(fx: &Fixture, templates: &[ConversationTemplate], c: &Conversation, rule: Rule) {
    let v = validate_conversation(c, templates, &fx.catalog, &fx.store, &fx.index);
    assert_eq!(v.len(), 1, "expected one {rule:?} violation, got {v:#?}");
    assert_eq!(v[0].rule, rule);
    assert_eq!(v[0].conversation_id, c.id);
}

#[test]
fn each_rule_has_a_mutation_only_it_flags() {
    let (fx, templates, base) = mutation_base();

    let mut c = base.clone();
    c.evaluation_turns[1].text = "Trust me, it is great.".into();
    only_violation(&fx, &templates, &c, Rule::Grounding);

    let mut c = base.clone();
    c.evaluation_turns[1].grounding[0].review_id = "no-such-review".into();
    only_violation(&fx, &templates, &c, Rule::Grounding);

    let mut c = base.clone();
    let g = &mut c.evaluation_turns[1].grounding[0];
    g.label = if g.label == PolarityLabel::Positive { PolarityLabel::Negative } else { PolarityLabel::Positive };
    only_violation(&fx, &templates, &c, Rule::Polarity);

    let mut c = base.clone();
    c.template_id = 1;
    only_violation(&fx, &templates, &c, Rule::TemplateConformance);

    let mut c = base.clone();
    let outsider = fx.catalog.ids().find(|p| !c.alternatives.members.iter().any(|m| m == p));
    c.alternatives.members.push(outsider.unwrap_or("B0BOGUS").to_string());
    c.alternatives.members.sort();
    only_violation(&fx, &templates, &c, Rule::ProductPool);

    let mut c = base.clone();
    let agree = c.pair_trace.iter().position(|p| p.kind == PairKind::SearchAgreement).unwrap();
    let cited = c.evaluation_turns[2 * agree].grounding[0].clone();
    let sentence = fx.store.sentence(&cited.review_id, cited.sentence_ordinal).unwrap().text.clone();
    let reply = &mut c.evaluation_turns[2 * agree + 1];
    reply.text = format!("{} {sentence}", reply.text);
    reply.grounding.push(cited);
    only_violation(&fx, &templates, &c, Rule::SpanReuse);

    let mut c = base.clone();
    c.evaluation_turns[0].speaker = Speaker::Assistant;
    c.evaluation_turns[1].speaker = Speaker::Customer;
    only_violation(&fx, &templates, &c, Rule::Alternation);
}

#[test]
fn switch_targets_come_from_the_pool() {
    let fx = sample_fixture();
    let chained = ConversationTemplate::new(
        99,
        vec![PairKind::DenySwitchProduct, PairKind::DenySwitchProduct, PairKind::DenySwitchProduct],
    )
    .unwrap();
    let (conversations, _) =
        generate_dataset(std::slice::from_ref(&chained), 10, 8, &fx.resources(), &GenerationParams::default()).unwrap();
    assert!(!conversations.is_empty());
    for c in &conversations {
        assert_eq!(c.product_trajectory.len(), 4);
        let mut reachable: BTreeSet<String> = c.alternatives.members.iter().cloned().collect();
        for (prev, next) in c.product_trajectory.iter().zip(&c.product_trajectory[1..]) {
            reachable.extend(fx.catalog.also_viewed_in_catalog(prev).into_iter().map(str::to_string));
            assert!(reachable.contains(next), "{}: {next} not reachable", c.id);
        }
        for p in &c.pair_trace {
            assert_eq!(p.kind.signature().assistant.product, ProductSlot::P2);
            assert_ne!(p.bindings.customer_product, p.bindings.assistant_product);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn dataset_round_trips(seed in any::<u64>()) {
        let fx = multi_fixture();
        let templates: Vec<_> = [4, 13, 14].into_iter().map(template).collect();
        let (conversations, _) =
            generate_dataset(&templates, 2, seed, &fx.resources(), &GenerationParams::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        write_dataset(&conversations, &path).unwrap();
        prop_assert_eq!(read_dataset(&path).unwrap(), conversations);
    }

    #[test]
    fn used_spans_are_distinct_within_a_conversation(seed in any::<u64>()) {
        let fx = multi_fixture();
        let (conversations, _) =
            generate_dataset(&builtin_templates(), 1, seed, &fx.resources(), &GenerationParams::default()).unwrap();
        for c in conversations {
            let ids: Vec<SpanId> = c.turns().flat_map(|t| &t.grounding).map(|g| g.span_id()).collect();
            let distinct: BTreeSet<_> = ids.iter().collect();
            prop_assert_eq!(ids.len(), distinct.len());
        }
    }
}
