use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn salesdialog(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_salesdialog")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn sample(file: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/sample").join(file)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ingest_sample(root: &Path) -> PathBuf {
    let out = root.join("corpus");
    let o = salesdialog(&[
        "ingest",
        "--out",
        s(&out),
        "--meta",
        s(&sample("meta.jsonl")),
        "--reviews",
        s(&sample("reviews.jsonl")),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    out.join("corpus.json")
}

fn generate(corpus: &Path, out: &Path, seed: &str) -> Output {
    salesdialog(&["generate", "--corpus", s(corpus), "--out", s(out), "--seed", seed, "--per-template", "3"])
}

fn files(dir: &Path) -> BTreeSet<String> {
    walk(dir).into_iter().map(|p| p.strip_prefix(dir).unwrap().display().to_string()).collect()
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            out.extend(walk(&path));
        } else {
            out.push(path);
        }
    }
    out
}

#[test]
fn missing_input_fails_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nowhere/meta.jsonl");
    let o = salesdialog(&["ingest", "--out", s(dir.path()), "--meta", s(&missing), "--reviews", s(&missing)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains(s(&missing)), "{}", stderr(&o));
}

#[test]
fn strict_ingest_names_the_malformed_line() {
    let dir = tempfile::tempdir().unwrap();
    let meta = dir.path().join("meta.jsonl");
    let lines: Vec<String> = (1..=20)
        .map(|i| {
            if i == 17 {
                "{\"id\": \"P17\", \"title\": ".into()
            } else {
                format!("{{\"id\":\"P{i}\",\"title\":\"Phone {i}\"}}")
            }
        })
        .collect();
    fs::write(&meta, lines.join("\n")).unwrap();
    let reviews = dir.path().join("reviews.jsonl");
    fs::write(&reviews, "{\"id\":\"r1\",\"product_id\":\"P1\",\"text\":\"Fine.\"}\n").unwrap();

    let out = dir.path().join("out");
    let strict = salesdialog(&["ingest", "--strict", "--out", s(&out), "--meta", s(&meta), "--reviews", s(&reviews)]);
    assert_ne!(strict.status.code(), Some(0));
    assert!(stderr(&strict).contains("line 17"), "{}", stderr(&strict));

    let lenient = salesdialog(&["ingest", "--out", s(&out), "--meta", s(&meta), "--reviews", s(&reviews)]);
    assert!(lenient.status.success(), "{}", stderr(&lenient));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("ingest_report.json")).unwrap()).unwrap();
    assert_eq!(report["metadata"]["malformed"][0][0], 17);
    assert_eq!(report["metadata"]["accepted"], 19);
}

#[test]
fn help_documents_the_dataset_schema_version() {
    let o = salesdialog(&["--help"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("schema_version 1"), "{}", stdout(&o));
}

#[test]
fn generate_requires_an_explicit_seed() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = ingest_sample(dir.path());
    let o = salesdialog(&["generate", "--corpus", s(&corpus), "--out", s(&dir.path().join("g"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--seed"));
}

#[test]
fn generate_is_idempotent_and_stays_in_its_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = ingest_sample(dir.path());
    let before = files(dir.path());
    let out = dir.path().join("gen");
    let first = generate(&corpus, &out, "7");
    assert!(first.status.success(), "{}", stderr(&first));
    let snapshot: Vec<(String, Vec<u8>)> =
        files(&out).into_iter().map(|f| (f.clone(), fs::read(out.join(&f)).unwrap())).collect();
    let second = generate(&corpus, &out, "7");
    assert_eq!(first.status.code(), second.status.code());
    assert_eq!(first.stdout, second.stdout);
    for (f, bytes) in &snapshot {
        assert_eq!(&fs::read(out.join(f)).unwrap(), bytes, "{f} differs between runs");
    }
    let names: BTreeSet<String> = snapshot.iter().map(|(f, _)| f.clone()).collect();
    assert_eq!(names, BTreeSet::from(["dataset.jsonl".into(), "generation_report.json".into(), "index.jsonl".into()]));
    let after: BTreeSet<String> = files(dir.path()).into_iter().filter(|f| !f.starts_with("gen")).collect();
    assert_eq!(after, before);
}

#[test]
fn validate_exits_zero_when_clean_and_one_per_mutation() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = ingest_sample(dir.path());
    let out = dir.path().join("gen");
    assert!(generate(&corpus, &out, "11").status.success());
    let dataset = out.join("dataset.jsonl");
    let check = |path: &Path| {
        salesdialog(&["validate", "--corpus", s(&corpus), "--dataset", s(path), "--out", s(&dir.path().join("v"))])
    };

    let clean = check(&dataset);
    assert_eq!(clean.status.code(), Some(0), "{}", stdout(&clean));
    assert!(stdout(&clean).contains(", 0 violations"));

    let text = fs::read_to_string(&dataset).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let mut record: serde_json::Value = serde_json::from_str(&lines[0]).unwrap();
    let turn = record["turns"].as_array_mut().unwrap().iter_mut().rev().find(|t| t["stage"] == "evaluation").unwrap();
    turn["text"] = "I promise it is wonderful.".into();
    lines[0] = serde_json::to_string(&record).unwrap();
    let mutated = dir.path().join("mutated.jsonl");
    fs::write(&mutated, lines.join("\n") + "\n").unwrap();

    let dirty = check(&mutated);
    assert_eq!(dirty.status.code(), Some(1));
    let report = fs::read_to_string(dir.path().join("v/validation_report.jsonl")).unwrap();
    assert_eq!(report.lines().count(), 1);
    assert!(report.contains("\"grounding\""));
    assert!(stdout(&dirty).contains(", 1 violations"));
}

#[test]
fn stats_and_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = ingest_sample(dir.path());
    let out = dir.path().join("gen");
    let config = dir.path().join("run.toml");
    fs::write(&config, format!("corpus = {:?}\nseed = 5\nper_template = 4\ntop_k = 2\n", s(&corpus))).unwrap();
    let o = salesdialog(&["generate", "--config", s(&config), "--out", s(&out), "--per-template", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("generation_report.json")).unwrap()).unwrap();
    assert_eq!(report["settings"]["per_template"], 2);
    assert_eq!(report["settings"]["top_k"], 2);
    assert_eq!(report["settings"]["seed"], 5);

    let st = salesdialog(&["stats", "--dataset", s(&out.join("dataset.jsonl")), "--out", s(&dir.path().join("st"))]);
    assert!(st.status.success(), "{}", stderr(&st));
    let stats: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("st/stats.json")).unwrap()).unwrap();
    assert_eq!(stats["conversations"], 28);
    assert_eq!(stats["per_template"].as_object().unwrap().len(), 14);

    fs::write(&config, "seed = 5\ncolour = 1\n").unwrap();
    let bad = salesdialog(&["generate", "--config", s(&config), "--out", s(&out)]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(stderr(&bad).contains("run.toml"));
}
