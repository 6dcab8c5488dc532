use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use w2kpe::corpus::{load_corpus, load_predictions, write_jsonl, PredictionRecord, ScoredKeyphrase};
use w2kpe::pipeline::{vocab_path, TrainedModel};

fn w2kpe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_w2kpe"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = w2kpe(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

struct Data {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Data {
    fn new(kind: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        ok(&[
            "synth", "--kind", kind, "--seed", "1", "--train-docs", "6", "--dev-docs", "3", "--out",
            root.to_str().unwrap(),
        ]);
        Data { _dir: dir, root }
    }

    fn path(&self, name: &str) -> String {
        self.root.join(name).to_string_lossy().into_owned()
    }

    fn common(&self) -> Vec<String> {
        vec![
            "--corpus".into(),
            self.path("train.jsonl"),
            "--lexicon".into(),
            self.path("lexicon.txt"),
            "--stopwords".into(),
            self.path("stopwords.txt"),
        ]
    }
}

fn with<'a>(head: &[&'a str], tail: &'a [String]) -> Vec<&'a str> {
    let mut v = head.to_vec();
    v.extend(tail.iter().map(String::as_str));
    v
}

#[test]
fn disable_fusion_gives_one_segment_per_sentence() {
    let data = Data::new("cross-sentence");
    let common = data.common();
    let fused = ok(&with(&["preprocess"], &common));
    let split = ok(&with(&["preprocess", "--disable-fusion"], &common));
    let sentences: usize = load_corpus(Path::new(&data.path("train.jsonl")))
        .unwrap()
        .iter()
        .map(|r| r.sentences.len())
        .sum();
    assert_eq!(split.lines().count(), sentences);
    assert_eq!(fused.lines().count(), 6);
}

#[test]
fn dump_encoded_lists_grids() {
    let data = Data::new("overfit");
    let out = ok(&with(&["preprocess", "--dump-encoded"], &data.common()));
    let first: serde_json::Value = serde_json::from_str(out.lines().next().unwrap()).unwrap();
    assert!(first["appearances"].as_array().is_some_and(|a| !a.is_empty()));
    assert!(first["thw"].as_array().is_some_and(|a| !a.is_empty()));
}

#[test]
fn train_predict_eval_round_trip() {
    let data = Data::new("overfit");
    let common = data.common();
    let model = data.path("model.bin");
    ok(&with(&["train", "--epochs", "3", "--model", &model], &common));
    let loaded = TrainedModel::load(Path::new(&model)).unwrap();
    assert_eq!(loaded.config.vocab_size as usize, loaded.vocab.len());

    let run_a = data.root.join("run-a");
    fs::create_dir(&run_a).unwrap();
    let preds = run_a.join("predictions.jsonl");
    ok(&with(&["predict", "--model", &model, "--topk", "5", "--out", preds.to_str().unwrap()], &common));
    let records = load_predictions(&preds).unwrap();
    assert_eq!(records.len(), 6);
    assert!(records.iter().all(|r| r.keyphrases.len() <= 5));

    // a perfect run built from the gold keyphrases
    let gold = load_corpus(Path::new(&data.path("train.jsonl"))).unwrap();
    let perfect: Vec<PredictionRecord> = gold
        .iter()
        .map(|r| PredictionRecord {
            doc_id: r.doc_id.clone(),
            keyphrases: r
                .gold()
                .unwrap()
                .iter()
                .map(|k| ScoredKeyphrase {
                    surface: k.clone(),
                    score: 1.0,
                })
                .collect(),
        })
        .collect();
    let run_b = data.root.join("run-b");
    fs::create_dir(&run_b).unwrap();
    write_jsonl(&run_b.join("predictions.jsonl"), &perfect).unwrap();

    let report = data.path("report.json");
    let table = ok(&with(
        &["eval", run_b.to_str().unwrap(), run_a.to_str().unwrap(), "--out", &report],
        &common,
    ));
    assert!(table.contains("overall 100.00"), "{table}");
    assert!(table.contains("Experimental Config"));
    assert!(table.contains("(-"), "{table}");
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json[0]["report"]["overall"], 100.0);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let data = Data::new("overfit");
    let config = data.root.join("run.toml");
    fs::write(
        &config,
        format!(
            "seed = 4\n[train]\nepochs = 50\n[paths]\ncorpus = {:?}\nlexicon = {:?}\nstopwords = {:?}\n",
            data.path("train.jsonl"),
            data.path("lexicon.txt"),
            data.path("stopwords.txt")
        ),
    )
    .unwrap();
    let model = data.path("m.bin");
    let out = w2kpe(&["train", "--config", config.to_str().unwrap(), "--epochs", "2", "--model", &model]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let log = String::from_utf8_lossy(&out.stderr);
    assert!(log.contains("epoch    2"));
    assert!(!log.contains("epoch    3"));
}

#[test]
fn empty_corpus_predicts_nothing() {
    let data = Data::new("overfit");
    let model = data.path("model.bin");
    ok(&with(&["train", "--epochs", "1", "--model", &model], &data.common()));
    let empty = data.path("empty.jsonl");
    fs::write(&empty, "").unwrap();
    let out = ok(&["predict", "--model", &model, "--corpus", &empty]);
    assert!(out.is_empty());
}

#[test]
fn vocabulary_mismatch_names_the_document() {
    let data = Data::new("overfit");
    let model = data.path("model.bin");
    ok(&with(&["train", "--epochs", "1", "--model", &model], &data.common()));
    // a sidecar listing more tokens than the model was built for
    let sidecar = vocab_path(Path::new(&model));
    let mut vocab = fs::read_to_string(&sidecar).unwrap();
    vocab.push_str("新词\n");
    fs::write(&sidecar, vocab).unwrap();
    let corpus = data.path("new.jsonl");
    fs::write(&corpus, "{\"doc_id\":\"doc-x\",\"sentences\":[\"新词\"]}\n").unwrap();
    let lexicon = data.root.join("lex2.txt");
    fs::write(&lexicon, "新词\n").unwrap();
    let out = w2kpe(&["predict", "--model", &model, "--corpus", &corpus, "--lexicon", lexicon.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("doc-x") && err.contains("vocabulary"), "{err}");
}

#[test]
fn eval_without_gold_names_the_document() {
    let data = Data::new("overfit");
    let corpus = data.path("nogold.jsonl");
    fs::write(&corpus, "{\"doc_id\":\"bare\",\"sentences\":[\"x\"]}\n").unwrap();
    let preds = data.path("p.jsonl");
    fs::write(&preds, "{\"doc_id\":\"bare\",\"keyphrases\":[]}\n").unwrap();
    let out = w2kpe(&["eval", &preds, "--corpus", &corpus]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bare"));
}

#[test]
fn exit_codes() {
    assert_eq!(w2kpe(&["train", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(w2kpe(&["train"]).status.code(), Some(1));
    assert_eq!(w2kpe(&["train", "--model", "m.bin", "--alpha", "2"]).status.code(), Some(1));
    let out = w2kpe(&["predict", "--model", "/nonexistent/model.bin", "--corpus", "/nonexistent/c.jsonl"]);
    assert_eq!(out.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.jsonl");
    fs::write(&bad, "{\"doc_id\":\"a\",\"sentences\":[\"x\"]}\n{\"doc_id\":\"b\",\"sentences\":[\"y\"]}\nnot json\n").unwrap();
    let out = w2kpe(&["preprocess", "--corpus", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}
