//! End-to-end orchestration shared by the CLI and the tests: preprocess,
//! encode, train, predict, evaluate and the ablation harness.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::corpus::{CorpusRecord, PredictionRecord, ScoredKeyphrase};
use crate::decode::{aggregate_scores, decode_grid, rank_all, DecodeConfig};
use crate::encoding::{encode_segment, EncodedSegment, EncodingConfig, GridLabel};
use crate::error::{Error, Result};
use crate::metrics::{overall_score, DocumentEval, EvalConfig, EvalReport};
use crate::model::{
    forward, init_params, load_model, save_model, train_with, LossConfig, ModelConfig, Parameters, TrainConfig, TrainingExample,
    Vocabulary,
};
use crate::preprocess::{
    keyphrase_tokens, preprocess_document, Lexicon, PreprocessConfig, Segment, StopWords,
    DEFAULT_MAX_SEGMENT_WORDS, DEFAULT_STUTTER_MIN_RUN,
};
use crate::seed::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessSettings {
    pub max_segment_words: usize,
    pub stutter_min_run: usize,
}

impl Default for PreprocessSettings {
    fn default() -> Self {
        Self {
            max_segment_words: DEFAULT_MAX_SEGMENT_WORDS,
            stutter_min_run: DEFAULT_STUTTER_MIN_RUN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSettings {
    pub embed_dim: u64,
    pub hidden_dim: u64,
    pub encoder_depth: u64,
    pub distance_buckets: u64,
}

impl Default for ModelSettings {
    fn default() -> Self {
        let d = ModelConfig::new(1, 0);
        Self {
            embed_dim: d.embed_dim,
            hidden_dim: d.hidden_dim,
            encoder_depth: d.encoder_depth,
            distance_buckets: d.distance_buckets,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSettings {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub grad_clip: f64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self {
            learning_rate: d.learning_rate,
            batch_size: d.batch_size,
            epochs: d.epochs,
            grad_clip: d.grad_clip,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

/// Component switches mirroring the ablation rows.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Ablation {
    /// Every sentence becomes its own segment.
    pub disable_fusion: bool,
    /// Only full contiguous appearances are encoded.
    pub disable_keyphrase_encoding: bool,
    /// `gamma = 0`, i.e. plain cross-entropy.
    pub disable_focal: bool,
    /// `alpha = 1`: the score head gets no supervision.
    pub disable_scoring: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub preprocess: PreprocessSettings,
    pub encoding: EncodingConfig,
    pub model: ModelSettings,
    pub loss: LossConfig,
    pub train: TrainSettings,
    pub decode: DecodeConfig,
    pub eval: EvalConfig,
    pub paths: Paths,
    pub ablation: Ablation,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn fuse(&self) -> bool {
        !self.ablation.disable_fusion
    }

    pub fn effective_encoding(&self) -> EncodingConfig {
        if self.ablation.disable_keyphrase_encoding {
            EncodingConfig::contiguous_only()
        } else {
            self.encoding
        }
    }

    pub fn effective_loss(&self) -> LossConfig {
        let mut loss = self.loss;
        if self.ablation.disable_focal {
            loss.gamma = 0.0;
        }
        if self.ablation.disable_scoring {
            loss.alpha = 1.0;
        }
        loss
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.train.learning_rate,
            batch_size: self.train.batch_size,
            epochs: self.train.epochs,
            seed: derive_seed(self.seed, "train"),
            grad_clip: self.train.grad_clip,
        }
    }

    pub fn model_config(&self, vocab_size: usize) -> ModelConfig {
        ModelConfig {
            vocab_size: vocab_size as u64,
            embed_dim: self.model.embed_dim,
            hidden_dim: self.model.hidden_dim,
            encoder_depth: self.model.encoder_depth,
            distance_buckets: self.model.distance_buckets,
            seed: derive_seed(self.seed, "init"),
        }
    }

    /// Build the preprocessing config, reading lexicon and stop-word files
    /// when configured.
    pub fn preprocess_config(&self) -> Result<PreprocessConfig> {
        let lexicon = match &self.paths.lexicon {
            Some(p) => Lexicon::load(p)?,
            None => Lexicon::default(),
        };
        let stopwords = match &self.paths.stopwords {
            Some(p) => StopWords::load(p)?,
            None => StopWords::default(),
        };
        let cfg = PreprocessConfig {
            max_segment_words: self.preprocess.max_segment_words,
            stopwords,
            lexicon,
            stutter_min_run: self.preprocess.stutter_min_run,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.encoding.validate()?;
        self.effective_loss().validate()?;
        self.train_config().validate()?;
        self.decode.validate()?;
        self.eval.validate()?;
        self.model_config(1).validate()
    }
}

/// A document after preprocessing, with its gold keyphrases tokenized.
#[derive(Debug, Clone)]
pub struct PreparedDocument {
    pub doc_id: String,
    pub segments: Vec<Segment>,
    pub gold: Option<Vec<(String, Vec<String>)>>,
}

pub fn prepare_documents(records: &[CorpusRecord], run: &RunConfig, pre: &PreprocessConfig) -> Vec<PreparedDocument> {
    records
        .iter()
        .map(|r| PreparedDocument {
            doc_id: r.doc_id.clone(),
            segments: preprocess_document(&r.doc_id, &r.sentences, pre, run.fuse()),
            gold: r.keyphrases.as_ref().map(|kps| {
                kps.iter()
                    .map(|k| (k.clone(), keyphrase_tokens(k, pre)))
                    .filter(|(_, toks)| !toks.is_empty())
                    .collect()
            }),
        })
        .collect()
}

pub fn encode_documents(docs: &[PreparedDocument], cfg: &EncodingConfig) -> Result<Vec<EncodedSegment>> {
    let mut out = Vec::new();
    for d in docs {
        let gold = d.gold.as_ref().ok_or_else(|| Error::MissingGold(d.doc_id.clone()))?;
        for seg in &d.segments {
            out.push(encode_segment(seg.clone(), gold, cfg));
        }
    }
    Ok(out)
}

/// Debug dump of encoded segments, one JSON value per segment.
pub fn encoded_dump(encoded: &[EncodedSegment]) -> Vec<serde_json::Value> {
    encoded
        .iter()
        .map(|e| {
            let thw: Vec<_> = e
                .score_targets
                .iter()
                .map(|(&(t, h), &y)| json!({"tail": t, "head": h, "target": y}))
                .collect();
            json!({
                "doc_id": e.segment.source_doc,
                "tokens": e.segment.surfaces(),
                "appearances": e.appearances,
                "nnw": e.labels.positions(GridLabel::Nnw),
                "thw": thw,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub config: ModelConfig,
    pub params: Parameters,
    pub vocab: Vocabulary,
}

/// Vocabulary sidecar path: `<model>.vocab`.
pub fn vocab_path(model_path: &Path) -> PathBuf {
    let mut name = model_path.as_os_str().to_owned();
    name.push(".vocab");
    PathBuf::from(name)
}

impl TrainedModel {
    /// Write the model file and its vocabulary sidecar.
    pub fn save(&self, path: &Path) -> Result<()> {
        save_model(&self.params, &self.config, path)?;
        self.vocab.save(&vocab_path(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (params, config) = load_model(path)?;
        let vocab = Vocabulary::load(&vocab_path(path))?;
        Ok(TrainedModel { config, params, vocab })
    }
}

#[derive(Debug, Clone)]
pub struct TrainingRun {
    pub model: TrainedModel,
    pub epoch_losses: Vec<f64>,
    pub segment_count: usize,
    pub appearance_count: usize,
}

pub fn training_examples(encoded: &[EncodedSegment], vocab: &Vocabulary) -> Vec<TrainingExample> {
    encoded
        .iter()
        .map(|e| TrainingExample {
            ids: vocab.ids(e.segment.tokens.iter().map(|t| t.surface.as_str())),
            labels: e.labels.clone(),
            targets: e.score_targets.clone(),
        })
        .collect()
}

pub fn train_corpus(records: &[CorpusRecord], run: &RunConfig, pre: &PreprocessConfig) -> Result<TrainingRun> {
    train_corpus_with(records, run, pre, |_, _| {})
}

pub fn train_corpus_with(
    records: &[CorpusRecord],
    run: &RunConfig,
    pre: &PreprocessConfig,
    on_epoch: impl FnMut(usize, f64),
) -> Result<TrainingRun> {
    run.validate()?;
    let docs = prepare_documents(records, run, pre);
    let encoded = encode_documents(&docs, &run.effective_encoding())?;
    if encoded.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let vocab = Vocabulary::build(
        encoded
            .iter()
            .flat_map(|e| e.segment.tokens.iter().map(|t| t.surface.as_str())),
    );
    let config = run.model_config(vocab.len());
    let examples = training_examples(&encoded, &vocab);
    let init = init_params(&config)?;
    let outcome = train_with(
        &config,
        init,
        &examples,
        &run.train_config(),
        &run.effective_loss(),
        on_epoch,
    )?;
    Ok(TrainingRun {
        model: TrainedModel {
            config,
            params: outcome.params,
            vocab,
        },
        epoch_losses: outcome.epoch_losses,
        segment_count: encoded.len(),
        appearance_count: encoded.iter().map(|e| e.appearances.len()).sum(),
    })
}

fn predict_document(model: &TrainedModel, doc: &PreparedDocument, run: &RunConfig, top: usize) -> Result<PredictionRecord> {
    let mut per_segment = Vec::with_capacity(doc.segments.len());
    for seg in &doc.segments {
        let ids = model.vocab.ids(seg.tokens.iter().map(|t| t.surface.as_str()));
        let pred = forward(&model.config, &model.params, &ids)?;
        per_segment.push(decode_grid(&pred, seg, &run.decode)?);
    }
    let ranked = rank_all(&aggregate_scores(&per_segment));
    Ok(PredictionRecord {
        doc_id: doc.doc_id.clone(),
        keyphrases: ranked
            .into_iter()
            .take(top)
            .map(|r| ScoredKeyphrase {
                surface: r.surface,
                score: r.total_score,
            })
            .collect(),
    })
}

/// Ranked keyphrases per document, truncated to the largest configured k.
/// Documents are processed in parallel and returned in input order.
pub fn predict_corpus(
    model: &TrainedModel,
    records: &[CorpusRecord],
    run: &RunConfig,
    pre: &PreprocessConfig,
) -> Result<Vec<PredictionRecord>> {
    let docs = prepare_documents(records, run, pre);
    let top = run.eval.max_k();
    docs.par_iter()
        .map(|d| predict_document(model, d, run, top).map_err(|e| e.in_doc(&d.doc_id)))
        .collect()
}

/// Score predictions against the gold keyphrases of `gold_records`.
/// Gold documents without a prediction count as empty predictions.
pub fn evaluate(predictions: &[PredictionRecord], gold_records: &[CorpusRecord], cfg: &EvalConfig) -> Result<EvalReport> {
    let docs: Vec<DocumentEval> = gold_records
        .iter()
        .map(|r| {
            let gold = r.gold()?.to_vec();
            let predictions = predictions
                .iter()
                .find(|p| p.doc_id == r.doc_id)
                .map(PredictionRecord::surfaces)
                .unwrap_or_default();
            Ok(DocumentEval {
                doc_id: r.doc_id.clone(),
                predictions,
                gold,
            })
        })
        .collect::<Result<_>>()?;
    overall_score(&docs, cfg)
}

/// Train on `train`, predict and score on `eval`.
pub fn train_and_score(
    train: &[CorpusRecord],
    eval: &[CorpusRecord],
    run: &RunConfig,
    pre: &PreprocessConfig,
) -> Result<(TrainingRun, EvalReport)> {
    let trained = train_corpus(train, run, pre)?;
    let preds = predict_corpus(&trained.model, eval, run, pre)?;
    let report = evaluate(&preds, eval, &run.eval)?;
    Ok((trained, report))
}

/// The full system followed by one row per disabled component.
pub fn ablation_variants(base: &RunConfig) -> Vec<(String, RunConfig)> {
    let with = |f: fn(&mut Ablation)| {
        let mut r = base.clone();
        f(&mut r.ablation);
        r
    };
    vec![
        ("W2KPE".to_string(), base.clone()),
        ("- Sentence Fusion".to_string(), with(|a| a.disable_fusion = true)),
        ("- Keyphrase Encoding".to_string(), with(|a| a.disable_keyphrase_encoding = true)),
        ("- Focal Loss".to_string(), with(|a| a.disable_focal = true)),
        ("- Keyphrase Scoring".to_string(), with(|a| a.disable_scoring = true)),
    ]
}

/// Two-column comparison table; rows after the first show the delta
/// against the first, e.g. `41.83(-5.86)`.
pub fn format_comparison(rows: &[(String, f64)]) -> String {
    let width = rows
        .iter()
        .map(|(n, _)| n.chars().count() + 2)
        .max()
        .unwrap_or(0)
        .max("Experimental Config".len());
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$}  Score", "Experimental Config");
    let _ = writeln!(out, "{}", "-".repeat(width + 16));
    let Some((_, reference)) = rows.first() else {
        return out;
    };
    for (i, (name, score)) in rows.iter().enumerate() {
        if i == 0 {
            let _ = writeln!(out, "{name:<width$}  {score:.2}");
        } else {
            let label = format!("  {name}");
            let _ = writeln!(out, "{label:<width$}  {}", format_delta(*score, *reference));
        }
    }
    out
}

pub fn format_delta(score: f64, reference: f64) -> String {
    format!("{score:.2}({:+.2})", score - reference)
}
