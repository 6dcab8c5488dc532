use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use w2kpe::corpus::{load_corpus, load_predictions, write_jsonl, CorpusRecord};
use w2kpe::pipeline::{
    ablation_variants, encode_documents, encoded_dump, evaluate, format_comparison, predict_corpus,
    prepare_documents, train_and_score, train_corpus_with, RunConfig, TrainedModel,
};
use w2kpe::synth::{cross_sentence_corpus, discontinuous_corpus, overfit_corpus};

#[derive(Parser)]
#[command(name = "w2kpe", version, about = "Word-pair grid keyphrase extraction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment a corpus and print the fused segments (or the encoded grids).
    Preprocess(Common),
    /// Train a model on a gold-annotated corpus.
    Train(Common),
    /// Rank keyphrases for every document of a corpus.
    Predict(Common),
    /// Score prediction files (or run directories) against a gold corpus.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Prediction files, or directories containing predictions.jsonl.
        #[arg(required = true)]
        runs: Vec<PathBuf>,
    },
    /// Retrain with each component disabled in turn and print the comparison table.
    Ablate {
        #[command(flatten)]
        common: Common,
        /// Evaluation corpus (defaults to the training corpus).
        #[arg(long)]
        dev: Option<PathBuf>,
    },
    /// Write a synthetic corpus (train.jsonl, dev.jsonl, lexicon.txt, stopwords.txt).
    Synth {
        #[arg(long, value_enum, default_value_t = SynthKind::Overfit)]
        kind: SynthKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        train_docs: usize,
        #[arg(long, default_value_t = 30)]
        dev_docs: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    Overfit,
    CrossSentence,
    Discontinuous,
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long)]
    stopwords: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    max_segment_words: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Comma-separated cutoffs, e.g. "10,15,20".
    #[arg(long, value_delimiter = ',')]
    topk: Option<Vec<usize>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    disable_fusion: bool,
    #[arg(long)]
    disable_keyphrase_encoding: bool,
    #[arg(long)]
    disable_focal: bool,
    #[arg(long)]
    disable_scoring: bool,
    /// Emit encoded grids as JSON lines.
    #[arg(long)]
    dump_encoded: bool,
}

impl Common {
    fn run_config(&self) -> anyhow::Result<RunConfig> {
        let mut run = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let paths = &mut run.paths;
        for (slot, flag) in [
            (&mut paths.corpus, &self.corpus),
            (&mut paths.lexicon, &self.lexicon),
            (&mut paths.stopwords, &self.stopwords),
            (&mut paths.model, &self.model),
            (&mut paths.out, &self.out),
        ] {
            if flag.is_some() {
                slot.clone_from(flag);
            }
        }
        if let Some(v) = self.max_segment_words {
            run.preprocess.max_segment_words = v;
        }
        if let Some(v) = self.alpha {
            run.loss.alpha = v;
        }
        if let Some(v) = self.gamma {
            run.loss.gamma = v;
        }
        if let Some(v) = self.lr {
            run.train.learning_rate = v;
        }
        if let Some(v) = self.batch_size {
            run.train.batch_size = v;
        }
        if let Some(v) = self.epochs {
            run.train.epochs = v;
        }
        if let Some(v) = &self.topk {
            run.eval.k_values.clone_from(v);
        }
        if let Some(v) = self.seed {
            run.seed = v;
        }
        run.ablation.disable_fusion |= self.disable_fusion;
        run.ablation.disable_keyphrase_encoding |= self.disable_keyphrase_encoding;
        run.ablation.disable_focal |= self.disable_focal;
        run.ablation.disable_scoring |= self.disable_scoring;
        run.validate()?;
        Ok(run)
    }
}

fn required<'a>(path: &'a Option<PathBuf>, flag: &str) -> anyhow::Result<&'a Path> {
    match path {
        Some(p) => Ok(p),
        None => bail!(UsageError(format!("missing {flag}"))),
    }
}

#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn corpus(run: &RunConfig) -> anyhow::Result<Vec<CorpusRecord>> {
    Ok(load_corpus(required(&run.paths.corpus, "--corpus")?)?)
}

/// Write JSON lines to `out`, or stdout when unset.
fn emit<T: Serialize>(out: Option<&Path>, records: &[T]) -> anyhow::Result<()> {
    match out {
        Some(p) => Ok(write_jsonl(p, records)?),
        None => {
            let mut stdout = io::stdout().lock();
            for r in records {
                serde_json::to_writer(&mut stdout, r)?;
                writeln!(stdout)?;
            }
            Ok(())
        }
    }
}

fn preprocess(common: &Common) -> anyhow::Result<()> {
    let run = common.run_config()?;
    let pre = run.preprocess_config()?;
    let records = corpus(&run)?;
    let docs = prepare_documents(&records, &run, &pre);
    if common.dump_encoded {
        let encoded = encode_documents(&docs, &run.effective_encoding())?;
        return emit(run.paths.out.as_deref(), &encoded_dump(&encoded));
    }
    let lines: Vec<serde_json::Value> = docs
        .iter()
        .flat_map(|d| {
            d.segments
                .iter()
                .map(|s| serde_json::json!({"doc_id": d.doc_id, "tokens": s.surfaces()}))
        })
        .collect();
    emit(run.paths.out.as_deref(), &lines)
}

fn train(common: &Common) -> anyhow::Result<()> {
    let run = common.run_config()?;
    let model_path = required(&run.paths.model, "--model")?;
    let pre = run.preprocess_config()?;
    let records = corpus(&run)?;
    if common.dump_encoded {
        let docs = prepare_documents(&records, &run, &pre);
        let encoded = encode_documents(&docs, &run.effective_encoding())?;
        let mut name = model_path.as_os_str().to_owned();
        name.push(".encoded.jsonl");
        write_jsonl(Path::new(&name), &encoded_dump(&encoded))?;
    }
    let trained = train_corpus_with(&records, &run, &pre, |epoch, loss| {
        eprintln!("epoch {:>4}  loss {loss:.6}", epoch + 1);
    })?;
    trained.model.save(model_path)?;
    eprintln!(
        "trained on {} segments ({} appearances); wrote {}",
        trained.segment_count,
        trained.appearance_count,
        model_path.display()
    );
    Ok(())
}

fn predict(common: &Common) -> anyhow::Result<()> {
    let run = common.run_config()?;
    let model = TrainedModel::load(required(&run.paths.model, "--model")?)?;
    let pre = run.preprocess_config()?;
    let records = corpus(&run)?;
    let preds = predict_corpus(&model, &records, &run, &pre)?;
    emit(run.paths.out.as_deref(), &preds)
}

fn prediction_file(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join("predictions.jsonl")
    } else {
        path.to_path_buf()
    }
}

fn eval(common: &Common, runs: &[PathBuf]) -> anyhow::Result<()> {
    let run = common.run_config()?;
    let gold = corpus(&run)?;
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for r in runs {
        let file = prediction_file(r);
        let preds = load_predictions(&file)?;
        let report = evaluate(&preds, &gold, &run.eval)?;
        rows.push((r.display().to_string(), report.overall));
        reports.push(serde_json::json!({"run": r, "report": report}));
    }
    if let Some(out) = &run.paths.out {
        let text = serde_json::to_string_pretty(&reports)?;
        fs::write(out, text).with_context(|| format!("writing {}", out.display()))?;
    }
    for (name, score) in &rows {
        println!("{name}: overall {score:.2}");
    }
    if rows.len() > 1 {
        print!("{}", format_comparison(&rows));
    }
    Ok(())
}

fn ablate(common: &Common, dev: Option<&Path>) -> anyhow::Result<()> {
    let base = common.run_config()?;
    let pre = base.preprocess_config()?;
    let train = corpus(&base)?;
    let dev = match dev {
        Some(p) => load_corpus(p)?,
        None => train.clone(),
    };
    let mut rows = Vec::new();
    for (name, run) in ablation_variants(&base) {
        let (_, report) = train_and_score(&train, &dev, &run, &pre)?;
        eprintln!("{name}: {:.2}", report.overall);
        rows.push((name, report.overall));
    }
    print!("{}", format_comparison(&rows));
    Ok(())
}

fn synth(kind: SynthKind, seed: u64, train_docs: usize, dev_docs: usize, out: &Path) -> anyhow::Result<()> {
    let corpus = match kind {
        SynthKind::Overfit => overfit_corpus(seed, train_docs),
        SynthKind::CrossSentence => cross_sentence_corpus(seed, train_docs, dev_docs),
        SynthKind::Discontinuous => discontinuous_corpus(seed, train_docs, dev_docs),
    };
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_jsonl(&out.join("train.jsonl"), &corpus.train)?;
    write_jsonl(&out.join("dev.jsonl"), &corpus.dev)?;
    fs::write(out.join("lexicon.txt"), corpus.lexicon_text())?;
    fs::write(out.join("stopwords.txt"), corpus.stopwords_text())?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Preprocess(c) => preprocess(&c),
        Command::Train(c) => train(&c),
        Command::Predict(c) => predict(&c),
        Command::Eval { common, runs } => eval(&common, &runs),
        Command::Ablate { common, dev } => ablate(&common, dev.as_deref()),
        Command::Synth {
            kind,
            seed,
            train_docs,
            dev_docs,
            out,
        } => synth(kind, seed, train_docs, dev_docs, &out),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 1;
    }
    match err.downcast_ref::<w2kpe::Error>() {
        Some(w2kpe::Error::InvalidConfig(_)) => 1,
        Some(e) if !e.is_data_error() => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<io::Error>().is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe) => {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
