//! Synthetic meeting-style corpora with planted keyphrases.
//!
//! Words are two-character strings with distinct characters, so a lexicon
//! of all words segments generated text unambiguously. Sentences are
//! sprinkled with stop words, some of them stuttered, which preprocessing
//! removes again.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::CorpusRecord;
use crate::preprocess::{Lexicon, PreprocessConfig, StopWords};
use crate::seed::{derive_seed, rng_from_seed};

pub const STOPWORDS: [&str; 5] = ["嗯", "啊", "吧", "呢", "哦"];

/// Word `i` of the synthetic inventory.
pub fn word(i: usize) -> String {
    let base = 0x4E00 + 2 * i as u32;
    [base, base + 1]
        .iter()
        .map(|&c| char::from_u32(c).expect("CJK range"))
        .collect()
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub train: Vec<CorpusRecord>,
    pub dev: Vec<CorpusRecord>,
    pub lexicon: Vec<String>,
    pub stopwords: Vec<String>,
}

impl SyntheticCorpus {
    pub fn preprocess_config(&self) -> PreprocessConfig {
        PreprocessConfig {
            lexicon: self.lexicon.iter().cloned().collect::<Lexicon>(),
            stopwords: self.stopwords.iter().cloned().collect::<StopWords>(),
            ..Default::default()
        }
    }

    pub fn lexicon_text(&self) -> String {
        lines(&self.lexicon)
    }

    pub fn stopwords_text(&self) -> String {
        lines(&self.stopwords)
    }
}

fn lines(items: &[String]) -> String {
    let mut s = String::new();
    for i in items {
        s.push_str(i);
        s.push('\n');
    }
    s
}

/// Phrase pool and filler words, all token-disjoint.
struct Inventory {
    phrases: Vec<Vec<usize>>,
    fillers: Vec<usize>,
    marker: usize,
    size: usize,
}

impl Inventory {
    fn new(rng: &mut ChaCha8Rng, phrase_count: usize, lengths: &[usize], filler_count: usize) -> Self {
        let mut next = 0;
        let phrases = (0..phrase_count)
            .map(|_| {
                let len = *lengths.choose(rng).expect("lengths nonempty");
                let p = (next..next + len).collect();
                next += len;
                p
            })
            .collect();
        let fillers = (next..next + filler_count).collect();
        next += filler_count;
        let marker = next;
        Inventory {
            phrases,
            fillers,
            marker,
            size: next + 1,
        }
    }

    fn lexicon(&self) -> Vec<String> {
        (0..self.size).map(word).collect()
    }

    fn surface(&self, phrase: usize) -> String {
        self.phrases[phrase].iter().map(|&w| word(w)).collect()
    }

    fn fillers(&self, rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
        (0..n)
            .map(|_| *self.fillers.choose(rng).expect("fillers nonempty"))
            .collect()
    }
}

/// Render word ids as a sentence, inserting occasional (stuttered) stop words.
fn render(rng: &mut ChaCha8Rng, words: &[usize]) -> String {
    let mut s = String::new();
    for &w in words {
        if rng.gen_bool(0.12) {
            let stop = STOPWORDS.choose(rng).expect("stopwords");
            let reps = if rng.gen_bool(0.5) { 1 } else { rng.gen_range(3..=4) };
            for _ in 0..reps {
                s.push_str(stop);
            }
        }
        s.push_str(&word(w));
    }
    s
}

/// A planted phrase occurrence: all tokens, or with one filler between two
/// adjacent tokens.
fn occurrence(rng: &mut ChaCha8Rng, inv: &Inventory, phrase: &[usize], gapped: bool) -> Vec<usize> {
    let mut out = phrase.to_vec();
    if gapped && phrase.len() >= 2 {
        let at = rng.gen_range(1..phrase.len());
        out.insert(at, inv.fillers(rng, 1)[0]);
    }
    out
}

fn wrap(rng: &mut ChaCha8Rng, inv: &Inventory, core: Vec<usize>, before: (usize, usize), after: (usize, usize)) -> Vec<usize> {
    let b = rng.gen_range(before.0..=before.1);
    let a = rng.gen_range(after.0..=after.1);
    let mut s = inv.fillers(rng, b);
    s.extend(core);
    s.extend(inv.fillers(rng, a));
    s
}

fn corpus(inv: &Inventory, train: Vec<CorpusRecord>, dev: Vec<CorpusRecord>) -> SyntheticCorpus {
    SyntheticCorpus {
        train,
        dev,
        lexicon: inv.lexicon(),
        stopwords: STOPWORDS.iter().map(|s| s.to_string()).collect(),
    }
}

/// Corpus for memorization: 2-5 planted keyphrases per document, each
/// appearing 2-3 times, some with one intervening word; about one document
/// in five also carries a partial appearance of a 3-4 word keyphrase.
/// `dev` is empty.
pub fn overfit_corpus(seed: u64, docs: usize) -> SyntheticCorpus {
    let mut rng = rng_from_seed(derive_seed(seed, "overfit"));
    let inv = Inventory::new(&mut rng, 30, &[2, 2, 3, 4], 90);
    let mut records = Vec::with_capacity(docs);
    for d in 0..docs {
        let count = rng.gen_range(2..=5);
        let mut pool: Vec<usize> = (0..inv.phrases.len()).collect();
        pool.shuffle(&mut rng);
        let chosen = &pool[..count];
        let mut sentences: Vec<Vec<usize>> = Vec::new();
        for &p in chosen {
            for _ in 0..rng.gen_range(2..=3) {
                let gapped = rng.gen_bool(0.3);
                let core = occurrence(&mut rng, &inv, &inv.phrases[p], gapped);
                sentences.push(wrap(&mut rng, &inv, core, (1, 4), (1, 4)));
            }
        }
        if rng.gen_bool(0.2) {
            if let Some(&p) = chosen.iter().find(|&&p| inv.phrases[p].len() >= 3) {
                let mut partial = inv.phrases[p].clone();
                let drop = rng.gen_range(0..partial.len());
                partial.remove(drop);
                sentences.push(wrap(&mut rng, &inv, partial, (1, 4), (1, 4)));
            }
        }
        for _ in 0..rng.gen_range(1..=2) {
            let n = rng.gen_range(3..=6);
            sentences.push(inv.fillers(&mut rng, n));
        }
        sentences.shuffle(&mut rng);
        records.push(CorpusRecord {
            doc_id: format!("overfit-{d:03}"),
            sentences: sentences.iter().map(|s| render(&mut rng, s)).collect(),
            keyphrases: Some(chosen.iter().map(|&p| inv.surface(p)).collect()),
        });
    }
    corpus(&inv, records, Vec::new())
}

/// Corpus where a phrase is a keyphrase only when the preceding sentence
/// ends with a marker word. Each document holds gold phrases preceded by
/// the marker and distractor phrases from the same pool preceded by plain
/// filler sentences, so a single sentence cannot tell them apart.
pub fn cross_sentence_corpus(seed: u64, train_docs: usize, dev_docs: usize) -> SyntheticCorpus {
    let mut rng = rng_from_seed(derive_seed(seed, "cross-sentence"));
    let inv = Inventory::new(&mut rng, 16, &[2], 40);
    let make = |prefix: &str, n: usize, rng: &mut ChaCha8Rng| -> Vec<CorpusRecord> {
        (0..n)
            .map(|d| {
                let mut pool: Vec<usize> = (0..inv.phrases.len()).collect();
                pool.shuffle(rng);
                let gold_count = rng.gen_range(2..=3);
                let distractor_count = rng.gen_range(2..=3);
                let gold = &pool[..gold_count];
                let distractors = &pool[gold_count..gold_count + distractor_count];
                let mut blocks: Vec<[Vec<usize>; 2]> = Vec::new();
                for (&p, is_gold) in gold.iter().map(|p| (p, true)).chain(distractors.iter().map(|p| (p, false))) {
                    let n = rng.gen_range(2..=3);
                    let mut lead = inv.fillers(rng, n);
                    if is_gold {
                        lead.push(inv.marker);
                    } else {
                        lead.push(inv.fillers(rng, 1)[0]);
                    }
                    let mut body = inv.phrases[p].clone();
                    let n = rng.gen_range(1..=2);
                    body.extend(inv.fillers(rng, n));
                    blocks.push([lead, body]);
                }
                blocks.shuffle(rng);
                CorpusRecord {
                    doc_id: format!("{prefix}-{d:03}"),
                    sentences: blocks.iter().flatten().map(|s| render(rng, s)).collect(),
                    keyphrases: Some(gold.iter().map(|&p| inv.surface(p)).collect()),
                }
            })
            .collect()
    };
    let mut train_rng = rng_from_seed(derive_seed(seed, "train-docs"));
    let mut dev_rng = rng_from_seed(derive_seed(seed, "dev-docs"));
    let train = make("xs-train", train_docs, &mut train_rng);
    let dev = make("xs-dev", dev_docs, &mut dev_rng);
    corpus(&inv, train, dev)
}

/// Corpus where about half of all keyphrase appearances have one
/// intervening word, and each keyphrase appears only 1-2 times per document.
pub fn discontinuous_corpus(seed: u64, train_docs: usize, dev_docs: usize) -> SyntheticCorpus {
    let mut rng = rng_from_seed(derive_seed(seed, "discontinuous"));
    let inv = Inventory::new(&mut rng, 20, &[2, 3], 50);
    let make = |prefix: &str, n: usize, rng: &mut ChaCha8Rng| -> Vec<CorpusRecord> {
        (0..n)
            .map(|d| {
                let mut pool: Vec<usize> = (0..inv.phrases.len()).collect();
                pool.shuffle(rng);
                let gold = &pool[..rng.gen_range(2..=4)];
                let mut sentences = Vec::new();
                for &p in gold {
                    for _ in 0..rng.gen_range(1..=2) {
                        let gapped = rng.gen_bool(0.5);
                        let core = occurrence(rng, &inv, &inv.phrases[p], gapped);
                        sentences.push(wrap(rng, &inv, core, (1, 3), (1, 3)));
                    }
                }
                let n = rng.gen_range(3..=5);
                sentences.push(inv.fillers(rng, n));
                sentences.shuffle(rng);
                CorpusRecord {
                    doc_id: format!("{prefix}-{d:03}"),
                    sentences: sentences.iter().map(|s| render(rng, s)).collect(),
                    keyphrases: Some(gold.iter().map(|&p| inv.surface(p)).collect()),
                }
            })
            .collect()
    };
    let mut train_rng = rng_from_seed(derive_seed(seed, "train-docs"));
    let mut dev_rng = rng_from_seed(derive_seed(seed, "dev-docs"));
    let train = make("dc-train", train_docs, &mut train_rng);
    let dev = make("dc-dev", dev_docs, &mut dev_rng);
    corpus(&inv, train, dev)
}
