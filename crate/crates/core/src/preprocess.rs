//! Transcript normalization and segment packing.
//!
//! Each sentence goes through stutter removal, greedy longest-match
//! segmentation against a lexicon, and stop-word removal, in that order.
//! The surviving sentences are then packed into segments of at most
//! `max_segment_words` tokens without ever splitting a sentence.
//!
//! Character offsets in [`Token::char_span`] count Unicode scalar values
//! of the sentence text *after* stutter removal.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_MAX_SEGMENT_WORDS: usize = 500;
pub const DEFAULT_STUTTER_MIN_RUN: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub sentence_index: usize,
    /// Half-open `(start, end)` scalar offsets into the de-stuttered sentence.
    pub char_span: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub tokens: Vec<Token>,
    pub source_doc: String,
}

impl Segment {
    pub fn word_count(&self) -> usize {
        self.tokens.len()
    }

    /// Number of distinct source sentences packed into this segment.
    pub fn sentence_count(&self) -> usize {
        let mut count = 0;
        let mut last = None;
        for t in &self.tokens {
            if last != Some(t.sentence_index) {
                count += 1;
                last = Some(t.sentence_index);
            }
        }
        count
    }

    pub fn surfaces(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.surface.as_str()).collect()
    }
}

/// Segmentation dictionary. Frequencies are parsed and kept but unused by
/// longest-match.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: HashMap<String, Option<u64>>,
    max_chars: usize,
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, word: impl Into<String>, frequency: Option<u64>) {
        let word = word.into();
        let len = word.chars().count();
        if len == 0 {
            return;
        }
        self.max_chars = self.max_chars.max(len);
        self.entries.insert(word, frequency);
    }

    pub fn contains(&self, word: &str) -> bool {
        self.entries.contains_key(word)
    }

    pub fn frequency(&self, word: &str) -> Option<u64> {
        self.entries.get(word).copied().flatten()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_chars(&self) -> usize {
        self.max_chars
    }

    /// Parse the lexicon file format: one entry per line, optionally followed
    /// by a tab and an integer frequency. Blank lines and `#` comments are
    /// skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lexicon = Lexicon::new();
        for (line, word, rest) in data_lines(text) {
            let frequency = match rest {
                None => None,
                Some(f) => Some(f.trim().parse::<u64>().map_err(|e| Error::Parse {
                    line,
                    message: format!("bad lexicon frequency {f:?}: {e}"),
                })?),
            };
            lexicon.insert(word, frequency);
        }
        Ok(lexicon)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

impl<S: Into<String>> FromIterator<S> for Lexicon {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        let mut lexicon = Lexicon::new();
        for w in iter {
            lexicon.insert(w, None);
        }
        lexicon
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StopWords(HashSet<String>);

impl StopWords {
    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn parse(text: &str) -> Self {
        data_lines(text).map(|(_, w, _)| w).collect()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text))
    }
}

impl<S: Into<String>> FromIterator<S> for StopWords {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        StopWords(iter.into_iter().map(Into::into).collect())
    }
}

/// Yields `(1-based line, first field, optional tab-separated remainder)`.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str, Option<&str>)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            return None;
        }
        let mut parts = line.splitn(2, '\t');
        let word = parts.next().unwrap_or("").trim();
        if word.is_empty() {
            return None;
        }
        Some((i + 1, word, parts.next()))
    })
}

#[derive(Debug, Clone)]
pub struct PreprocessConfig {
    pub max_segment_words: usize,
    pub stopwords: StopWords,
    pub lexicon: Lexicon,
    pub stutter_min_run: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            max_segment_words: DEFAULT_MAX_SEGMENT_WORDS,
            stopwords: StopWords::default(),
            lexicon: Lexicon::default(),
            stutter_min_run: DEFAULT_STUTTER_MIN_RUN,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_segment_words == 0 {
            return Err(Error::InvalidConfig("max_segment_words must be > 0".into()));
        }
        if self.stutter_min_run < 2 {
            return Err(Error::InvalidConfig("stutter_min_run must be >= 2".into()));
        }
        Ok(())
    }
}

/// Collapse every run of at least `min_run` identical scalars to one scalar.
pub fn remove_stutter(text: &str, min_run: usize) -> String {
    let min_run = min_run.max(2);
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        let mut run = 1;
        while chars.peek() == Some(&c) {
            chars.next();
            run += 1;
        }
        let keep = if run >= min_run { 1 } else { run };
        out.extend(std::iter::repeat_n(c, keep));
    }
    out
}

/// Greedy left-to-right longest-match segmentation. Positions with no
/// lexicon entry emit a single-scalar token. All tokens get
/// `sentence_index = 0`; use [`process_sentence`] to set it.
pub fn segment_words(text: &str, lexicon: &Lexicon) -> Vec<Token> {
    // byte offset of every scalar, plus the end
    let mut bounds: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
    let n = bounds.len();
    bounds.push(text.len());

    let mut tokens = Vec::new();
    let mut pos = 0;
    while pos < n {
        let longest = lexicon.max_chars().min(n - pos);
        let len = (2..=longest)
            .rev()
            .find(|&len| lexicon.contains(&text[bounds[pos]..bounds[pos + len]]))
            .unwrap_or(1);
        tokens.push(Token {
            surface: text[bounds[pos]..bounds[pos + len]].to_string(),
            sentence_index: 0,
            char_span: (pos, pos + len),
        });
        pos += len;
    }
    tokens
}

pub fn remove_stopwords(tokens: Vec<Token>, stopwords: &StopWords) -> Vec<Token> {
    if stopwords.is_empty() {
        return tokens;
    }
    tokens
        .into_iter()
        .filter(|t| !stopwords.contains(&t.surface))
        .collect()
}

/// Stutter removal, segmentation and stop-word removal for one sentence.
pub fn process_sentence(text: &str, sentence_index: usize, cfg: &PreprocessConfig) -> Vec<Token> {
    let clean = remove_stutter(text, cfg.stutter_min_run);
    let mut tokens = segment_words(&clean, &cfg.lexicon);
    for t in &mut tokens {
        t.sentence_index = sentence_index;
    }
    remove_stopwords(tokens, &cfg.stopwords)
}

/// Tokenize a gold keyphrase the same way as corpus text.
pub fn keyphrase_tokens(phrase: &str, cfg: &PreprocessConfig) -> Vec<String> {
    process_sentence(phrase.trim(), 0, cfg)
        .into_iter()
        .map(|t| t.surface)
        .collect()
}

/// Greedy in-order packing of sentences into segments of at most
/// `max_words` tokens. A sentence that alone exceeds `max_words` becomes its
/// own oversized segment. Empty sentences contribute nothing.
pub fn fuse_sentences(sentences: Vec<Vec<Token>>, max_words: usize, doc_id: &str) -> Vec<Segment> {
    let max_words = max_words.max(1);
    let mut segments = Vec::new();
    let mut current: Vec<Token> = Vec::new();
    for sentence in sentences {
        if sentence.is_empty() {
            continue;
        }
        if !current.is_empty() && current.len() + sentence.len() > max_words {
            segments.push(Segment {
                tokens: std::mem::take(&mut current),
                source_doc: doc_id.to_string(),
            });
        }
        current.extend(sentence);
    }
    if !current.is_empty() {
        segments.push(Segment {
            tokens: current,
            source_doc: doc_id.to_string(),
        });
    }
    segments
}

/// Full preprocessing of one document. With `fuse = false` every non-empty
/// sentence becomes its own segment.
pub fn preprocess_document(
    doc_id: &str,
    sentences: &[String],
    cfg: &PreprocessConfig,
    fuse: bool,
) -> Vec<Segment> {
    let processed: Vec<Vec<Token>> = sentences
        .iter()
        .enumerate()
        .map(|(i, s)| process_sentence(s, i, cfg))
        .collect();
    let max_words = if fuse { cfg.max_segment_words } else { 1 };
    fuse_sentences(processed, max_words, doc_id)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(words: &[&str]) -> Vec<Token> {
        let mut pos = 0;
        words
            .iter()
            .map(|w| {
                let len = w.chars().count();
                let t = Token {
                    surface: w.to_string(),
                    sentence_index: 0,
                    char_span: (pos, pos + len),
                };
                pos += len;
                t
            })
            .collect()
    }

    fn sentence_of(len: usize, index: usize) -> Vec<Token> {
        (0..len)
            .map(|i| Token {
                surface: format!("w{i}"),
                sentence_index: index,
                char_span: (i, i + 1),
            })
            .collect()
    }

    fn surfaces(tokens: &[Token]) -> Vec<&str> {
        tokens.iter().map(|t| t.surface.as_str()).collect()
    }

    #[test]
    fn stutter_examples() {
        assert_eq!(remove_stutter("好好好的", 3), "好的");
        assert_eq!(remove_stutter("", 3), "");
        assert_eq!(remove_stutter("aab", 3), "aab");
        assert_eq!(remove_stutter("aaaabaaa", 3), "aba");
        assert_eq!(remove_stutter("aab", 2), "ab");
    }

    #[test]
    fn segmentation_examples() {
        let lex: Lexicon = ["ab", "c", "a"].into_iter().collect();
        assert_eq!(surfaces(&segment_words("abc", &lex)), ["ab", "c"]);
        let lex: Lexicon = ["ab"].into_iter().collect();
        assert_eq!(surfaces(&segment_words("x", &lex)), ["x"]);
        let lex: Lexicon = ["ab", "abab"].into_iter().collect();
        assert_eq!(surfaces(&segment_words("abab", &lex)), ["abab"]);
    }

    #[test]
    fn segmentation_spans_count_scalars() {
        let lex: Lexicon = ["会议", "开会"].into_iter().collect();
        let t = segment_words("今天开会", &lex);
        assert_eq!(surfaces(&t), ["今", "天", "开会"]);
        assert_eq!(t[2].char_span, (2, 4));
    }

    #[test]
    fn stopword_examples() {
        let stop: StopWords = ["嗯", "吧"].into_iter().collect();
        let out = remove_stopwords(toks(&["嗯", "开会", "吧"]), &stop);
        assert_eq!(surfaces(&out), ["开会"]);
        assert_eq!(out[0].char_span, (1, 3));

        let input = toks(&["x", "y"]);
        assert_eq!(remove_stopwords(input.clone(), &StopWords::default()), input);

        let stop: StopWords = ["a"].into_iter().collect();
        assert!(remove_stopwords(toks(&["a", "a"]), &stop).is_empty());
    }

    #[test]
    fn fusion_examples() {
        let sents = vec![sentence_of(3, 0), sentence_of(4, 1), sentence_of(5, 2)];
        let segs = fuse_sentences(sents, 8, "d");
        let lens: Vec<usize> = segs.iter().map(Segment::word_count).collect();
        assert_eq!(lens, [7, 5]);

        let segs = fuse_sentences(vec![sentence_of(600, 0)], 500, "d");
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].word_count(), 600);

        assert!(fuse_sentences(Vec::new(), 500, "d").is_empty());
    }

    #[test]
    fn oversized_sentence_closes_open_segment() {
        let sents = vec![sentence_of(2, 0), sentence_of(9, 1), sentence_of(2, 2)];
        let lens: Vec<usize> = fuse_sentences(sents, 5, "d")
            .iter()
            .map(Segment::word_count)
            .collect();
        assert_eq!(lens, [2, 9, 2]);
    }

    #[test]
    fn lexicon_file_format() {
        let text = "# header\n会议\t12\n\n开会\n  \n";
        let lex = Lexicon::parse(text).unwrap();
        assert_eq!(lex.len(), 2);
        assert_eq!(lex.frequency("会议"), Some(12));
        assert_eq!(lex.frequency("开会"), None);

        match Lexicon::parse("a\tnope\n") {
            Err(Error::Parse { line: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }

        let stop = StopWords::parse("#c\n嗯\n\n吧\n");
        assert_eq!(stop.len(), 2);
        assert!(stop.contains("吧"));
    }

    #[test]
    fn document_pipeline_order() {
        let cfg = PreprocessConfig {
            lexicon: ["开会", "项目"].into_iter().collect(),
            stopwords: ["嗯"].into_iter().collect(),
            ..Default::default()
        };
        // stutter first, so the run of 嗯 collapses and is then dropped as a stop word
        let segs = preprocess_document(
            "d1",
            &["嗯嗯嗯开会".to_string(), "项目项目".to_string()],
            &cfg,
            true,
        );
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].surfaces(), ["开会", "项目", "项目"]);
        assert_eq!(segs[0].sentence_count(), 2);
        assert_eq!(segs[0].tokens[0].char_span, (1, 3));

        let unfused = preprocess_document(
            "d1",
            &["开会".to_string(), "项目".to_string()],
            &cfg,
            false,
        );
        assert_eq!(unfused.len(), 2);
    }
}
