//! Line-delimited JSON corpus and prediction files.
//!
//! Corpus line: `{"doc_id": "...", "sentences": ["..."], "keyphrases": ["..."]}`
//! (`keyphrases` may be omitted at inference).
//!
//! Prediction line: `{"doc_id": "...", "keyphrases": [{"surface": "...", "score": 1.5}]}`
//! with keyphrases in rank order.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub doc_id: String,
    pub sentences: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keyphrases: Option<Vec<String>>,
}

impl CorpusRecord {
    pub fn gold(&self) -> Result<&[String]> {
        self.keyphrases
            .as_deref()
            .ok_or_else(|| Error::MissingGold(self.doc_id.clone()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredKeyphrase {
    pub surface: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub doc_id: String,
    pub keyphrases: Vec<ScoredKeyphrase>,
}

impl PredictionRecord {
    pub fn surfaces(&self) -> Vec<String> {
        self.keyphrases.iter().map(|k| k.surface.clone()).collect()
    }
}

fn parse_lines<T: DeserializeOwned>(text: &str) -> Result<Vec<(usize, T)>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map(|r| (i + 1, r))
                .map_err(|e| Error::Parse {
                    line: i + 1,
                    message: e.to_string(),
                })
        })
        .collect()
}

pub fn parse_corpus(text: &str) -> Result<Vec<CorpusRecord>> {
    let records: Vec<(usize, CorpusRecord)> = parse_lines(text)?;
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(records.len());
    for (line, r) in records {
        if r.doc_id.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty doc_id".into(),
            });
        }
        if r.sentences.is_empty() {
            return Err(Error::Parse {
                line,
                message: format!("document {:?} has no sentences", r.doc_id),
            });
        }
        if !seen.insert(r.doc_id.clone()) {
            return Err(Error::DuplicateDocId(r.doc_id));
        }
        out.push(r);
    }
    Ok(out)
}

pub fn load_corpus(path: &Path) -> Result<Vec<CorpusRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(&text)
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r).expect("records serialize");
        buf.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn load_predictions(path: &Path) -> Result<Vec<PredictionRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let records: Vec<(usize, PredictionRecord)> = parse_lines(&text)?;
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(records.len());
    for (_, r) in records {
        if !seen.insert(r.doc_id.clone()) {
            return Err(Error::DuplicateDocId(r.doc_id));
        }
        out.push(r);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"{"doc_id":"a","sentences":["s1","s2"],"keyphrases":["k"]}
{"doc_id":"b","sentences":["s"]}
"#;

    #[test]
    fn parses_records() {
        let recs = parse_corpus(GOOD).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].gold().unwrap(), ["k"]);
        assert!(matches!(recs[1].gold(), Err(Error::MissingGold(id)) if id == "b"));
    }

    #[test]
    fn malformed_line_number() {
        let text = format!("{GOOD}{{\"doc_id\": oops}}\n");
        match parse_corpus(&text) {
            Err(Error::Parse { line: 3, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_doc_id() {
        let text = format!("{GOOD}{GOOD}");
        assert!(matches!(parse_corpus(&text), Err(Error::DuplicateDocId(id)) if id == "a"));
    }

    #[test]
    fn empty_sentences_rejected() {
        let text = r#"{"doc_id":"a","sentences":[]}"#;
        assert!(matches!(parse_corpus(text), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.jsonl");
        let recs = vec![PredictionRecord {
            doc_id: "a".into(),
            keyphrases: vec![ScoredKeyphrase {
                surface: "会议".into(),
                score: 1.25,
            }],
        }];
        write_jsonl(&path, &recs).unwrap();
        assert_eq!(load_predictions(&path).unwrap(), recs);
    }
}
