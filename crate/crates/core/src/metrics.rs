//! Exact and partial F1@k and the overall score
//! `100 * mean_k((exact_F1@k + partial_F1@k) / 2)`, macro-averaged over
//! documents.
//!
//! Strings are compared after trimming and lowercasing. Matching is greedy
//! and one-to-one: exact pairs are consumed first, then the remaining
//! predictions are visited in rank order and each takes the first unconsumed
//! gold keyphrase (in gold input order) that it matches.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub k_values: Vec<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            k_values: vec![10, 15, 20],
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_values.is_empty() || self.k_values.contains(&0) {
            return Err(Error::InvalidConfig("k_values must be nonempty and all >= 1".into()));
        }
        Ok(())
    }

    pub fn max_k(&self) -> usize {
        self.k_values.iter().copied().max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    fn from_counts(matches: usize, predicted: usize, gold: usize) -> Self {
        let precision = if predicted == 0 { 0.0 } else { matches as f64 / predicted as f64 };
        let recall = if gold == 0 { 0.0 } else { matches as f64 / gold as f64 };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Prf { precision, recall, f1 }
    }
}

/// Decides whether a normalized prediction matches a normalized gold phrase.
pub trait MatchRule {
    fn matches(&self, pred: &str, gold: &str) -> bool;
}

pub struct ExactMatch;

impl MatchRule for ExactMatch {
    fn matches(&self, pred: &str, gold: &str) -> bool {
        pred == gold
    }
}

/// Equality or substring containment in either direction.
pub struct PartialMatch;

impl MatchRule for PartialMatch {
    fn matches(&self, pred: &str, gold: &str) -> bool {
        pred == gold || gold.contains(pred) || pred.contains(gold)
    }
}

pub fn normalize(s: &str) -> String {
    s.trim().to_lowercase()
}

fn normalized_gold(gold: &[String]) -> Vec<String> {
    let mut out: Vec<String> = Vec::with_capacity(gold.len());
    for g in gold {
        let g = normalize(g);
        if !out.contains(&g) {
            out.push(g);
        }
    }
    out
}

/// Number of greedy one-to-one matches among the first `k` predictions.
///
/// Exact matches are paired first. The remaining predictions are then
/// visited in rank order, each taking the first unconsumed gold phrase (in
/// gold order) that `rule` accepts. For [`ExactMatch`] the second pass finds
/// nothing new; for any rule that accepts equality the count is never below
/// the exact count.
pub fn greedy_matches(pred: &[String], gold: &[String], k: usize, rule: &dyn MatchRule) -> usize {
    let gold = normalized_gold(gold);
    let pred: Vec<String> = pred.iter().take(k).map(|p| normalize(p)).collect();
    let mut used = vec![false; gold.len()];
    let mut matched = vec![false; pred.len()];
    for (pi, p) in pred.iter().enumerate() {
        if let Some(g) = (0..gold.len()).find(|&g| !used[g] && *p == gold[g]) {
            used[g] = true;
            matched[pi] = true;
        }
    }
    for (pi, p) in pred.iter().enumerate() {
        if matched[pi] {
            continue;
        }
        if let Some(g) = (0..gold.len()).find(|&g| !used[g] && rule.matches(p, &gold[g])) {
            used[g] = true;
            matched[pi] = true;
        }
    }
    matched.iter().filter(|&&m| m).count()
}

pub fn f1_at_k(pred: &[String], gold: &[String], k: usize, rule: &dyn MatchRule) -> Prf {
    let matches = greedy_matches(pred, gold, k, rule);
    Prf::from_counts(matches, pred.len().min(k), normalized_gold(gold).len())
}

pub fn exact_f1_at_k(pred: &[String], gold: &[String], k: usize) -> Prf {
    f1_at_k(pred, gold, k, &ExactMatch)
}

pub fn partial_f1_at_k(pred: &[String], gold: &[String], k: usize) -> Prf {
    f1_at_k(pred, gold, k, &PartialMatch)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KScores {
    pub k: usize,
    pub exact: Prf,
    pub partial: Prf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentScores {
    pub doc_id: String,
    pub per_k: Vec<KScores>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Macro averages over documents.
    pub per_k: Vec<KScores>,
    pub overall: f64,
    pub documents: Vec<DocumentScores>,
}

/// One document's ranked predictions against its gold keyphrases.
#[derive(Debug, Clone, PartialEq)]
pub struct DocumentEval {
    pub doc_id: String,
    pub predictions: Vec<String>,
    pub gold: Vec<String>,
}

pub fn score_document(doc: &DocumentEval, cfg: &EvalConfig) -> DocumentScores {
    DocumentScores {
        doc_id: doc.doc_id.clone(),
        per_k: cfg
            .k_values
            .iter()
            .map(|&k| KScores {
                k,
                exact: exact_f1_at_k(&doc.predictions, &doc.gold, k),
                partial: partial_f1_at_k(&doc.predictions, &doc.gold, k),
            })
            .collect(),
    }
}

pub fn overall_score(docs: &[DocumentEval], cfg: &EvalConfig) -> Result<EvalReport> {
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    cfg.validate()?;
    let documents: Vec<DocumentScores> = docs.iter().map(|d| score_document(d, cfg)).collect();
    let n = documents.len() as f64;
    let mean = |f: &dyn Fn(&DocumentScores) -> f64| documents.iter().map(f).sum::<f64>() / n;

    let per_k: Vec<KScores> = cfg
        .k_values
        .iter()
        .enumerate()
        .map(|(ki, &k)| {
            let avg = |pick: fn(&KScores) -> Prf| Prf {
                precision: mean(&|d| pick(&d.per_k[ki]).precision),
                recall: mean(&|d| pick(&d.per_k[ki]).recall),
                f1: mean(&|d| pick(&d.per_k[ki]).f1),
            };
            KScores {
                k,
                exact: avg(|s| s.exact),
                partial: avg(|s| s.partial),
            }
        })
        .collect();
    let overall = 100.0 * per_k.iter().map(|s| (s.exact.f1 + s.partial.f1) / 2.0).sum::<f64>() / per_k.len() as f64;
    Ok(EvalReport {
        per_k,
        overall,
        documents,
    })
}
