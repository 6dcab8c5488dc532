//! Grid decoding and keyphrase ranking.
//!
//! NNW cells above the threshold form a DAG over token positions. Every THW
//! cell `(tail, head)` above the threshold yields one appearance per simple
//! path `head -> ... -> tail` in that DAG. Appearance scores are read from
//! the THW cell and summed per surface form across a document.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::encoding::GridLabel;
use crate::error::{Error, Result};
use crate::model::GridPrediction;
use crate::preprocess::Segment;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodeConfig {
    pub label_threshold: f64,
    pub max_phrase_tokens: usize,
    pub joiner: String,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            label_threshold: 0.5,
            max_phrase_tokens: 12,
            joiner: String::new(),
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.label_threshold > 0.0 && self.label_threshold < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "label_threshold must be in (0, 1), got {}",
                self.label_threshold
            )));
        }
        if self.max_phrase_tokens == 0 {
            return Err(Error::InvalidConfig("max_phrase_tokens must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodedAppearance {
    pub token_indices: Vec<usize>,
    pub surface: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedKeyphrase {
    pub surface: String,
    pub total_score: f64,
    pub appearance_count: usize,
    /// `(segment index, token index)` of the earliest appearance.
    pub first_position: (usize, usize),
}

pub fn decode_grid(pred: &GridPrediction, segment: &Segment, cfg: &DecodeConfig) -> Result<Vec<DecodedAppearance>> {
    let n = segment.word_count();
    if pred.size != n {
        return Err(Error::ShapeMismatch {
            expected: n,
            found: pred.size,
        });
    }
    let thr = cfg.label_threshold;
    let nnw = GridLabel::Nnw.index();
    let thw = GridLabel::ThwKp.index();

    let mut successors: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, succ) in successors.iter_mut().enumerate() {
        for j in i + 1..n {
            if pred.prob(i, j)[nnw] >= thr {
                succ.push(j);
            }
        }
    }

    let mut paths: BTreeSet<Vec<usize>> = BTreeSet::new();
    let mut out = Vec::new();
    for tail in 0..n {
        for head in 0..=tail {
            if pred.prob(tail, head)[thw] < thr {
                continue;
            }
            let score = pred.score(tail, head);
            let reach = reaches(&successors, head, tail);
            let mut path = vec![head];
            let mut found = Vec::new();
            enumerate_paths(&successors, &reach, tail, cfg.max_phrase_tokens, &mut path, &mut found);
            for indices in found {
                if paths.insert(indices.clone()) {
                    let surface = indices
                        .iter()
                        .map(|&k| segment.tokens[k].surface.as_str())
                        .collect::<Vec<_>>()
                        .join(&cfg.joiner);
                    out.push(DecodedAppearance {
                        token_indices: indices,
                        surface,
                        score,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// `reach[k]` is true when `tail` is reachable from `k` (positions `head..=tail`).
fn reaches(successors: &[Vec<usize>], head: usize, tail: usize) -> Vec<bool> {
    let mut reach = vec![false; tail + 1];
    reach[tail] = true;
    for k in (head..tail).rev() {
        reach[k] = successors[k].iter().any(|&j| j <= tail && reach[j]);
    }
    reach
}

fn enumerate_paths(
    successors: &[Vec<usize>],
    reach: &[bool],
    tail: usize,
    max_len: usize,
    path: &mut Vec<usize>,
    found: &mut Vec<Vec<usize>>,
) {
    let last = *path.last().expect("path starts at head");
    if last == tail {
        found.push(path.clone());
        return;
    }
    if path.len() >= max_len {
        return;
    }
    // edges only go forward, so a path can never revisit a node
    for &next in &successors[last] {
        if next > tail || !reach[next] {
            continue;
        }
        path.push(next);
        enumerate_paths(successors, reach, tail, max_len, path, found);
        path.pop();
    }
}

/// Sum appearance scores per surface. Input is one list per segment, in
/// segment order; output groups are in order of first appearance.
pub fn aggregate_scores(per_segment: &[Vec<DecodedAppearance>]) -> Vec<RankedKeyphrase> {
    let mut groups: Vec<RankedKeyphrase> = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for (seg, apps) in per_segment.iter().enumerate() {
        for app in apps {
            let pos = (seg, app.token_indices.first().copied().unwrap_or(0));
            match index.get(app.surface.as_str()) {
                Some(&g) => {
                    let group = &mut groups[g];
                    group.total_score += app.score;
                    group.appearance_count += 1;
                    group.first_position = group.first_position.min(pos);
                }
                None => {
                    index.insert(&app.surface, groups.len());
                    groups.push(RankedKeyphrase {
                        surface: app.surface.clone(),
                        total_score: app.score,
                        appearance_count: 1,
                        first_position: pos,
                    });
                }
            }
        }
    }
    groups
}

fn rank_order(a: &RankedKeyphrase, b: &RankedKeyphrase) -> Ordering {
    b.total_score
        .total_cmp(&a.total_score)
        .then(a.first_position.cmp(&b.first_position))
        .then_with(|| a.surface.cmp(&b.surface))
}

/// Full ranking, best first.
pub fn rank_all(ranked: &[RankedKeyphrase]) -> Vec<RankedKeyphrase> {
    let mut sorted = ranked.to_vec();
    sorted.sort_by(rank_order);
    sorted
}

pub fn rank_topk(ranked: &[RankedKeyphrase], k: usize) -> Vec<String> {
    rank_all(ranked)
        .into_iter()
        .take(k)
        .map(|r| r.surface)
        .collect()
}
