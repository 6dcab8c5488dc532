//! Keyphrase appearance location and word-pair grid encoding.
//!
//! An appearance with token indices `i1 < i2 < ... < im` is written into an
//! `N x N` grid as NNW at every `(ik, ik+1)` (strictly upper triangle) and a
//! single THW_KP at `(im, i1)` (lower triangle, diagonal for one-token
//! appearances). The THW cell also carries the appearance's completeness
//! as the regression target for the score head.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::Segment;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncodingConfig {
    /// Non-matching tokens allowed between two consecutive matched tokens.
    pub max_gap: usize,
    /// Minimum matched / keyphrase-length ratio for a partial appearance.
    pub min_coverage: f64,
}

impl Default for EncodingConfig {
    fn default() -> Self {
        Self {
            max_gap: 1,
            min_coverage: 0.5,
        }
    }
}

impl EncodingConfig {
    /// Full contiguous appearances only.
    pub fn contiguous_only() -> Self {
        Self {
            max_gap: 0,
            min_coverage: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min_coverage > 0.0 && self.min_coverage <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "min_coverage must be in (0, 1], got {}",
                self.min_coverage
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyphraseAppearance {
    pub phrase: String,
    pub token_indices: Vec<usize>,
    pub completeness: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GridLabel {
    None = 0,
    Nnw = 1,
    ThwKp = 2,
}

impl GridLabel {
    pub const COUNT: usize = 3;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(GridLabel::None),
            1 => Some(GridLabel::Nnw),
            2 => Some(GridLabel::ThwKp),
            _ => None,
        }
    }
}

/// Row-major `size x size` label grid; `(row, col)` is `(i, j)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelGrid {
    size: usize,
    cells: Vec<GridLabel>,
}

impl LabelGrid {
    pub fn new(size: usize) -> Self {
        Self {
            size,
            cells: vec![GridLabel::None; size * size],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> GridLabel {
        self.cells[i * self.size + j]
    }

    pub fn set(&mut self, i: usize, j: usize, label: GridLabel) -> Result<()> {
        if i >= self.size || j >= self.size {
            return Err(Error::IndexOutOfRange {
                row: i,
                col: j,
                size: self.size,
            });
        }
        self.cells[i * self.size + j] = label;
        Ok(())
    }

    pub fn cells(&self) -> &[GridLabel] {
        &self.cells
    }

    /// Cells carrying `label`, in row-major order.
    pub fn positions(&self, label: GridLabel) -> Vec<(usize, usize)> {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == label)
            .map(|(k, _)| (k / self.size, k % self.size))
            .collect()
    }

    /// NNW strictly above the diagonal, THW_KP on or below it.
    pub fn respects_triangles(&self) -> bool {
        (0..self.size).all(|i| {
            (0..self.size).all(|j| match self.get(i, j) {
                GridLabel::None => true,
                GridLabel::Nnw => i < j,
                GridLabel::ThwKp => i >= j,
            })
        })
    }
}

pub type ScoreTargets = BTreeMap<(usize, usize), f64>;

#[derive(Debug, Clone)]
pub struct EncodedSegment {
    pub segment: Segment,
    pub labels: LabelGrid,
    pub score_targets: ScoreTargets,
    pub appearances: Vec<KeyphraseAppearance>,
}

pub fn completeness_score(matched: usize, total: usize) -> Result<f64> {
    if matched == 0 || matched > total {
        return Err(Error::InvalidCount { matched, total });
    }
    Ok(matched as f64 / total as f64)
}

/// Best chain of `(segment position, keyphrase position)` pairs starting at
/// `(pos, q)`: longest first, then lexicographically earliest.
fn best_chain(
    seg: &[&str],
    kp: &[String],
    max_gap: usize,
    pos: usize,
    q: usize,
    memo: &mut BTreeMap<(usize, usize), Vec<(usize, usize)>>,
) -> Vec<(usize, usize)> {
    if let Some(c) = memo.get(&(pos, q)) {
        return c.clone();
    }
    let mut best: Vec<(usize, usize)> = Vec::new();
    let last = (pos + max_gap + 1).min(seg.len().saturating_sub(1));
    for next_pos in pos + 1..=last {
        for next_q in q + 1..kp.len() {
            if seg[next_pos] != kp[next_q] {
                continue;
            }
            let tail = best_chain(seg, kp, max_gap, next_pos, next_q, memo);
            if tail.len() > best.len() {
                best = tail;
            }
        }
    }
    let mut chain = Vec::with_capacity(best.len() + 1);
    chain.push((pos, q));
    chain.extend(best);
    memo.insert((pos, q), chain.clone());
    chain
}

/// All maximal ordered (possibly gapped or partial) matches of
/// `keyphrase_tokens` in the segment, one candidate per start position,
/// dropping any candidate whose indices are a proper subset of another's.
/// Partial appearances of multi-token keyphrases need at least two matched
/// tokens.
pub fn locate_appearances(
    segment: &Segment,
    phrase: &str,
    keyphrase_tokens: &[String],
    cfg: &EncodingConfig,
) -> Vec<KeyphraseAppearance> {
    let surfaces = segment.surfaces();
    locate_in_tokens(&surfaces, phrase, keyphrase_tokens, cfg)
}

pub fn locate_in_tokens(
    seg: &[&str],
    phrase: &str,
    kp: &[String],
    cfg: &EncodingConfig,
) -> Vec<KeyphraseAppearance> {
    if kp.is_empty() || seg.is_empty() {
        return Vec::new();
    }
    let total = kp.len();
    let mut memo = BTreeMap::new();
    let mut candidates: Vec<Vec<usize>> = Vec::new();
    for start in 0..seg.len() {
        let mut best: Vec<(usize, usize)> = Vec::new();
        for q in 0..total {
            if seg[start] != kp[q] {
                continue;
            }
            let chain = best_chain(seg, kp, cfg.max_gap, start, q, &mut memo);
            if chain.len() > best.len() {
                best = chain;
            }
        }
        if best.is_empty() {
            continue;
        }
        let matched = best.len();
        // a lone token only counts for single-token keyphrases
        if matched < total.min(2) || (matched as f64) + 1e-9 < cfg.min_coverage * total as f64 {
            continue;
        }
        candidates.push(best.into_iter().map(|(p, _)| p).collect());
    }

    let is_proper_subset = |a: &[usize], b: &[usize]| {
        a.len() < b.len() && a.iter().all(|x| b.binary_search(x).is_ok())
    };
    candidates
        .iter()
        .filter(|a| !candidates.iter().any(|b| is_proper_subset(a, b)))
        .map(|indices| KeyphraseAppearance {
            phrase: phrase.to_string(),
            completeness: indices.len() as f64 / total as f64,
            token_indices: indices.clone(),
        })
        .collect()
}

pub fn encode_grid(segment: Segment, appearances: Vec<KeyphraseAppearance>) -> Result<EncodedSegment> {
    let n = segment.word_count();
    let mut labels = LabelGrid::new(n);
    let mut score_targets = ScoreTargets::new();
    for app in &appearances {
        let (Some(&head), Some(&tail)) = (app.token_indices.first(), app.token_indices.last()) else {
            continue;
        };
        if let Some(&bad) = app.token_indices.iter().find(|&&i| i >= n) {
            return Err(Error::IndexOutOfRange {
                row: bad,
                col: bad,
                size: n,
            });
        }
        for w in app.token_indices.windows(2) {
            labels.set(w[0], w[1], GridLabel::Nnw)?;
        }
        labels.set(tail, head, GridLabel::ThwKp)?;
        let slot = score_targets.entry((tail, head)).or_insert(app.completeness);
        *slot = slot.max(app.completeness);
    }
    Ok(EncodedSegment {
        segment,
        labels,
        score_targets,
        appearances,
    })
}

/// Locate every gold keyphrase (given as `(surface, tokens)`) in the segment
/// and encode the result.
pub fn encode_segment(
    segment: Segment,
    keyphrases: &[(String, Vec<String>)],
    cfg: &EncodingConfig,
) -> EncodedSegment {
    let appearances: Vec<KeyphraseAppearance> = keyphrases
        .iter()
        .flat_map(|(phrase, tokens)| locate_appearances(&segment, phrase, tokens, cfg))
        .collect();
    // indices come from the segment itself, so encoding cannot fail
    encode_grid(segment, appearances).expect("located indices are in range")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::Token;

    fn segment(words: &[&str]) -> Segment {
        Segment {
            tokens: words
                .iter()
                .enumerate()
                .map(|(i, w)| Token {
                    surface: w.to_string(),
                    sentence_index: 0,
                    char_span: (i, i + 1),
                })
                .collect(),
            source_doc: "d".into(),
        }
    }

    fn kp(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    fn indices(apps: &[KeyphraseAppearance]) -> Vec<(Vec<usize>, f64)> {
        apps.iter()
            .map(|a| (a.token_indices.clone(), a.completeness))
            .collect()
    }

    #[test]
    fn locate_examples() {
        let cfg = EncodingConfig::default();
        let apps = locate_appearances(&segment(&["A", "B", "C", "D"]), "AB", &kp(&["A", "B"]), &cfg);
        assert_eq!(indices(&apps), [(vec![0, 1], 1.0)]);

        let apps = locate_appearances(&segment(&["A", "X", "B"]), "AB", &kp(&["A", "B"]), &cfg);
        assert_eq!(indices(&apps), [(vec![0, 2], 1.0)]);

        let apps = locate_appearances(&segment(&["A", "C"]), "ABCD", &kp(&["A", "B", "C", "D"]), &cfg);
        assert_eq!(indices(&apps), [(vec![0, 1], 0.5)]);

        let apps = locate_appearances(&segment(&["A", "X", "X", "B"]), "AB", &kp(&["A", "B"]), &cfg);
        assert!(apps.is_empty());

        let apps = locate_appearances(&segment(&["x", "K", "y"]), "K", &kp(&["K"]), &cfg);
        assert_eq!(indices(&apps), [(vec![1], 1.0)]);
    }

    #[test]
    fn suffix_matches_are_not_maximal() {
        let cfg = EncodingConfig::default();
        let apps = locate_appearances(
            &segment(&["A", "B", "C", "x", "A", "B", "C"]),
            "ABC",
            &kp(&["A", "B", "C"]),
            &cfg,
        );
        assert_eq!(indices(&apps), [(vec![0, 1, 2], 1.0), (vec![4, 5, 6], 1.0)]);
    }

    #[test]
    fn contiguous_only_drops_gapped_and_partial() {
        let cfg = EncodingConfig::contiguous_only();
        let seg = segment(&["A", "X", "B", "A", "B", "A"]);
        let apps = locate_appearances(&seg, "AB", &kp(&["A", "B"]), &cfg);
        assert_eq!(indices(&apps), [(vec![3, 4], 1.0)]);
    }

    #[test]
    fn encode_examples() {
        let app = |idx: Vec<usize>, c: f64| KeyphraseAppearance {
            phrase: "p".into(),
            token_indices: idx,
            completeness: c,
        };
        let enc = encode_grid(segment(&["a", "b", "c"]), vec![app(vec![0, 1], 1.0)]).unwrap();
        assert_eq!(enc.labels.positions(GridLabel::Nnw), [(0, 1)]);
        assert_eq!(enc.labels.positions(GridLabel::ThwKp), [(1, 0)]);
        assert_eq!(enc.score_targets.into_iter().collect::<Vec<_>>(), [((1, 0), 1.0)]);

        let enc = encode_grid(segment(&["a", "b", "c"]), vec![app(vec![2], 0.5)]).unwrap();
        assert!(enc.labels.positions(GridLabel::Nnw).is_empty());
        assert_eq!(enc.labels.positions(GridLabel::ThwKp), [(2, 2)]);

        let enc = encode_grid(segment(&["a", "b"]), Vec::new()).unwrap();
        assert!(enc.labels.cells().iter().all(|l| *l == GridLabel::None));
        assert!(enc.score_targets.is_empty());

        match encode_grid(segment(&["a"]), vec![app(vec![0, 3], 1.0)]) {
            Err(Error::IndexOutOfRange { .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn shared_thw_cell_keeps_max_completeness() {
        let app = |idx: Vec<usize>, c: f64| KeyphraseAppearance {
            phrase: "p".into(),
            token_indices: idx,
            completeness: c,
        };
        let enc = encode_grid(
            segment(&["a", "b", "c"]),
            vec![app(vec![0, 2], 0.5), app(vec![0, 1, 2], 1.0)],
        )
        .unwrap();
        assert_eq!(enc.score_targets[&(2, 0)], 1.0);
        assert!(enc.labels.respects_triangles());
    }

    #[test]
    fn completeness_examples() {
        assert_eq!(completeness_score(4, 4).unwrap(), 1.0);
        assert_eq!(completeness_score(1, 2).unwrap(), 0.5);
        assert_eq!(completeness_score(3, 4).unwrap(), 0.75);
        assert!(matches!(completeness_score(0, 2), Err(Error::InvalidCount { .. })));
        assert!(matches!(completeness_score(3, 2), Err(Error::InvalidCount { .. })));
    }

    #[test]
    fn completeness_monotone_and_scale_invariant() {
        for total in 1..20 {
            for m in 1..total {
                let a = completeness_score(m, total).unwrap();
                let b = completeness_score(m + 1, total).unwrap();
                assert!(a < b);
                assert_eq!(a, completeness_score(2 * m, 2 * total).unwrap());
            }
        }
    }
}
