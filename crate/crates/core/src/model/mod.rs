//! Word-pair grid scorer.
//!
//! Token embeddings feed a stacked bidirectional tanh RNN. Every cell
//! `(i, j)` is represented by `[h_i; h_j; d(j - i)]`, where `d` is a learned
//! signed distance-bucket embedding, passed through one shared tanh layer,
//! and read out by a 3-way softmax head (NONE / NNW / THW_KP) and a sigmoid
//! score head.
//!
//! Parameters are stored as `f32`; all arithmetic runs in `f64`.

mod backward;
mod forward;
mod io;
mod loss;
mod train;
mod vocab;

use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

pub use backward::{backward, Gradient};
pub use forward::{forward, GridPrediction};
pub use io::{load_model, model_from_bytes, model_to_bytes, save_model, FORMAT_VERSION, MAGIC};
pub use loss::{binary_cross_entropy_sum, combined_loss, focal_loss, score_mse, LossConfig, PROB_CLAMP};
pub use train::{train, train_with, TrainConfig, TrainOutcome, TrainingExample};
pub use vocab::{Vocabulary, UNK_TOKEN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: u64,
    pub embed_dim: u64,
    pub hidden_dim: u64,
    pub encoder_depth: u64,
    pub distance_buckets: u64,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(vocab_size: usize, seed: u64) -> Self {
        Self {
            vocab_size: vocab_size as u64,
            embed_dim: 64,
            hidden_dim: 64,
            encoder_depth: 1,
            distance_buckets: 16,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("vocab_size", self.vocab_size),
            ("embed_dim", self.embed_dim),
            ("hidden_dim", self.hidden_dim),
            ("encoder_depth", self.encoder_depth),
            ("distance_buckets", self.distance_buckets),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be >= 1")));
            }
        }
        Ok(())
    }

    pub fn layout(&self) -> Layout {
        Layout::new(self)
    }
}

/// Row-major matrix block inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Block {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RnnBlocks {
    pub w_in: Block,
    pub w_rec: Block,
    pub bias: Block,
}

/// Fixed parameter order, which is also the on-disk order:
/// token embeddings, distance embeddings, then per encoder layer the
/// forward and backward RNN (input weights, recurrent weights, bias), the
/// pair layer (weights, bias), the label head (weights, bias) and the score
/// head (weights, bias).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub vocab: usize,
    pub embed: usize,
    pub hidden: usize,
    pub buckets: usize,
    pub token_embedding: Block,
    pub distance_embedding: Block,
    /// `[layer][direction]`, direction 0 = left-to-right.
    pub rnn: Vec<[RnnBlocks; 2]>,
    pub pair_weight: Block,
    pub pair_bias: Block,
    pub label_weight: Block,
    pub label_bias: Block,
    pub score_weight: Block,
    pub score_bias: Block,
    pub total: usize,
}

impl Layout {
    fn new(cfg: &ModelConfig) -> Self {
        let vocab = cfg.vocab_size as usize;
        let embed = cfg.embed_dim as usize;
        let hidden = cfg.hidden_dim as usize;
        let buckets = cfg.distance_buckets as usize;
        let mut offset = 0;
        let mut block = |rows: usize, cols: usize| {
            let b = Block { offset, rows, cols };
            offset += rows * cols;
            b
        };
        let token_embedding = block(vocab, embed);
        let distance_embedding = block(buckets, embed);
        let mut rnn = Vec::new();
        for layer in 0..cfg.encoder_depth as usize {
            let input = if layer == 0 { embed } else { 2 * hidden };
            let mut dir = || RnnBlocks {
                w_in: block(hidden, input),
                w_rec: block(hidden, hidden),
                bias: block(hidden, 1),
            };
            let fwd = dir();
            let bwd = dir();
            rnn.push([fwd, bwd]);
        }
        let pair_weight = block(hidden, 4 * hidden + embed);
        let pair_bias = block(hidden, 1);
        let label_weight = block(3, hidden);
        let label_bias = block(3, 1);
        let score_weight = block(1, hidden);
        let score_bias = block(1, 1);
        Layout {
            vocab,
            embed,
            hidden,
            buckets,
            token_embedding,
            distance_embedding,
            rnn,
            pair_weight,
            pair_bias,
            label_weight,
            label_bias,
            score_weight,
            score_bias,
            total: offset,
        }
    }

    fn weight_blocks(&self) -> Vec<Block> {
        let mut blocks = vec![self.token_embedding, self.distance_embedding];
        for layer in &self.rnn {
            for dir in layer {
                blocks.push(dir.w_in);
                blocks.push(dir.w_rec);
            }
        }
        blocks.extend([self.pair_weight, self.label_weight, self.score_weight]);
        blocks
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    pub values: Vec<f32>,
}

impl Parameters {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub(crate) fn to_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| f64::from(v)).collect()
    }
}

/// Glorot-uniform weights, zero biases, deterministic in `config.seed`.
pub fn init_params(config: &ModelConfig) -> Result<Parameters> {
    config.validate()?;
    let layout = config.layout();
    let mut values = vec![0f32; layout.total];
    let mut rng = rng_from_seed(config.seed);
    for b in layout.weight_blocks() {
        let s = (6.0 / (b.rows + b.cols) as f64).sqrt();
        for v in &mut values[b.range()] {
            *v = rng.gen_range(-s..s) as f32;
        }
    }
    Ok(Parameters { values })
}

/// Signed log-spaced bucket of the offset `j - i`. Bucket 0 is the diagonal;
/// positive and negative offsets get disjoint ranges so the two grid
/// triangles stay distinguishable.
pub fn distance_bucket(offset: isize, buckets: usize) -> usize {
    let half = buckets.saturating_sub(1) / 2;
    if offset == 0 || half == 0 {
        return 0;
    }
    let magnitude = offset.unsigned_abs();
    // 1 -> 0, 2 -> 1, 3..4 -> 2, 5..8 -> 3, ...
    let level = (usize::BITS - (magnitude - 1).leading_zeros()) as usize;
    let level = level.min(half - 1);
    if offset > 0 {
        1 + level
    } else {
        1 + half + level
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> ModelConfig {
        ModelConfig {
            vocab_size: 7,
            embed_dim: 3,
            hidden_dim: 4,
            encoder_depth: 2,
            distance_buckets: 5,
            seed,
        }
    }

    #[test]
    fn init_is_deterministic() {
        let a = init_params(&small(1)).unwrap();
        let b = init_params(&small(1)).unwrap();
        assert_eq!(a.values.len(), b.values.len());
        assert!(a.values.iter().zip(&b.values).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_ne!(a, init_params(&small(2)).unwrap());
    }

    #[test]
    fn embedding_shape() {
        let cfg = ModelConfig {
            vocab_size: 2,
            embed_dim: 1,
            ..small(0)
        };
        assert_eq!(cfg.layout().token_embedding.len(), 2);
    }

    #[test]
    fn biases_zero_and_weights_bounded() {
        let cfg = small(3);
        let p = init_params(&cfg).unwrap();
        let l = cfg.layout();
        assert_eq!(p.len(), l.total);
        for b in [l.pair_bias, l.label_bias, l.score_bias, l.rnn[1][0].bias] {
            assert!(p.values[b.range()].iter().all(|&v| v == 0.0));
        }
        let w = l.pair_weight;
        let s = (6.0 / (w.rows + w.cols) as f64).sqrt() as f32;
        assert!(p.values[w.range()].iter().all(|v| v.abs() <= s));
    }

    #[test]
    fn parameter_count_formula() {
        let cfg = small(0);
        let (v, e, h, b) = (7, 3, 4, 5);
        let rnn = 2 * (h * e + h * h + h) + 2 * (h * 2 * h + h * h + h);
        let expected = v * e + b * e + rnn + h * (4 * h + e) + h + 3 * h + 3 + h + 1;
        assert_eq!(cfg.layout().total, expected);
    }

    #[test]
    fn zero_dims_rejected() {
        let cfg = ModelConfig {
            hidden_dim: 0,
            ..small(0)
        };
        assert!(matches!(init_params(&cfg), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn buckets() {
        assert_eq!(distance_bucket(0, 16), 0);
        assert_eq!(distance_bucket(1, 16), 1);
        assert_eq!(distance_bucket(2, 16), 2);
        assert_eq!(distance_bucket(3, 16), 3);
        assert_eq!(distance_bucket(4, 16), 3);
        assert_eq!(distance_bucket(5, 16), 4);
        assert_eq!(distance_bucket(1000, 16), 7);
        assert_eq!(distance_bucket(-1, 16), 8);
        assert_eq!(distance_bucket(-2, 16), 9);
        assert_eq!(distance_bucket(-1000, 16), 14);
        assert_eq!(distance_bucket(5, 1), 0);
        assert_eq!(distance_bucket(5, 2), 0);
        for d in -40..40 {
            assert!(distance_bucket(d, 16) < 16);
            assert!(distance_bucket(d, 5) < 5);
        }
    }
}
