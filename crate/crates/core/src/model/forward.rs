use crate::error::{Error, Result};

use super::{distance_bucket, Block, Layout, ModelConfig, Parameters};

/// Per-cell class probabilities and scores for an `N x N` grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPrediction {
    pub size: usize,
    pub probs: Vec<[f64; 3]>,
    pub scores: Vec<f64>,
}

impl GridPrediction {
    pub fn prob(&self, i: usize, j: usize) -> &[f64; 3] {
        &self.probs[i * self.size + j]
    }

    pub fn score(&self, i: usize, j: usize) -> f64 {
        self.scores[i * self.size + j]
    }
}

/// `out += W x` for a row-major block.
pub(super) fn matvec_add(w: &[f64], b: Block, x: &[f64], out: &mut [f64]) {
    let m = &w[b.range()];
    for (r, o) in out.iter_mut().enumerate().take(b.rows) {
        let row = &m[r * b.cols..(r + 1) * b.cols];
        *o += row.iter().zip(x).map(|(a, c)| a * c).sum::<f64>();
    }
}

/// `out += W^T y`.
pub(super) fn matvec_t_add(w: &[f64], b: Block, y: &[f64], out: &mut [f64]) {
    let m = &w[b.range()];
    for (r, &yr) in y.iter().enumerate().take(b.rows) {
        if yr == 0.0 {
            continue;
        }
        let row = &m[r * b.cols..(r + 1) * b.cols];
        for (o, a) in out.iter_mut().zip(row) {
            *o += a * yr;
        }
    }
}

/// `g += y x^T`.
pub(super) fn outer_add(g: &mut [f64], b: Block, y: &[f64], x: &[f64]) {
    let m = &mut g[b.range()];
    for (r, &yr) in y.iter().enumerate().take(b.rows) {
        if yr == 0.0 {
            continue;
        }
        let row = &mut m[r * b.cols..(r + 1) * b.cols];
        for (a, c) in row.iter_mut().zip(x) {
            *a += yr * c;
        }
    }
}

pub(super) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(super) fn softmax3(logits: [f64; 3]) -> [f64; 3] {
    let m = logits[0].max(logits[1]).max(logits[2]);
    let e = logits.map(|l| (l - m).exp());
    let s = e[0] + e[1] + e[2];
    e.map(|v| v / s)
}

/// Everything the backward pass needs from the encoder.
pub(super) struct EncoderCache {
    pub n: usize,
    /// Layer inputs: `inputs[0]` are the embeddings, `inputs[l]` the outputs
    /// of layer `l - 1`. Each is `N x dim`, flattened.
    pub inputs: Vec<Vec<f64>>,
    /// `[layer][direction]` hidden states, `N x H`.
    pub states: Vec<[Vec<f64>; 2]>,
    /// Final encoder output, `N x 2H`.
    pub output: Vec<f64>,
    /// Pair-layer projections of the head token, tail token and distance.
    pub head_proj: Vec<f64>,
    pub tail_proj: Vec<f64>,
    pub dist_proj: Vec<f64>,
}

pub(super) fn check_ids(layout: &Layout, ids: &[usize]) -> Result<()> {
    if ids.is_empty() {
        return Err(Error::ShapeMismatch {
            expected: 1,
            found: 0,
        });
    }
    if let Some(&id) = ids.iter().find(|&&id| id >= layout.vocab) {
        return Err(Error::UnknownToken {
            id,
            vocab_size: layout.vocab,
        });
    }
    Ok(())
}

pub(super) fn encode(layout: &Layout, w: &[f64], ids: &[usize]) -> EncoderCache {
    let n = ids.len();
    let e = layout.embed;
    let h = layout.hidden;

    let emb = layout.token_embedding;
    let mut x = Vec::with_capacity(n * e);
    for &id in ids {
        x.extend_from_slice(&w[emb.offset + id * e..emb.offset + (id + 1) * e]);
    }

    let mut inputs = vec![x];
    let mut states = Vec::with_capacity(layout.rnn.len());
    for layer in &layout.rnn {
        let input = inputs.last().expect("at least the embeddings");
        let dim = layer[0].w_in.cols;
        let mut dirs: [Vec<f64>; 2] = [vec![0.0; n * h], vec![0.0; n * h]];
        for (d, blocks) in layer.iter().enumerate() {
            let order: Vec<usize> = if d == 0 { (0..n).collect() } else { (0..n).rev().collect() };
            let mut prev: Option<usize> = None;
            for &t in &order {
                let mut pre = w[blocks.bias.range()].to_vec();
                matvec_add(w, blocks.w_in, &input[t * dim..(t + 1) * dim], &mut pre);
                if let Some(p) = prev {
                    let hp = dirs[d][p * h..(p + 1) * h].to_vec();
                    matvec_add(w, blocks.w_rec, &hp, &mut pre);
                }
                for (k, v) in pre.iter().enumerate() {
                    dirs[d][t * h + k] = v.tanh();
                }
                prev = Some(t);
            }
        }
        let mut out = Vec::with_capacity(n * 2 * h);
        for t in 0..n {
            out.extend_from_slice(&dirs[0][t * h..(t + 1) * h]);
            out.extend_from_slice(&dirs[1][t * h..(t + 1) * h]);
        }
        states.push(dirs);
        inputs.push(out);
    }
    let output = inputs.pop().expect("encoder output");

    let pw = layout.pair_weight;
    let mut head_proj = vec![0.0; n * h];
    let mut tail_proj = vec![0.0; n * h];
    // the pair weight is [W_head | W_tail | W_dist]; project each token once
    for t in 0..n {
        let r = &output[t * 2 * h..(t + 1) * 2 * h];
        for row in 0..h {
            let base = pw.offset + row * pw.cols;
            let wh = &w[base..base + 2 * h];
            let wt = &w[base + 2 * h..base + 4 * h];
            head_proj[t * h + row] = wh.iter().zip(r).map(|(a, b)| a * b).sum();
            tail_proj[t * h + row] = wt.iter().zip(r).map(|(a, b)| a * b).sum();
        }
    }
    let de = layout.distance_embedding;
    let mut dist_proj = vec![0.0; layout.buckets * h];
    for b in 0..layout.buckets {
        let d = &w[de.offset + b * e..de.offset + (b + 1) * e];
        for row in 0..h {
            let base = pw.offset + row * pw.cols + 4 * h;
            dist_proj[b * h + row] = w[base..base + e].iter().zip(d).map(|(a, c)| a * c).sum();
        }
    }

    EncoderCache {
        n,
        inputs,
        states,
        output,
        head_proj,
        tail_proj,
        dist_proj,
    }
}

/// Hidden activation of cell `(i, j)` into `z`.
pub(super) fn cell_hidden(layout: &Layout, w: &[f64], cache: &EncoderCache, i: usize, j: usize, z: &mut [f64]) {
    let h = layout.hidden;
    let bucket = distance_bucket(j as isize - i as isize, layout.buckets);
    let bias = &w[layout.pair_bias.range()];
    let hp = &cache.head_proj[i * h..(i + 1) * h];
    let tp = &cache.tail_proj[j * h..(j + 1) * h];
    let dp = &cache.dist_proj[bucket * h..(bucket + 1) * h];
    for k in 0..h {
        z[k] = (hp[k] + tp[k] + dp[k] + bias[k]).tanh();
    }
}

/// Label logits and the pre-sigmoid score for hidden activation `z`.
pub(super) fn cell_heads(layout: &Layout, w: &[f64], z: &[f64]) -> ([f64; 3], f64) {
    let mut logits = [0.0; 3];
    logits.copy_from_slice(&w[layout.label_bias.range()]);
    matvec_add(w, layout.label_weight, z, &mut logits);
    let mut s = [w[layout.score_bias.offset]];
    matvec_add(w, layout.score_weight, z, &mut s);
    (logits, s[0])
}

pub(super) fn forward_f64(layout: &Layout, w: &[f64], ids: &[usize]) -> GridPrediction {
    let cache = encode(layout, w, ids);
    let n = cache.n;
    let mut probs = Vec::with_capacity(n * n);
    let mut scores = Vec::with_capacity(n * n);
    let mut z = vec![0.0; layout.hidden];
    for i in 0..n {
        for j in 0..n {
            cell_hidden(layout, w, &cache, i, j, &mut z);
            let (logits, s) = cell_heads(layout, w, &z);
            probs.push(softmax3(logits));
            scores.push(sigmoid(s));
        }
    }
    GridPrediction { size: n, probs, scores }
}

pub fn forward(config: &ModelConfig, params: &Parameters, ids: &[usize]) -> Result<GridPrediction> {
    let layout = config.layout();
    if params.len() != layout.total {
        return Err(Error::ShapeMismatch {
            expected: layout.total,
            found: params.len(),
        });
    }
    check_ids(&layout, ids)?;
    Ok(forward_f64(&layout, &params.to_f64(), ids))
}
