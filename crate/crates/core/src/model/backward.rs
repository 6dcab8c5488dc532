use crate::encoding::{LabelGrid, ScoreTargets};
use crate::error::{Error, Result};

use super::forward::{
    cell_heads, cell_hidden, check_ids, encode, matvec_t_add, outer_add, sigmoid, softmax3,
};
use super::loss::{focal_cell, LossConfig};
use super::{distance_bucket, Layout, ModelConfig, Parameters};

/// Gradient of the loss, laid out like [`Parameters`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub values: Vec<f64>,
}

impl Gradient {
    pub fn zeros(len: usize) -> Self {
        Self {
            values: vec![0.0; len],
        }
    }

    pub fn add_assign(&mut self, other: &Gradient) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }
}

/// Combined loss and its exact gradient for one segment.
pub fn backward(
    config: &ModelConfig,
    params: &Parameters,
    ids: &[usize],
    gold: &LabelGrid,
    targets: &ScoreTargets,
    cfg: &LossConfig,
) -> Result<(f64, Gradient)> {
    let layout = config.layout();
    if params.len() != layout.total {
        return Err(Error::ShapeMismatch {
            expected: layout.total,
            found: params.len(),
        });
    }
    check_ids(&layout, ids)?;
    if gold.size() != ids.len() {
        return Err(Error::ShapeMismatch {
            expected: ids.len(),
            found: gold.size(),
        });
    }
    if let Some(&(i, j)) = targets.keys().find(|&&(i, j)| i >= ids.len() || j >= ids.len()) {
        return Err(Error::IndexOutOfRange {
            row: i,
            col: j,
            size: ids.len(),
        });
    }
    Ok(backward_f64(&layout, &params.to_f64(), ids, gold, targets, cfg))
}

pub(super) fn backward_f64(
    layout: &Layout,
    w: &[f64],
    ids: &[usize],
    gold: &LabelGrid,
    targets: &ScoreTargets,
    cfg: &LossConfig,
) -> (f64, Gradient) {
    let cache = encode(layout, w, ids);
    let n = cache.n;
    let h = layout.hidden;
    let e = layout.embed;
    let mut g = vec![0.0; layout.total];

    let mse_weight = 1.0 - cfg.alpha;
    let mut focal_sum = 0.0;
    let mut mse_sum = 0.0;

    let mut d_head = vec![0.0; n * h];
    let mut d_tail = vec![0.0; n * h];
    let mut d_dist = vec![0.0; layout.buckets * h];
    let mut z = vec![0.0; h];
    let mut dz = vec![0.0; h];

    let lw = layout.label_weight;
    let sw = layout.score_weight;
    for i in 0..n {
        for j in 0..n {
            cell_hidden(layout, w, &cache, i, j, &mut z);
            let (logits, s_pre) = cell_heads(layout, w, &z);
            let probs = softmax3(logits);
            let (fl, d_fl) = focal_cell(&probs, gold.get(i, j).index(), cfg.gamma);
            focal_sum += fl;
            let d_logits = d_fl.map(|v| cfg.alpha * v);

            let mut d_score = 0.0;
            if let Some(&y) = targets.get(&(i, j)) {
                let s = sigmoid(s_pre);
                mse_sum += (s - y) * (s - y);
                d_score = mse_weight * 2.0 * (s - y) * s * (1.0 - s);
            }

            for v in dz.iter_mut() {
                *v = 0.0;
            }
            outer_add(&mut g, lw, &d_logits, &z);
            for c in 0..3 {
                g[layout.label_bias.offset + c] += d_logits[c];
            }
            matvec_t_add(w, lw, &d_logits, &mut dz);
            if d_score != 0.0 {
                outer_add(&mut g, sw, &[d_score], &z);
                g[layout.score_bias.offset] += d_score;
                matvec_t_add(w, sw, &[d_score], &mut dz);
            }

            let bucket = distance_bucket(j as isize - i as isize, layout.buckets);
            for k in 0..h {
                let da = dz[k] * (1.0 - z[k] * z[k]);
                g[layout.pair_bias.offset + k] += da;
                d_head[i * h + k] += da;
                d_tail[j * h + k] += da;
                d_dist[bucket * h + k] += da;
            }
        }
    }
    let loss = cfg.alpha * focal_sum + mse_weight * mse_sum;

    // pair layer: W = [W_head | W_tail | W_dist]
    let pw = layout.pair_weight;
    let mut d_out = vec![0.0; n * 2 * h];
    for t in 0..n {
        let r = &cache.output[t * 2 * h..(t + 1) * 2 * h];
        let dr = &mut d_out[t * 2 * h..(t + 1) * 2 * h];
        for row in 0..h {
            let base = pw.offset + row * pw.cols;
            let dh = d_head[t * h + row];
            let dt = d_tail[t * h + row];
            for c in 0..2 * h {
                g[base + c] += dh * r[c];
                g[base + 2 * h + c] += dt * r[c];
                dr[c] += dh * w[base + c] + dt * w[base + 2 * h + c];
            }
        }
    }
    let de = layout.distance_embedding;
    for b in 0..layout.buckets {
        let d = &w[de.offset + b * e..de.offset + (b + 1) * e];
        for row in 0..h {
            let db = d_dist[b * h + row];
            if db == 0.0 {
                continue;
            }
            let base = pw.offset + row * pw.cols + 4 * h;
            for c in 0..e {
                g[base + c] += db * d[c];
                g[de.offset + b * e + c] += db * w[base + c];
            }
        }
    }

    // encoder, last layer first
    for (layer_idx, layer) in layout.rnn.iter().enumerate().rev() {
        let input = &cache.inputs[layer_idx];
        let dim = layer[0].w_in.cols;
        let mut d_input = vec![0.0; n * dim];
        for (d, blocks) in layer.iter().enumerate() {
            let states = &cache.states[layer_idx][d];
            // reverse of the direction's processing order
            let order: Vec<usize> = if d == 0 { (0..n).rev().collect() } else { (0..n).collect() };
            let mut carry = vec![0.0; h];
            for &t in &order {
                let state = &states[t * h..(t + 1) * h];
                let mut da = vec![0.0; h];
                for k in 0..h {
                    let up = d_out[t * 2 * h + d * h + k] + carry[k];
                    da[k] = up * (1.0 - state[k] * state[k]);
                }
                outer_add(&mut g, blocks.w_in, &da, &input[t * dim..(t + 1) * dim]);
                for k in 0..h {
                    g[blocks.bias.offset + k] += da[k];
                }
                matvec_t_add(w, blocks.w_in, &da, &mut d_input[t * dim..(t + 1) * dim]);
                let prev = if d == 0 { t.checked_sub(1) } else { Some(t + 1).filter(|&p| p < n) };
                carry = vec![0.0; h];
                if let Some(p) = prev {
                    outer_add(&mut g, blocks.w_rec, &da, &states[p * h..(p + 1) * h]);
                    matvec_t_add(w, blocks.w_rec, &da, &mut carry);
                }
            }
        }
        d_out = d_input;
    }

    let emb = layout.token_embedding;
    for (t, &id) in ids.iter().enumerate() {
        for c in 0..e {
            g[emb.offset + id * e + c] += d_out[t * e + c];
        }
    }

    (loss, Gradient { values: g })
}
