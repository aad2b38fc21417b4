use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::{axpy, dot, softmax, Mat};
use super::Seq2SeqError;

/// Additive scoring `e_i = vᵀ tanh(W1 h_i + W2 s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionParams {
    pub w1: Mat,
    pub w2: Mat,
    pub v: Mat,
}

impl AttentionParams {
    pub fn new(enc_dim: usize, dec_dim: usize, att_dim: usize, rng: &mut impl Rng) -> Self {
        let s = 1.0 / (att_dim as f64).sqrt();
        AttentionParams {
            w1: Mat::uniform(att_dim, enc_dim, s, rng),
            w2: Mat::uniform(att_dim, dec_dim, s, rng),
            v: Mat::uniform(att_dim, 1, s, rng),
        }
    }

    pub fn zeros(enc_dim: usize, dec_dim: usize, att_dim: usize) -> Self {
        AttentionParams {
            w1: Mat::zeros(att_dim, enc_dim),
            w2: Mat::zeros(att_dim, dec_dim),
            v: Mat::zeros(att_dim, 1),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct AttCache {
    act: Vec<Vec<f64>>,
    pub(crate) weights: Vec<f64>,
}

/// Context vector and alignment weights of `dec_state` over `enc_states`.
pub fn attend(
    p: &AttentionParams,
    dec_state: &[f64],
    enc_states: &[Vec<f64>],
) -> Result<(Vec<f64>, Vec<f64>), Seq2SeqError> {
    if enc_states.is_empty() {
        return Err(Seq2SeqError::EmptySequence);
    }
    if dec_state.len() != p.w2.cols {
        return Err(Seq2SeqError::Shape {
            what: "attention query",
            expected: p.w2.cols,
            got: dec_state.len(),
        });
    }
    if let Some(h) = enc_states.iter().find(|h| h.len() != p.w1.cols) {
        return Err(Seq2SeqError::Shape {
            what: "attention key",
            expected: p.w1.cols,
            got: h.len(),
        });
    }
    let proj: Vec<Vec<f64>> = enc_states.iter().map(|h| p.w1.matvec(h)).collect();
    let (ctx, cache) = attend_cached(p, dec_state, enc_states, &proj);
    Ok((ctx, cache.weights))
}

/// `proj[i]` must be `W1 h_i`; it is shared by every decoder step.
pub(crate) fn attend_cached(
    p: &AttentionParams,
    s: &[f64],
    enc: &[Vec<f64>],
    proj: &[Vec<f64>],
) -> (Vec<f64>, AttCache) {
    let q = p.w2.matvec(s);
    let act: Vec<Vec<f64>> = proj
        .iter()
        .map(|u| u.iter().zip(&q).map(|(a, b)| (a + b).tanh()).collect())
        .collect();
    let scores: Vec<f64> = act.iter().map(|a| dot(&p.v.data, a)).collect();
    let weights = softmax(&scores);
    let mut ctx = vec![0.0; enc[0].len()];
    for (w, h) in weights.iter().zip(enc) {
        axpy(&mut ctx, *w, h);
    }
    (ctx, AttCache { act, weights })
}

/// Backpropagates `dctx`. Gradients reaching the encoder states are added to
/// `d_enc`, those reaching `W1 h_i` to `d_proj`; returns the query gradient.
#[allow(clippy::too_many_arguments)]
pub(crate) fn attend_backward(
    p: &AttentionParams,
    cache: &AttCache,
    s: &[f64],
    enc: &[Vec<f64>],
    dctx: &[f64],
    grad: &mut AttentionParams,
    d_enc: &mut [Vec<f64>],
    d_proj: &mut [Vec<f64>],
) -> Vec<f64> {
    let w = &cache.weights;
    let dw: Vec<f64> = enc.iter().map(|h| dot(dctx, h)).collect();
    let mean: f64 = w.iter().zip(&dw).map(|(a, b)| a * b).sum();
    let mut du_sum = vec![0.0; p.w2.rows];
    for i in 0..enc.len() {
        axpy(&mut d_enc[i], w[i], dctx);
        let de = w[i] * (dw[i] - mean);
        if de == 0.0 {
            continue;
        }
        let a = &cache.act[i];
        axpy(&mut grad.v.data, de, a);
        for k in 0..a.len() {
            let du = de * p.v.data[k] * (1.0 - a[k] * a[k]);
            d_proj[i][k] += du;
            du_sum[k] += du;
        }
    }
    grad.w2.add_outer(&du_sum, s);
    p.w2.matvec_t(&du_sum)
}
