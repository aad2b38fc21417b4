use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::attention::{attend_backward, attend_cached, AttCache, AttentionParams};
use super::lstm::{step_backward, step_cached, LstmCache, LstmParams};
use super::tensor::{argmax, axpy, softmax, Mat};
use super::Seq2SeqError;

/// Which label sequence a model emits. Relation models take a one-hot act
/// alongside each shot's features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Acts,
    Relations,
}

/// All trainable tensors. Gradients and Adam moments use the same shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    /// One row per label plus a final begin-of-sequence row.
    pub embedding: Mat,
    pub encoder: LstmParams,
    pub decoder: LstmParams,
    pub attention: AttentionParams,
    /// Maps `[s_t; ctx_t]` to label scores.
    pub out_w: Mat,
    pub out_b: Mat,
}

impl Params {
    pub fn tensors(&self) -> Vec<(&'static str, &Mat)> {
        vec![
            ("embedding", &self.embedding),
            ("encoder.w", &self.encoder.w),
            ("encoder.b", &self.encoder.b),
            ("decoder.w", &self.decoder.w),
            ("decoder.b", &self.decoder.b),
            ("attention.w1", &self.attention.w1),
            ("attention.w2", &self.attention.w2),
            ("attention.v", &self.attention.v),
            ("output.w", &self.out_w),
            ("output.b", &self.out_b),
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Mat)> {
        vec![
            ("embedding", &mut self.embedding),
            ("encoder.w", &mut self.encoder.w),
            ("encoder.b", &mut self.encoder.b),
            ("decoder.w", &mut self.decoder.w),
            ("decoder.b", &mut self.decoder.b),
            ("attention.w1", &mut self.attention.w1),
            ("attention.w2", &mut self.attention.w2),
            ("attention.v", &mut self.attention.v),
            ("output.w", &mut self.out_w),
            ("output.b", &mut self.out_b),
        ]
    }

    pub fn zeros_like(&self) -> Params {
        let mut p = self.clone();
        for (_, t) in p.tensors_mut() {
            t.data.iter_mut().for_each(|x| *x = 0.0);
        }
        p
    }

    pub fn norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|(_, t)| t.data.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, a: f64) {
        for (_, t) in self.tensors_mut() {
            t.data.iter_mut().for_each(|x| *x *= a);
        }
    }

    pub fn add(&mut self, other: &Params) {
        for ((_, a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            axpy(&mut a.data, 1.0, &b.data);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelShape {
    pub input_dim: usize,
    pub hidden_size: usize,
    pub embed_dim: usize,
    pub n_labels: usize,
}

/// Encoder-decoder LSTM with additive attention. The decoder starts from the
/// encoder's final state; step `t` attends with `s_{t-1}`, reads
/// `[emb(y_{t-1}); ctx_t; h_t]` where `h_t` is the encoder state of shot `t`,
/// and scores labels from `[s_t; ctx_t]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncDecModel {
    pub task: Task,
    pub shape: ModelShape,
    pub dropout_p: f64,
    pub params: Params,
}

impl EncDecModel {
    pub fn new(task: Task, shape: ModelShape, dropout_p: f64, seed: u64) -> Result<Self, Seq2SeqError> {
        let ModelShape {
            input_dim,
            hidden_size: h,
            embed_dim: e,
            n_labels: l,
        } = shape;
        if input_dim == 0 || h == 0 || e == 0 || l == 0 {
            return Err(Seq2SeqError::Config("model dimensions must be positive".into()));
        }
        if !(0.0..1.0).contains(&dropout_p) {
            return Err(Seq2SeqError::Config(format!("dropout_p must lie in [0, 1), got {}", dropout_p)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = 1.0 / (h as f64).sqrt();
        let params = Params {
            embedding: Mat::uniform(l + 1, e, s, &mut rng),
            encoder: LstmParams::new(input_dim, h, &mut rng),
            decoder: LstmParams::new(e + 2 * h, h, &mut rng),
            attention: AttentionParams::new(h, h, h, &mut rng),
            out_w: Mat::uniform(l, 2 * h, s, &mut rng),
            out_b: Mat::zeros(l, 1),
        };
        Ok(EncDecModel {
            task,
            shape,
            dropout_p,
            params,
        })
    }

    /// Checks that every tensor has the shape implied by `shape`.
    pub fn check_shapes(&self) -> Result<(), Seq2SeqError> {
        let ModelShape {
            input_dim,
            hidden_size: h,
            embed_dim: e,
            n_labels: l,
        } = self.shape;
        let p = &self.params;
        let expect = [
            (&p.embedding, l + 1, e),
            (&p.encoder.w, 4 * h, input_dim + h),
            (&p.encoder.b, 4 * h, 1),
            (&p.decoder.w, 4 * h, e + 3 * h),
            (&p.decoder.b, 4 * h, 1),
            (&p.attention.w1, h, h),
            (&p.attention.w2, h, h),
            (&p.attention.v, h, 1),
            (&p.out_w, l, 2 * h),
            (&p.out_b, l, 1),
        ];
        for ((name, _), (m, r, c)) in p.tensors().into_iter().zip(expect) {
            if m.rows != r || m.cols != c || !m.is_consistent() {
                return Err(Seq2SeqError::Checkpoint(format!(
                    "{} is {}x{}, expected {}x{}",
                    name, m.rows, m.cols, r, c
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, Seq2SeqError> {
        let m: EncDecModel = serde_json::from_str(text).map_err(|e| Seq2SeqError::Checkpoint(e.to_string()))?;
        m.check_shapes()?;
        Ok(m)
    }

    fn check_inputs(&self, inputs: &[Vec<f64>]) -> Result<(), Seq2SeqError> {
        if inputs.is_empty() {
            return Err(Seq2SeqError::EmptySequence);
        }
        if let Some(x) = inputs.iter().find(|x| x.len() != self.shape.input_dim) {
            return Err(Seq2SeqError::Shape {
                what: "shot input",
                expected: self.shape.input_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    fn check_labels(&self, inputs: &[Vec<f64>], labels: &[usize]) -> Result<(), Seq2SeqError> {
        if labels.len() != inputs.len() {
            return Err(Seq2SeqError::Shape {
                what: "label sequence",
                expected: inputs.len(),
                got: labels.len(),
            });
        }
        if let Some(&y) = labels.iter().find(|&&y| y >= self.shape.n_labels) {
            return Err(Seq2SeqError::Shape {
                what: "label index bound",
                expected: self.shape.n_labels,
                got: y + 1,
            });
        }
        Ok(())
    }
}

/// Per-step output of a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub distributions: Vec<Vec<f64>>,
    pub attention: Vec<Vec<f64>>,
    /// Greedy choices, or the teacher labels when forcing.
    pub labels: Vec<usize>,
    /// `-Σ log p(gold_t)` when teacher labels were given.
    pub loss: Option<f64>,
}

struct StepTrace {
    prev_label: usize,
    s_prev: Vec<f64>,
    att: AttCache,
    lstm: LstmCache,
    mask: Option<Vec<f64>>,
    out_in: Vec<f64>,
}

struct Trace {
    enc_states: Vec<Vec<f64>>,
    enc_caches: Vec<LstmCache>,
    steps: Vec<StepTrace>,
    out: ForwardOutput,
}

fn run(model: &EncDecModel, inputs: &[Vec<f64>], teacher: Option<&[usize]>, mut dropout: Option<&mut ChaCha8Rng>) -> Trace {
    let p = &model.params;
    let h = model.shape.hidden_size;
    let mut hs = vec![0.0; h];
    let mut cs = vec![0.0; h];
    let mut enc_states = Vec::with_capacity(inputs.len());
    let mut enc_caches = Vec::with_capacity(inputs.len());
    for x in inputs {
        let (h2, c2, cache) = step_cached(&p.encoder, x, &hs, &cs);
        enc_states.push(h2.clone());
        enc_caches.push(cache);
        hs = h2;
        cs = c2;
    }
    let proj: Vec<Vec<f64>> = enc_states.iter().map(|e| p.attention.w1.matvec(e)).collect();

    let keep = 1.0 - model.dropout_p;
    let mut s = hs;
    let mut c = cs;
    let mut prev = model.shape.n_labels;
    let mut steps = Vec::with_capacity(inputs.len());
    let mut out = ForwardOutput {
        distributions: Vec::new(),
        attention: Vec::new(),
        labels: Vec::new(),
        loss: teacher.map(|_| 0.0),
    };
    for t in 0..inputs.len() {
        let (ctx, att) = attend_cached(&p.attention, &s, &enc_states, &proj);
        let mut dec_in = p.embedding.row(prev).to_vec();
        dec_in.extend_from_slice(&ctx);
        dec_in.extend_from_slice(&enc_states[t]);
        let (s2, c2, lstm) = step_cached(&p.decoder, &dec_in, &s, &c);
        let mask = match dropout.as_deref_mut() {
            Some(rng) if model.dropout_p > 0.0 => Some(
                (0..h)
                    .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
                    .collect::<Vec<f64>>(),
            ),
            _ => None,
        };
        let mut out_in: Vec<f64> = match &mask {
            Some(m) => s2.iter().zip(m).map(|(a, b)| a * b).collect(),
            None => s2.clone(),
        };
        out_in.extend_from_slice(&ctx);
        let mut logits = p.out_w.matvec(&out_in);
        axpy(&mut logits, 1.0, &p.out_b.data);
        let dist = softmax(&logits);
        let next = match teacher {
            Some(y) => {
                *out.loss.as_mut().expect("teacher implies loss") -= dist[y[t]].ln();
                y[t]
            }
            None => argmax(&dist),
        };
        out.attention.push(att.weights.clone());
        out.distributions.push(dist);
        out.labels.push(next);
        steps.push(StepTrace {
            prev_label: prev,
            s_prev: std::mem::replace(&mut s, s2),
            att,
            lstm,
            mask,
            out_in,
        });
        c = c2;
        prev = next;
    }
    Trace {
        enc_states,
        enc_caches,
        steps,
        out,
    }
}

/// Evaluation-mode pass: no dropout. Teacher forcing when `teacher` is given,
/// greedy feedback otherwise.
pub fn forward(model: &EncDecModel, inputs: &[Vec<f64>], teacher: Option<&[usize]>) -> Result<ForwardOutput, Seq2SeqError> {
    model.check_inputs(inputs)?;
    if let Some(y) = teacher {
        model.check_labels(inputs, y)?;
    }
    Ok(run(model, inputs, teacher, None).out)
}

/// Teacher-forced loss `-Σ log p(gold_t)` and its gradient. Dropout is
/// applied when a generator is supplied.
pub fn loss_and_grad(
    model: &EncDecModel,
    inputs: &[Vec<f64>],
    labels: &[usize],
    dropout: Option<&mut ChaCha8Rng>,
) -> Result<(f64, Params), Seq2SeqError> {
    model.check_inputs(inputs)?;
    model.check_labels(inputs, labels)?;
    let p = &model.params;
    let h = model.shape.hidden_size;
    let e = model.shape.embed_dim;
    let tr = run(model, inputs, Some(labels), dropout);
    let mut g = p.zeros_like();
    let n = inputs.len();
    let mut d_enc = vec![vec![0.0; h]; n];
    let mut d_proj = vec![vec![0.0; h]; n];
    let mut ds = vec![0.0; h];
    let mut dc = vec![0.0; h];
    for t in (0..n).rev() {
        let st = &tr.steps[t];
        let mut dlogits = tr.out.distributions[t].clone();
        dlogits[labels[t]] -= 1.0;
        g.out_w.add_outer(&dlogits, &st.out_in);
        g.out_b.add_vec(&dlogits);
        let d_out_in = p.out_w.matvec_t(&dlogits);
        let (d_s_out, d_ctx_out) = d_out_in.split_at(h);
        match &st.mask {
            Some(m) => ds.iter_mut().zip(d_s_out.iter().zip(m)).for_each(|(a, (b, k))| *a += b * k),
            None => axpy(&mut ds, 1.0, d_s_out),
        }
        let (d_in, ds_prev, dc_prev) = step_backward(&p.decoder, &st.lstm, &ds, &dc, &mut g.decoder);
        axpy(g.embedding.row_mut(st.prev_label), 1.0, &d_in[..e]);
        let mut dctx = d_in[e..e + h].to_vec();
        axpy(&mut d_enc[t], 1.0, &d_in[e + h..]);
        axpy(&mut dctx, 1.0, d_ctx_out);
        let ds_att = attend_backward(
            &p.attention,
            &st.att,
            &st.s_prev,
            &tr.enc_states,
            &dctx,
            &mut g.attention,
            &mut d_enc,
            &mut d_proj,
        );
        ds = ds_prev;
        axpy(&mut ds, 1.0, &ds_att);
        dc = dc_prev;
    }
    for i in 0..n {
        g.attention.w1.add_outer(&d_proj[i], &tr.enc_states[i]);
        let back = p.attention.w1.matvec_t(&d_proj[i]);
        axpy(&mut d_enc[i], 1.0, &back);
    }
    // the decoder's initial state is the encoder's final state
    let (mut dh, mut dcell) = (ds, dc);
    for t in (0..n).rev() {
        axpy(&mut dh, 1.0, &d_enc[t]);
        let (_, dh_prev, dc_prev) = step_backward(&p.encoder, &tr.enc_caches[t], &dh, &dcell, &mut g.encoder);
        dh = dh_prev;
        dcell = dc_prev;
    }
    Ok((tr.out.loss.expect("teacher forced"), g))
}

/// Summed evaluation-mode loss over a batch.
pub fn batch_loss(model: &EncDecModel, batch: &[(Vec<Vec<f64>>, Vec<usize>)]) -> Result<f64, Seq2SeqError> {
    let mut total = 0.0;
    for (x, y) in batch {
        total += forward(model, x, Some(y))?.loss.expect("teacher forced");
    }
    Ok(total)
}
