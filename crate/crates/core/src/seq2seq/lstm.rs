use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::{sigmoid, Mat};
use super::Seq2SeqError;

/// One LSTM layer. `w` maps `[x; h]` to the stacked pre-activations of the
/// input, forget, output and candidate gates, in that order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub w: Mat,
    pub b: Mat,
}

impl LstmParams {
    pub fn new(input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let scale = 1.0 / (hidden as f64).sqrt();
        let mut b = Mat::zeros(4 * hidden, 1);
        b.data[hidden..2 * hidden].iter_mut().for_each(|x| *x = 1.0);
        LstmParams {
            w: Mat::uniform(4 * hidden, input + hidden, scale, rng),
            b,
        }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmParams {
            w: Mat::zeros(4 * hidden, input + hidden),
            b: Mat::zeros(4 * hidden, 1),
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.w.rows / 4
    }

    pub fn input_size(&self) -> usize {
        self.w.cols - self.hidden_size()
    }
}

/// Values kept from the forward step for backpropagation.
#[derive(Debug, Clone)]
pub(crate) struct LstmCache {
    z: Vec<f64>,
    /// Activated gates `[i; f; o; g]`.
    gates: Vec<f64>,
    c_prev: Vec<f64>,
    tanh_c: Vec<f64>,
}

pub fn lstm_step(
    p: &LstmParams,
    x: &[f64],
    h: &[f64],
    c: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), Seq2SeqError> {
    let hs = p.hidden_size();
    let check = |what: &'static str, expected: usize, got: usize| {
        if expected == got {
            Ok(())
        } else {
            Err(Seq2SeqError::Shape { what, expected, got })
        }
    };
    check("lstm input", p.input_size(), x.len())?;
    check("lstm hidden state", hs, h.len())?;
    check("lstm cell state", hs, c.len())?;
    check("lstm bias", 4 * hs, p.b.data.len())?;
    let (h2, c2, _) = step_cached(p, x, h, c);
    Ok((h2, c2))
}

pub(crate) fn step_cached(p: &LstmParams, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>, LstmCache) {
    let hs = p.hidden_size();
    let mut z = Vec::with_capacity(x.len() + h.len());
    z.extend_from_slice(x);
    z.extend_from_slice(h);
    let mut gates = p.w.matvec(&z);
    for (k, (a, b)) in gates.iter_mut().zip(&p.b.data).enumerate() {
        *a += b;
        *a = if k < 3 * hs { sigmoid(*a) } else { a.tanh() };
    }
    let mut c2 = vec![0.0; hs];
    let mut h2 = vec![0.0; hs];
    let mut tanh_c = vec![0.0; hs];
    for j in 0..hs {
        let (i, f, o, g) = (gates[j], gates[hs + j], gates[2 * hs + j], gates[3 * hs + j]);
        c2[j] = f * c[j] + i * g;
        tanh_c[j] = c2[j].tanh();
        h2[j] = o * tanh_c[j];
    }
    let cache = LstmCache {
        z,
        gates,
        c_prev: c.to_vec(),
        tanh_c,
    };
    (h2, c2, cache)
}

/// Accumulates parameter gradients into `grad` and returns the gradients of
/// the step's input, previous hidden state and previous cell state.
pub(crate) fn step_backward(
    p: &LstmParams,
    cache: &LstmCache,
    dh: &[f64],
    dc_next: &[f64],
    grad: &mut LstmParams,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let hs = p.hidden_size();
    let g = &cache.gates;
    let mut da = vec![0.0; 4 * hs];
    let mut dc_prev = vec![0.0; hs];
    for j in 0..hs {
        let (i, f, o, gg) = (g[j], g[hs + j], g[2 * hs + j], g[3 * hs + j]);
        let tc = cache.tanh_c[j];
        let dc = dc_next[j] + dh[j] * o * (1.0 - tc * tc);
        da[j] = dc * gg * i * (1.0 - i);
        da[hs + j] = dc * cache.c_prev[j] * f * (1.0 - f);
        da[2 * hs + j] = dh[j] * tc * o * (1.0 - o);
        da[3 * hs + j] = dc * i * (1.0 - gg * gg);
        dc_prev[j] = dc * f;
    }
    grad.w.add_outer(&da, &cache.z);
    grad.b.add_vec(&da);
    let mut dz = p.w.matvec_t(&da);
    let dh_prev = dz.split_off(p.input_size());
    (dz, dh_prev, dc_prev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_parameters_give_zero_state() {
        let p = LstmParams::zeros(3, 4);
        let (h, c) = lstm_step(&p, &[1.0, -2.0, 0.5], &[0.0; 4], &[0.0; 4]).unwrap();
        assert_eq!(h, vec![0.0; 4]);
        assert_eq!(c, vec![0.0; 4]);
        // with a non-zero cell only the forget path survives
        let (_, c) = lstm_step(&p, &[1.0, -2.0, 0.5], &[0.0; 4], &[2.0; 4]).unwrap();
        assert_eq!(c, vec![1.0; 4]);
    }

    #[test]
    fn outputs_are_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut p = LstmParams::new(5, 6, &mut rng);
        p.w.data.iter_mut().for_each(|w| *w *= 3.0);
        let x: Vec<f64> = (0..5).map(|i| i as f64 * 3.0 - 7.0).collect();
        let (h, _) = lstm_step(&p, &x, &[0.9; 6], &[4.0; 6]).unwrap();
        assert!(h.iter().all(|v| v.abs() < 1.0));
    }

    #[test]
    fn shape_errors_name_the_operand() {
        let p = LstmParams::zeros(3, 4);
        let err = lstm_step(&p, &[0.0; 2], &[0.0; 4], &[0.0; 4]).unwrap_err();
        assert!(err.to_string().contains("lstm input"));
    }
}
