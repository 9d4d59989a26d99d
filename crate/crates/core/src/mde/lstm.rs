use rand::Rng;

use crate::error::{Error, Result};
use crate::sequence::ObservationSequence;

/// Single-layer LSTM with a ReLU scalar readout.
///
/// Parameters live in one flat vector laid out as
/// `[W_x (4H×D) | W_h (4H×H) | b (4H) | w_out (H) | b_out]`, gate blocks in
/// the order input, forget, output, candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmNet {
    input_dim: usize,
    hidden_dim: usize,
    params: Vec<f64>,
}

/// Per-unit dropout mask on the hidden state, shared across time steps.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask {
    pub keep: Vec<f64>,
    pub rate: f64,
}

impl DropoutMask {
    pub fn sample<R: Rng + ?Sized>(hidden: usize, rate: f64, rng: &mut R) -> Self {
        let keep = (0..hidden)
            .map(|_| if rng.random::<f64>() < rate { 0.0 } else { 1.0 })
            .collect();
        Self { keep, rate }
    }

    fn factor(&self, unit: usize) -> f64 {
        self.keep[unit] / (1.0 - self.rate)
    }
}

/// Gradient with the same layout as [`LstmNet::params`].
pub type LstmGradient = Vec<f64>;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

struct StepCache {
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    o: Vec<f64>,
    g: Vec<f64>,
    tanh_c: Vec<f64>,
}

impl LstmNet {
    /// Uniform init in `±1/sqrt(H)`; the readout bias starts at 0.5 (the
    /// balanced-label mean) so the output ReLU is active from the first step.
    pub fn new<R: Rng + ?Sized>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (hidden_dim as f64).sqrt();
        let n = Self::param_count(input_dim, hidden_dim);
        let mut params: Vec<f64> = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
        params[n - 1] = 0.5;
        Self {
            input_dim,
            hidden_dim,
            params,
        }
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dim,
            params: vec![0.0; Self::param_count(input_dim, hidden_dim)],
        }
    }

    pub fn from_params(input_dim: usize, hidden_dim: usize, params: Vec<f64>) -> Result<Self> {
        if params.len() != Self::param_count(input_dim, hidden_dim) {
            return Err(Error::Dimension(format!(
                "LSTM {input_dim}->{hidden_dim} needs {} parameters, got {}",
                Self::param_count(input_dim, hidden_dim),
                params.len()
            )));
        }
        crate::error::ensure_finite(&params, "LSTM parameters")?;
        Ok(Self {
            input_dim,
            hidden_dim,
            params,
        })
    }

    pub fn param_count(input_dim: usize, hidden_dim: usize) -> usize {
        4 * hidden_dim * input_dim + 4 * hidden_dim * hidden_dim + 4 * hidden_dim + hidden_dim + 1
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn offsets(&self) -> (usize, usize, usize, usize, usize) {
        let (d, h) = (self.input_dim, self.hidden_dim);
        let wx = 0;
        let wh = wx + 4 * h * d;
        let b = wh + 4 * h * h;
        let wr = b + 4 * h;
        let br = wr + h;
        (wx, wh, b, wr, br)
    }

    fn check(&self, seq: &ObservationSequence) -> Result<()> {
        if seq.dim() != self.input_dim {
            return Err(Error::Dimension(format!(
                "LSTM expects {} features, sequence has {}",
                self.input_dim,
                seq.dim()
            )));
        }
        Ok(())
    }

    fn run(&self, seq: &ObservationSequence, mask: Option<&DropoutMask>, mut caches: Option<&mut Vec<StepCache>>) -> (f64, Vec<f64>) {
        let (d, hd) = (self.input_dim, self.hidden_dim);
        let (wx, wh, b, wr, br) = self.offsets();
        let p = &self.params;
        let mut h = vec![0.0; hd];
        let mut c = vec![0.0; hd];
        let mut z = vec![0.0; 4 * hd];
        for x in seq.steps() {
            for r in 0..4 * hd {
                let mut acc = p[b + r];
                let row_x = &p[wx + r * d..wx + (r + 1) * d];
                for j in 0..d {
                    acc += row_x[j] * x[j];
                }
                let row_h = &p[wh + r * hd..wh + (r + 1) * hd];
                for j in 0..hd {
                    acc += row_h[j] * h[j];
                }
                z[r] = acc;
            }
            let i: Vec<f64> = z[..hd].iter().map(|&v| sigmoid(v)).collect();
            let f: Vec<f64> = z[hd..2 * hd].iter().map(|&v| sigmoid(v)).collect();
            let o: Vec<f64> = z[2 * hd..3 * hd].iter().map(|&v| sigmoid(v)).collect();
            let g: Vec<f64> = z[3 * hd..].iter().map(|&v| v.tanh()).collect();
            let c_prev = c.clone();
            let h_prev = h.clone();
            for u in 0..hd {
                c[u] = f[u] * c_prev[u] + i[u] * g[u];
            }
            let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
            for u in 0..hd {
                h[u] = o[u] * tanh_c[u];
                if let Some(m) = mask {
                    h[u] *= m.factor(u);
                }
            }
            if let Some(cache) = caches.as_deref_mut() {
                cache.push(StepCache {
                    h_prev,
                    c_prev,
                    i,
                    f,
                    o,
                    g,
                    tanh_c,
                });
            }
        }
        let mut pre = p[br];
        for u in 0..hd {
            pre += p[wr + u] * h[u];
        }
        (pre, h)
    }

    /// Forward pass; see [`lstm_forward`].
    pub fn forward(&self, seq: &ObservationSequence, mask: Option<&DropoutMask>) -> Result<f64> {
        self.check(seq)?;
        if let Some(m) = mask {
            if m.keep.len() != self.hidden_dim {
                return Err(Error::Dimension("dropout mask length differs from hidden size".into()));
            }
        }
        Ok(self.run(seq, mask, None).0.max(0.0))
    }

    /// Squared error `(out - y)^2` and its gradient, by backpropagation
    /// through time without dropout.
    pub fn loss_gradient(&self, seq: &ObservationSequence, target: f64) -> Result<(f64, LstmGradient)> {
        self.check(seq)?;
        let (d, hd) = (self.input_dim, self.hidden_dim);
        let (wx, wh, b, wr, br) = self.offsets();
        let p = &self.params;
        let mut caches = Vec::with_capacity(seq.len());
        let (pre, h_last) = self.run(seq, None, Some(&mut caches));
        let out = pre.max(0.0);
        let err = out - target;
        let mut grad = vec![0.0; p.len()];
        let d_pre = if pre > 0.0 { 2.0 * err } else { 0.0 };
        if d_pre == 0.0 {
            return Ok((err * err, grad));
        }
        grad[br] = d_pre;
        let mut dh = vec![0.0; hd];
        for u in 0..hd {
            grad[wr + u] = d_pre * h_last[u];
            dh[u] = d_pre * p[wr + u];
        }
        let mut dc = vec![0.0; hd];
        let mut dz = vec![0.0; 4 * hd];
        for (t, cache) in caches.iter().enumerate().rev() {
            let x = seq.step(t);
            for u in 0..hd {
                let (i, f, o, g, tc) = (cache.i[u], cache.f[u], cache.o[u], cache.g[u], cache.tanh_c[u]);
                let d_o = dh[u] * tc;
                dc[u] += dh[u] * o * (1.0 - tc * tc);
                let d_i = dc[u] * g;
                let d_g = dc[u] * i;
                let d_f = dc[u] * cache.c_prev[u];
                dz[u] = d_i * i * (1.0 - i);
                dz[hd + u] = d_f * f * (1.0 - f);
                dz[2 * hd + u] = d_o * o * (1.0 - o);
                dz[3 * hd + u] = d_g * (1.0 - g * g);
                dc[u] *= f;
            }
            let mut dh_prev = vec![0.0; hd];
            for r in 0..4 * hd {
                let gz = dz[r];
                if gz == 0.0 {
                    continue;
                }
                grad[b + r] += gz;
                for j in 0..d {
                    grad[wx + r * d + j] += gz * x[j];
                }
                for j in 0..hd {
                    grad[wh + r * hd + j] += gz * cache.h_prev[j];
                    dh_prev[j] += gz * p[wh + r * hd + j];
                }
            }
            dh = dh_prev;
        }
        Ok((err * err, grad))
    }
}

/// Standard LSTM recursion with sigmoid gates and tanh candidate, then
/// `ReLU(w_out · h_T + b_out)`. A mask zeroes hidden units and rescales the
/// survivors by `1/(1 - rate)` at every step.
pub fn lstm_forward(net: &LstmNet, seq: &ObservationSequence, mask: Option<&DropoutMask>) -> Result<f64> {
    net.forward(seq, mask)
}
