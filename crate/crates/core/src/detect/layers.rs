//! Differentiable building blocks. Each `backward` accumulates parameter
//! gradients into caller-provided tensors in the same order as the layer's
//! parameters.

use rand::Rng;

use super::tensor::{sigmoid, Tensor};

/// y = W x + b with W stored out x in.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Tensor,
    pub b: Tensor,
}

impl Dense {
    pub fn new(input: usize, output: usize, rng: &mut impl Rng) -> Dense {
        Dense { w: Tensor::glorot(&[output, input], input, output, rng), b: Tensor::zeros(&[output]) }
    }

    pub fn input(&self) -> usize {
        self.w.shape[1]
    }

    pub fn output(&self) -> usize {
        self.w.shape[0]
    }

    pub fn forward(&self, x: &[f64], y: &mut [f64]) {
        let n_in = self.input();
        for (o, yo) in y.iter_mut().enumerate() {
            let row = &self.w.data[o * n_in..(o + 1) * n_in];
            *yo = self.b.data[o] + row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>();
        }
    }

    /// Accumulates into `g = [dW, db]` and adds W^T dy into `dx` when given.
    pub fn backward(&self, x: &[f64], dy: &[f64], g: &mut [Tensor], dx: Option<&mut [f64]>) {
        let n_in = self.input();
        let (gw, gb) = g.split_at_mut(1);
        for (o, &d) in dy.iter().enumerate() {
            gb[0].data[o] += d;
            let grow = &mut gw[0].data[o * n_in..(o + 1) * n_in];
            for (gw, xv) in grow.iter_mut().zip(x) {
                *gw += d * xv;
            }
        }
        if let Some(dx) = dx {
            for (o, &d) in dy.iter().enumerate() {
                let row = &self.w.data[o * n_in..(o + 1) * n_in];
                for (dxi, w) in dx.iter_mut().zip(row) {
                    *dxi += d * w;
                }
            }
        }
    }

    pub fn params(&self) -> [&Tensor; 2] {
        [&self.w, &self.b]
    }

    pub fn params_mut(&mut self) -> [&mut Tensor; 2] {
        [&mut self.w, &mut self.b]
    }
}

/// Single-layer LSTM with gate order (input, forget, cell, output).
#[derive(Debug, Clone, PartialEq)]
pub struct Lstm {
    /// 4H x I
    pub w_x: Tensor,
    /// 4H x H
    pub w_h: Tensor,
    /// 4H
    pub b: Tensor,
}

/// Activations kept for backpropagation through time.
pub struct LstmTrace {
    pub steps: usize,
    /// Post-activation gates, steps x 4H.
    gates: Vec<f64>,
    /// Cell states c_0..c_T, (T+1) x H.
    c: Vec<f64>,
    /// Hidden states h_0..h_T, (T+1) x H.
    h: Vec<f64>,
    hidden: usize,
}

impl LstmTrace {
    /// Hidden state after step `t` (1-based; 0 is the initial state).
    pub fn h(&self, t: usize) -> &[f64] {
        &self.h[t * self.hidden..(t + 1) * self.hidden]
    }

    pub fn last(&self) -> &[f64] {
        self.h(self.steps)
    }
}

impl Lstm {
    pub fn new(input: usize, hidden: usize, rng: &mut impl Rng) -> Lstm {
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut b = Tensor::zeros(&[4 * hidden]);
        b.data[hidden..2 * hidden].iter_mut().for_each(|v| *v = 1.0);
        Lstm {
            w_x: Tensor::uniform(&[4 * hidden, input], bound, rng),
            w_h: Tensor::uniform(&[4 * hidden, hidden], bound, rng),
            b,
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_h.shape[1]
    }

    pub fn input(&self) -> usize {
        self.w_x.shape[1]
    }

    /// Run over `xs` (steps x I, row-major).
    pub fn forward(&self, xs: &[f64]) -> LstmTrace {
        let (hn, inp) = (self.hidden(), self.input());
        let steps = xs.len() / inp;
        let mut gates = vec![0.0; steps * 4 * hn];
        let mut c = vec![0.0; (steps + 1) * hn];
        let mut h = vec![0.0; (steps + 1) * hn];
        let mut a = vec![0.0; 4 * hn];
        for t in 0..steps {
            let x = &xs[t * inp..(t + 1) * inp];
            let h_prev = &h[t * hn..(t + 1) * hn];
            for (r, ar) in a.iter_mut().enumerate() {
                let wx = &self.w_x.data[r * inp..(r + 1) * inp];
                let wh = &self.w_h.data[r * hn..(r + 1) * hn];
                let mut s = self.b.data[r];
                for (w, v) in wx.iter().zip(x) {
                    s += w * v;
                }
                for (w, v) in wh.iter().zip(h_prev) {
                    s += w * v;
                }
                *ar = s;
            }
            let g = &mut gates[t * 4 * hn..(t + 1) * 4 * hn];
            for j in 0..hn {
                g[j] = sigmoid(a[j]);
                g[hn + j] = sigmoid(a[hn + j]);
                g[2 * hn + j] = a[2 * hn + j].tanh();
                g[3 * hn + j] = sigmoid(a[3 * hn + j]);
            }
            let (c_prev_all, c_next_all) = c.split_at_mut((t + 1) * hn);
            let c_prev = &c_prev_all[t * hn..];
            let c_new = &mut c_next_all[..hn];
            let h_new = &mut h[(t + 1) * hn..(t + 2) * hn];
            for j in 0..hn {
                c_new[j] = g[hn + j] * c_prev[j] + g[j] * g[2 * hn + j];
                h_new[j] = g[3 * hn + j] * c_new[j].tanh();
            }
        }
        LstmTrace { steps, gates, c, h, hidden: hn }
    }

    /// Backpropagation through time. `dh` holds dL/dh_t for t = 1..=T
    /// (steps x H). Accumulates into `g = [dW_x, dW_h, db]` and writes
    /// dL/dx_t into `dx` when given.
    pub fn backward(&self, xs: &[f64], tr: &LstmTrace, dh: &[f64], g: &mut [Tensor], mut dx: Option<&mut [f64]>) {
        let (hn, inp) = (self.hidden(), self.input());
        let mut dh_next = vec![0.0; hn];
        let mut dc_next = vec![0.0; hn];
        let mut da = vec![0.0; 4 * hn];
        let (gx, rest) = g.split_at_mut(1);
        let (gh, gb) = rest.split_at_mut(1);
        for t in (0..tr.steps).rev() {
            let gt = &tr.gates[t * 4 * hn..(t + 1) * 4 * hn];
            let c_prev = &tr.c[t * hn..(t + 1) * hn];
            let c_cur = &tr.c[(t + 1) * hn..(t + 2) * hn];
            let h_prev = &tr.h[t * hn..(t + 1) * hn];
            for j in 0..hn {
                let (i, f, gg, o) = (gt[j], gt[hn + j], gt[2 * hn + j], gt[3 * hn + j]);
                let tc = c_cur[j].tanh();
                let dhj = dh[t * hn + j] + dh_next[j];
                let dc = dc_next[j] + dhj * o * (1.0 - tc * tc);
                da[j] = dc * gg * i * (1.0 - i);
                da[hn + j] = dc * c_prev[j] * f * (1.0 - f);
                da[2 * hn + j] = dc * i * (1.0 - gg * gg);
                da[3 * hn + j] = dhj * tc * o * (1.0 - o);
                dc_next[j] = dc * f;
            }
            let x = &xs[t * inp..(t + 1) * inp];
            dh_next.iter_mut().for_each(|v| *v = 0.0);
            for (r, &d) in da.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                gb[0].data[r] += d;
                let gxr = &mut gx[0].data[r * inp..(r + 1) * inp];
                for (gw, v) in gxr.iter_mut().zip(x) {
                    *gw += d * v;
                }
                let ghr = &mut gh[0].data[r * hn..(r + 1) * hn];
                for (gw, v) in ghr.iter_mut().zip(h_prev) {
                    *gw += d * v;
                }
                let whr = &self.w_h.data[r * hn..(r + 1) * hn];
                for (acc, w) in dh_next.iter_mut().zip(whr) {
                    *acc += d * w;
                }
            }
            if let Some(dx) = dx.as_deref_mut() {
                let dxt = &mut dx[t * inp..(t + 1) * inp];
                for (r, &d) in da.iter().enumerate() {
                    let wxr = &self.w_x.data[r * inp..(r + 1) * inp];
                    for (acc, w) in dxt.iter_mut().zip(wxr) {
                        *acc += d * w;
                    }
                }
            }
        }
    }

    pub fn params(&self) -> [&Tensor; 3] {
        [&self.w_x, &self.w_h, &self.b]
    }

    pub fn params_mut(&mut self) -> [&mut Tensor; 3] {
        [&mut self.w_x, &mut self.w_h, &mut self.b]
    }
}

/// Causal dilated 1-D convolution over channel-major (C x T) activations.
/// Output at t sees inputs t - (K-1-k)·d for k in 0..K, zero-padded on the left.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalConv {
    /// C_out x C_in x K
    pub w: Tensor,
    pub b: Tensor,
    pub dilation: usize,
}

impl CausalConv {
    pub fn new(c_in: usize, c_out: usize, kernel: usize, dilation: usize, rng: &mut impl Rng) -> CausalConv {
        CausalConv {
            w: Tensor::glorot(&[c_out, c_in, kernel], c_in * kernel, c_out * kernel, rng),
            b: Tensor::zeros(&[c_out]),
            dilation,
        }
    }

    fn dims(&self) -> (usize, usize, usize) {
        (self.w.shape[0], self.w.shape[1], self.w.shape[2])
    }

    pub fn c_out(&self) -> usize {
        self.w.shape[0]
    }

    pub fn forward(&self, x: &[f64], steps: usize) -> Vec<f64> {
        let (co, ci, k) = self.dims();
        let mut y = vec![0.0; co * steps];
        for o in 0..co {
            let yo = &mut y[o * steps..(o + 1) * steps];
            yo.iter_mut().for_each(|v| *v = self.b.data[o]);
            for c in 0..ci {
                let xc = &x[c * steps..(c + 1) * steps];
                for kk in 0..k {
                    let w = self.w.data[(o * ci + c) * k + kk];
                    let shift = (k - 1 - kk) * self.dilation;
                    if shift >= steps {
                        continue;
                    }
                    for (yv, xv) in yo[shift..].iter_mut().zip(xc) {
                        *yv += w * xv;
                    }
                }
            }
        }
        y
    }

    pub fn backward(&self, x: &[f64], dy: &[f64], steps: usize, g: &mut [Tensor], dx: Option<&mut [f64]>) {
        let (co, ci, k) = self.dims();
        let (gw, gb) = g.split_at_mut(1);
        for o in 0..co {
            let dyo = &dy[o * steps..(o + 1) * steps];
            gb[0].data[o] += dyo.iter().sum::<f64>();
            for c in 0..ci {
                let xc = &x[c * steps..(c + 1) * steps];
                for kk in 0..k {
                    let shift = (k - 1 - kk) * self.dilation;
                    if shift >= steps {
                        continue;
                    }
                    let s: f64 = dyo[shift..].iter().zip(xc).map(|(d, v)| d * v).sum();
                    gw[0].data[(o * ci + c) * k + kk] += s;
                }
            }
        }
        if let Some(dx) = dx {
            for o in 0..co {
                let dyo = &dy[o * steps..(o + 1) * steps];
                for c in 0..ci {
                    let dxc = &mut dx[c * steps..(c + 1) * steps];
                    for kk in 0..k {
                        let shift = (k - 1 - kk) * self.dilation;
                        if shift >= steps {
                            continue;
                        }
                        let w = self.w.data[(o * ci + c) * k + kk];
                        for (dv, d) in dxc.iter_mut().zip(&dyo[shift..]) {
                            *dv += w * d;
                        }
                    }
                }
            }
        }
    }

    pub fn params(&self) -> [&Tensor; 2] {
        [&self.w, &self.b]
    }

    pub fn params_mut(&mut self) -> [&mut Tensor; 2] {
        [&mut self.w, &mut self.b]
    }
}
