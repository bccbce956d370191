//! The detector architectures. Every net maps a single-channel sequence to
//! three logits in class order (Idle, IoTService, Mirai).

use rand::Rng;

use super::config::{Arch, DetectorConfig};
use super::layers::{CausalConv, Dense, Lstm};
use super::tensor::{softmax_xent, Tensor};

/// Weight of the reconstruction term in the AeMlp loss.
pub const RECON_WEIGHT: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct LstmNet {
    pub lstm: Lstm,
    pub out: Dense,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiLstmNet {
    pub fwd: Lstm,
    pub bwd: Lstm,
    pub out: Dense,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TcnBlock {
    pub conv: CausalConv,
    /// 1x1 projection on the residual path when channel counts differ.
    pub proj: Option<CausalConv>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TcnNet {
    pub blocks: Vec<TcnBlock>,
    pub out: Dense,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AeMlpNet {
    pub enc: Lstm,
    pub to_latent: Dense,
    pub dec: Lstm,
    pub recon: Dense,
    pub h1: Dense,
    pub h2: Dense,
    pub out: Dense,
}

/// Multinomial logistic regression on the raw sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearNet {
    pub out: Dense,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Net {
    Lstm(LstmNet),
    BiLstm(BiLstmNet),
    Tcn(TcnNet),
    AeMlp(AeMlpNet),
    Linear(LinearNet),
}

fn relu_inplace(v: &mut [f64]) {
    v.iter_mut().for_each(|x| *x = x.max(0.0));
}

fn relu_mask(d: &mut [f64], pre: &[f64]) {
    for (d, &p) in d.iter_mut().zip(pre) {
        if p <= 0.0 {
            *d = 0.0;
        }
    }
}

impl Net {
    pub fn new(config: &DetectorConfig, rng: &mut impl Rng) -> Net {
        let (h, f) = (config.hidden, config.frame);
        match config.arch {
            Arch::Lstm => Net::Lstm(LstmNet { lstm: Lstm::new(f, h, rng), out: Dense::new(h, 3, rng) }),
            Arch::BiLstm => Net::BiLstm(BiLstmNet {
                fwd: Lstm::new(f, h, rng),
                bwd: Lstm::new(f, h, rng),
                out: Dense::new(2 * h, 3, rng),
            }),
            Arch::Tcn => {
                let c = config.tcn_channels;
                let mut c_in = 1;
                let blocks = config
                    .tcn_dilations
                    .iter()
                    .map(|&d| {
                        let conv = CausalConv::new(c_in, c, config.kernel, d, rng);
                        let proj = (c_in != c).then(|| CausalConv::new(c_in, c, 1, 1, rng));
                        c_in = c;
                        TcnBlock { conv, proj }
                    })
                    .collect();
                Net::Tcn(TcnNet { blocks, out: Dense::new(c, 3, rng) })
            }
            Arch::AeMlp => {
                let z = config.latent;
                Net::AeMlp(AeMlpNet {
                    enc: Lstm::new(f, h, rng),
                    to_latent: Dense::new(h, z, rng),
                    dec: Lstm::new(z, h, rng),
                    recon: Dense::new(h, f, rng),
                    h1: Dense::new(z + 1, h, rng),
                    h2: Dense::new(h, h, rng),
                    out: Dense::new(h, 3, rng),
                })
            }
        }
    }

    pub fn linear(input: usize, rng: &mut impl Rng) -> Net {
        Net::Linear(LinearNet { out: Dense::new(input, 3, rng) })
    }

    pub fn arch(&self) -> Option<Arch> {
        match self {
            Net::Lstm(_) => Some(Arch::Lstm),
            Net::BiLstm(_) => Some(Arch::BiLstm),
            Net::Tcn(_) => Some(Arch::Tcn),
            Net::AeMlp(_) => Some(Arch::AeMlp),
            Net::Linear(_) => None,
        }
    }

    /// Parameters with stable names, in gradient order.
    pub fn named_params(&self) -> Vec<(String, &Tensor)> {
        fn push<'a>(out: &mut Vec<(String, &'a Tensor)>, prefix: &str, names: &[&str], ts: &[&'a Tensor]) {
            for (n, t) in names.iter().zip(ts) {
                out.push((format!("{prefix}.{n}"), *t));
            }
        }
        const LSTM: [&str; 3] = ["w_x", "w_h", "b"];
        const DENSE: [&str; 2] = ["w", "b"];
        let mut out = Vec::new();
        let o = &mut out;
        match self {
            Net::Lstm(n) => {
                push(o, "lstm", &LSTM, &n.lstm.params());
                push(o, "out", &DENSE, &n.out.params());
            }
            Net::BiLstm(n) => {
                push(o, "fwd", &LSTM, &n.fwd.params());
                push(o, "bwd", &LSTM, &n.bwd.params());
                push(o, "out", &DENSE, &n.out.params());
            }
            Net::Tcn(n) => {
                for (i, b) in n.blocks.iter().enumerate() {
                    push(o, &format!("block{i}.conv"), &DENSE, &b.conv.params());
                    if let Some(p) = &b.proj {
                        push(o, &format!("block{i}.proj"), &DENSE, &p.params());
                    }
                }
                push(o, "out", &DENSE, &n.out.params());
            }
            Net::AeMlp(n) => {
                push(o, "enc", &LSTM, &n.enc.params());
                push(o, "to_latent", &DENSE, &n.to_latent.params());
                push(o, "dec", &LSTM, &n.dec.params());
                push(o, "recon", &DENSE, &n.recon.params());
                push(o, "h1", &DENSE, &n.h1.params());
                push(o, "h2", &DENSE, &n.h2.params());
                push(o, "out", &DENSE, &n.out.params());
            }
            Net::Linear(n) => push(o, "out", &DENSE, &n.out.params()),
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Net::Lstm(n) => n.lstm.params_mut().into_iter().chain(n.out.params_mut()).collect(),
            Net::BiLstm(n) => {
                n.fwd.params_mut().into_iter().chain(n.bwd.params_mut()).chain(n.out.params_mut()).collect()
            }
            Net::Tcn(n) => {
                let mut v = Vec::new();
                for b in &mut n.blocks {
                    v.extend(b.conv.params_mut());
                    if let Some(p) = &mut b.proj {
                        v.extend(p.params_mut());
                    }
                }
                v.extend(n.out.params_mut());
                v
            }
            Net::AeMlp(n) => n
                .enc
                .params_mut()
                .into_iter()
                .chain(n.to_latent.params_mut())
                .chain(n.dec.params_mut())
                .chain(n.recon.params_mut())
                .chain(n.h1.params_mut())
                .chain(n.h2.params_mut())
                .chain(n.out.params_mut())
                .collect(),
            Net::Linear(n) => n.out.params_mut().into_iter().collect(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.named_params().iter().map(|(_, t)| t.len()).sum()
    }

    /// Zeroed gradient buffers matching `named_params`.
    pub fn zero_grads(&self) -> Vec<Tensor> {
        self.named_params().iter().map(|(_, t)| t.zeros_like()).collect()
    }

    /// The final dense layer producing the logits.
    pub fn output_layer(&self) -> &Dense {
        match self {
            Net::Lstm(n) => &n.out,
            Net::BiLstm(n) => &n.out,
            Net::Tcn(n) => &n.out,
            Net::AeMlp(n) => &n.out,
            Net::Linear(n) => &n.out,
        }
    }

    pub fn output_layer_mut(&mut self) -> &mut Dense {
        match self {
            Net::Lstm(n) => &mut n.out,
            Net::BiLstm(n) => &mut n.out,
            Net::Tcn(n) => &mut n.out,
            Net::AeMlp(n) => &mut n.out,
            Net::Linear(n) => &mut n.out,
        }
    }

    pub fn logits(&self, x: &[f64]) -> [f64; 3] {
        self.run(x, None, None).1
    }

    /// Training loss for one window (cross-entropy, plus the weighted
    /// reconstruction error for AeMlp). Adds parameter gradients into `grads`
    /// when given.
    pub fn loss(&self, x: &[f64], label: usize, grads: Option<&mut [Tensor]>) -> f64 {
        self.run(x, Some(label), grads).0
    }

    fn run(&self, x: &[f64], label: Option<usize>, grads: Option<&mut [Tensor]>) -> (f64, [f64; 3]) {
        match self {
            Net::Lstm(n) => n.run(x, label, grads),
            Net::BiLstm(n) => n.run(x, label, grads),
            Net::Tcn(n) => n.run(x, label, grads),
            Net::AeMlp(n) => n.run(x, label, grads),
            Net::Linear(n) => {
                let mut y = [0.0; 3];
                n.out.forward(x, &mut y);
                let Some(label) = label else { return (0.0, y) };
                let (loss, d) = softmax_xent(&y, label);
                if let Some(g) = grads {
                    n.out.backward(x, &d, g, None);
                }
                (loss, y)
            }
        }
    }
}

impl LstmNet {
    fn run(&self, x: &[f64], label: Option<usize>, grads: Option<&mut [Tensor]>) -> (f64, [f64; 3]) {
        let tr = self.lstm.forward(x);
        let mut y = [0.0; 3];
        self.out.forward(tr.last(), &mut y);
        let Some(label) = label else { return (0.0, y) };
        let (loss, d) = softmax_xent(&y, label);
        if let Some(g) = grads {
            let hn = self.lstm.hidden();
            let (gl, go) = g.split_at_mut(3);
            let mut dh = vec![0.0; tr.steps * hn];
            self.out.backward(tr.last(), &d, go, Some(&mut dh[(tr.steps - 1) * hn..]));
            self.lstm.backward(x, &tr, &dh, gl, None);
        }
        (loss, y)
    }
}

impl BiLstmNet {
    fn run(&self, x: &[f64], label: Option<usize>, grads: Option<&mut [Tensor]>) -> (f64, [f64; 3]) {
        let hn = self.fwd.hidden();
        let xr: Vec<f64> = x.iter().rev().copied().collect();
        let tf = self.fwd.forward(x);
        let tb = self.bwd.forward(&xr);
        let cat: Vec<f64> = tf.last().iter().chain(tb.last()).copied().collect();
        let mut y = [0.0; 3];
        self.out.forward(&cat, &mut y);
        let Some(label) = label else { return (0.0, y) };
        let (loss, d) = softmax_xent(&y, label);
        if let Some(g) = grads {
            let (gf, rest) = g.split_at_mut(3);
            let (gb, go) = rest.split_at_mut(3);
            let mut dcat = vec![0.0; 2 * hn];
            self.out.backward(&cat, &d, go, Some(&mut dcat));
            let steps = tf.steps;
            let mut dh = vec![0.0; steps * hn];
            dh[(steps - 1) * hn..].copy_from_slice(&dcat[..hn]);
            self.fwd.backward(x, &tf, &dh, gf, None);
            dh[(steps - 1) * hn..].copy_from_slice(&dcat[hn..]);
            self.bwd.backward(&xr, &tb, &dh, gb, None);
        }
        (loss, y)
    }
}

impl TcnNet {
    fn run(&self, x: &[f64], label: Option<usize>, grads: Option<&mut [Tensor]>) -> (f64, [f64; 3]) {
        let steps = x.len();
        // Block inputs (channel-major) and pre-activations.
        let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(self.blocks.len() + 1);
        let mut pres: Vec<Vec<f64>> = Vec::with_capacity(self.blocks.len());
        inputs.push(x.to_vec());
        for b in &self.blocks {
            let h = inputs.last().expect("nonempty");
            let mut pre = b.conv.forward(h, steps);
            match &b.proj {
                Some(p) => pre.iter_mut().zip(p.forward(h, steps)).for_each(|(a, r)| *a += r),
                None => pre.iter_mut().zip(h).for_each(|(a, r)| *a += r),
            }
            let mut act = pre.clone();
            relu_inplace(&mut act);
            pres.push(pre);
            inputs.push(act);
        }
        let top = inputs.last().expect("nonempty");
        let pooled: Vec<f64> = top.chunks(steps).map(|c| c.iter().sum::<f64>() / steps as f64).collect();
        let mut y = [0.0; 3];
        self.out.forward(&pooled, &mut y);
        let Some(label) = label else { return (0.0, y) };
        let (loss, d) = softmax_xent(&y, label);
        if let Some(g) = grads {
            let n_out = g.len() - 2;
            let (gblocks, go) = g.split_at_mut(n_out);
            let mut dpool = vec![0.0; pooled.len()];
            self.out.backward(&pooled, &d, go, Some(&mut dpool));
            let mut dh: Vec<f64> = dpool.iter().flat_map(|&v| std::iter::repeat_n(v / steps as f64, steps)).collect();
            let mut offsets = Vec::with_capacity(self.blocks.len());
            let mut at = 0;
            for b in &self.blocks {
                offsets.push(at);
                at += if b.proj.is_some() { 4 } else { 2 };
            }
            for (i, b) in self.blocks.iter().enumerate().rev() {
                let mut dpre = dh;
                relu_mask(&mut dpre, &pres[i]);
                let input = &inputs[i];
                let mut dx = vec![0.0; input.len()];
                let gb = &mut gblocks[offsets[i]..];
                b.conv.backward(input, &dpre, steps, &mut gb[..2], Some(&mut dx));
                match &b.proj {
                    Some(p) => p.backward(input, &dpre, steps, &mut gb[2..4], Some(&mut dx)),
                    None => dx.iter_mut().zip(&dpre).for_each(|(a, d)| *a += d),
                }
                dh = dx;
            }
        }
        (loss, y)
    }
}

impl AeMlpNet {
    fn run(&self, x: &[f64], label: Option<usize>, grads: Option<&mut [Tensor]>) -> (f64, [f64; 3]) {
        let frame = self.enc.input();
        let steps = x.len() / frame;
        let zn = self.to_latent.output();
        let hn = self.enc.hidden();
        let te = self.enc.forward(x);
        let mut z = vec![0.0; zn];
        self.to_latent.forward(te.last(), &mut z);
        z.iter_mut().for_each(|v| *v = v.tanh());
        let zs: Vec<f64> = (0..steps).flat_map(|_| z.iter().copied()).collect();
        let td = self.dec.forward(&zs);
        let mut recon = vec![0.0; steps * frame];
        for (t, r) in recon.chunks_mut(frame).enumerate() {
            self.recon.forward(td.h(t + 1), r);
        }
        let n = recon.len() as f64;
        let mse = recon.iter().zip(x).map(|(r, v)| (r - v) * (r - v)).sum::<f64>() / n;
        let u: Vec<f64> = z.iter().copied().chain([mse]).collect();
        let mut a1 = vec![0.0; self.h1.output()];
        self.h1.forward(&u, &mut a1);
        let mut o1 = a1.clone();
        relu_inplace(&mut o1);
        let mut a2 = vec![0.0; self.h2.output()];
        self.h2.forward(&o1, &mut a2);
        let mut o2 = a2.clone();
        relu_inplace(&mut o2);
        let mut y = [0.0; 3];
        self.out.forward(&o2, &mut y);
        let Some(label) = label else { return (0.0, y) };
        let (ce, d) = softmax_xent(&y, label);
        let loss = ce + RECON_WEIGHT * mse;
        if let Some(g) = grads {
            let (g_enc, rest) = g.split_at_mut(3);
            let (g_lat, rest) = rest.split_at_mut(2);
            let (g_dec, rest) = rest.split_at_mut(3);
            let (g_rec, rest) = rest.split_at_mut(2);
            let (g_h1, rest) = rest.split_at_mut(2);
            let (g_h2, g_out) = rest.split_at_mut(2);

            let mut do2 = vec![0.0; o2.len()];
            self.out.backward(&o2, &d, g_out, Some(&mut do2));
            relu_mask(&mut do2, &a2);
            let mut do1 = vec![0.0; o1.len()];
            self.h2.backward(&o1, &do2, g_h2, Some(&mut do1));
            relu_mask(&mut do1, &a1);
            let mut du = vec![0.0; u.len()];
            self.h1.backward(&u, &do1, g_h1, Some(&mut du));
            let dmse = du[zn] + RECON_WEIGHT;

            let mut dh_dec = vec![0.0; steps * hn];
            let mut dr = vec![0.0; frame];
            for t in 0..steps {
                for (k, d) in dr.iter_mut().enumerate() {
                    let i = t * frame + k;
                    *d = dmse * 2.0 * (recon[i] - x[i]) / n;
                }
                self.recon.backward(td.h(t + 1), &dr, g_rec, Some(&mut dh_dec[t * hn..(t + 1) * hn]));
            }
            let mut dzs = vec![0.0; zs.len()];
            self.dec.backward(&zs, &td, &dh_dec, g_dec, Some(&mut dzs));
            let mut dz = du[..zn].to_vec();
            for row in dzs.chunks(zn) {
                dz.iter_mut().zip(row).for_each(|(a, b)| *a += b);
            }
            for (dzv, zv) in dz.iter_mut().zip(&z) {
                *dzv *= 1.0 - zv * zv;
            }
            let mut dh_enc = vec![0.0; steps * hn];
            self.to_latent.backward(te.last(), &dz, g_lat, Some(&mut dh_enc[(steps - 1) * hn..]));
            self.enc.backward(x, &te, &dh_enc, g_enc, None);
        }
        (loss, y)
    }
}
