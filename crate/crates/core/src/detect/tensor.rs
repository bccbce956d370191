use rand::Rng;

/// Dense row-major array of weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Tensor {
        Tensor { shape: shape.to_vec(), data: vec![0.0; shape.iter().product()] }
    }

    pub fn uniform(shape: &[usize], bound: f64, rng: &mut impl Rng) -> Tensor {
        let n = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: (0..n).map(|_| rng.random_range(-bound..=bound)).collect() }
    }

    /// Glorot-uniform initialization from fan-in and fan-out.
    pub fn glorot(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Tensor {
        Self::uniform(shape, (6.0 / (fan_in + fan_out) as f64).sqrt(), rng)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn zeros_like(&self) -> Tensor {
        Tensor::zeros(&self.shape)
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64; 3]) -> [f64; 3] {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e = logits.map(|l| (l - m).exp());
    let s: f64 = e.iter().sum();
    e.map(|v| v / s)
}

/// Cross-entropy of `label` under softmax(logits), and d loss / d logits.
pub(crate) fn softmax_xent(logits: &[f64; 3], label: usize) -> (f64, [f64; 3]) {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = logits.iter().map(|l| (l - m).exp()).sum();
    let mut d = softmax(logits);
    d[label] -= 1.0;
    ((m - logits[label]) + s.ln(), d)
}
