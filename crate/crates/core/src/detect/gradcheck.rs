use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::{Arch, DetectorConfig};
use super::nets::Net;
use crate::error::{Error, Result};
use crate::rng::stream;

/// Finite-difference step.
pub const FD_STEP: f64 = 1e-5;
pub const MAX_CHECK_PARAMS: usize = 500;

/// Small configuration used for gradient checks.
pub fn tiny_config(arch: Arch) -> DetectorConfig {
    DetectorConfig { arch, frame: 1, hidden: 4, tcn_channels: 2, tcn_dilations: vec![1, 2], kernel: 2, latent: 2, ..DetectorConfig::default() }
}

/// Largest relative disagreement between the analytic gradient of the loss
/// and central finite differences with step [`FD_STEP`], over all parameters.
pub fn gradient_check(net: &Net, x: &[f64], label: usize) -> f64 {
    gradient_check_with_step(net, x, label, FD_STEP)
}

pub fn gradient_check_with_step(net: &Net, x: &[f64], label: usize, step: f64) -> f64 {
    let mut analytic = net.zero_grads();
    net.loss(x, label, Some(&mut analytic));
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for (pi, g) in analytic.iter().enumerate() {
        for (j, &ga) in g.data.iter().enumerate() {
            let orig = probe.params_mut()[pi].data[j];
            probe.params_mut()[pi].data[j] = orig + step;
            let lp = probe.loss(x, label, None);
            probe.params_mut()[pi].data[j] = orig - step;
            let lm = probe.loss(x, label, None);
            probe.params_mut()[pi].data[j] = orig;
            let gn = (lp - lm) / (2.0 * step);
            let rel = (ga - gn).abs() / ga.abs().max(gn.abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }
    worst
}

/// Gradient check of a `config.arch` net on a random standard-normal window
/// of `window_len` steps and a random label.
pub fn gradient_check_arch(config: &DetectorConfig, window_len: usize, seed: u64) -> Result<f64> {
    let (net, x, label) = gradient_check_case(config, window_len, seed)?;
    Ok(gradient_check(&net, &x, label))
}

/// Random net, input and label for a gradient check. Initial weights are
/// jittered so that no ReLU input sits exactly on its kink (zero biases
/// would put dead units there).
pub fn gradient_check_case(config: &DetectorConfig, window_len: usize, seed: u64) -> Result<(Net, Vec<f64>, usize)> {
    let mut rng = stream(seed, &[0x6772_6164]);
    let mut net = Net::new(config, &mut rng);
    for t in net.params_mut() {
        t.data.iter_mut().for_each(|v| *v += rng.random_range(-0.1..0.1));
    }
    if net.param_count() > MAX_CHECK_PARAMS {
        return Err(Error::param(format!(
            "gradient check limited to {MAX_CHECK_PARAMS} parameters, net has {}",
            net.param_count()
        )));
    }
    let x: Vec<f64> = (0..window_len).map(|_| StandardNormal.sample(&mut rng)).collect();
    let label = rng.random_range(0..3);
    Ok((net, x, label))
}
