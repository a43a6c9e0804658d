//! Backpropagation/Adam baseline for differentiable channels.
//!
//! Gradients of the batch cross-entropy are analytic through the decoder,
//! the softmax, and the encoder's unit-power normalization (including the
//! coupling of every encoder row through the common scale factor). The
//! channel itself is handled as a per-symbol 2x2 real Jacobian obtained by
//! central finite differences on the frozen channel map, so any
//! differentiable channel model works without hand-derived calculus.

use num_complex::Complex64;
use rand::Rng;

use crate::channels::{freeze_for_gradient, ChannelConfig, ChannelDraw, FrozenChannel};
use crate::error::{Error, Result};

use super::{
    constellation_of, flatten, DecoderNet, EncoderNet, OneHotBatch, WeightVector, PROB_CLIP,
};

/// Step used for the finite-difference channel Jacobian.
const CHANNEL_FD_STEP: f64 = 1e-6;

/// Adam optimizer settings (defaults: lr 1e-3, beta1 0.9, beta2 0.999,
/// epsilon 1e-8).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AdamConfig {
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_learning_rate() -> f64 {
    1e-3
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_epsilon() -> f64 {
    1e-8
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }
}

/// First/second moment accumulators of the Adam optimizer.
#[derive(Debug, Clone)]
pub struct AdamState {
    cfg: AdamConfig,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(dim: usize, cfg: AdamConfig) -> Self {
        Self {
            cfg,
            step: 0,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
        }
    }

    pub fn config(&self) -> AdamConfig {
        self.cfg
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update, in place.
    pub fn update(&mut self, weights: &mut [f64], grad: &[f64]) {
        assert_eq!(weights.len(), self.m.len(), "adam state dimension mismatch");
        assert_eq!(weights.len(), grad.len(), "gradient dimension mismatch");
        self.step += 1;
        let t = self.step as i32;
        let bias1 = 1.0 - self.cfg.beta1.powi(t);
        let bias2 = 1.0 - self.cfg.beta2.powi(t);
        for i in 0..weights.len() {
            self.m[i] = self.cfg.beta1 * self.m[i] + (1.0 - self.cfg.beta1) * grad[i];
            self.v[i] = self.cfg.beta2 * self.v[i] + (1.0 - self.cfg.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / bias1;
            let v_hat = self.v[i] / bias2;
            weights[i] -= self.cfg.learning_rate * m_hat / (v_hat.sqrt() + self.cfg.epsilon);
        }
    }
}

/// Mean batch cross-entropy (nats) and its gradient with respect to every
/// weight, for a fixed noise realization.
pub fn cross_entropy_and_gradient(
    w: &WeightVector,
    batch: &OneHotBatch,
    channel: &ChannelConfig,
    draw: &ChannelDraw,
) -> Result<(f64, WeightVector)> {
    let layout = w.layout();
    if batch.m() != layout.m() {
        return Err(Error::InvalidInput(format!(
            "batch alphabet {} does not match weight layout {}",
            batch.m(),
            layout.m()
        )));
    }
    let (enc, dec) = w.unflatten();
    let m = layout.m();
    let h_dim = layout.hidden_dim();
    let b = batch.len();
    let inv_b = 1.0 / b as f64;

    // Encoder outputs and the common unit-power scale.
    let raw: Vec<Complex64> = (0..m).map(|i| enc.point(i)).collect();
    let mean_power = raw.iter().map(|p| p.norm_sqr()).sum::<f64>() / m as f64;
    if mean_power <= 0.0 || !mean_power.is_finite() {
        return Err(Error::DegenerateConstellation);
    }
    let scale = mean_power.sqrt().recip();
    let xs: Vec<Complex64> = batch
        .indices()
        .iter()
        .map(|&t| raw[t] * scale)
        .collect();
    let frozen = freeze_for_gradient(channel, draw, &xs)?;

    let mut grad_enc = EncoderNet::zeros(m);
    let mut grad_dec = DecoderNet::zeros(m, dec.leaky_slope());

    let mut hidden_pre = vec![0.0; h_dim];
    let mut hidden_act = vec![0.0; h_dim];
    let mut probs = vec![0.0; m];
    let mut d_pre = vec![0.0; h_dim];
    let mut loss = 0.0;

    // First pass: forward each element, backpropagate through the decoder,
    // and remember the gradient at the channel output per batch slot.
    let ch_scale = frozen.renorm_scale();
    let mut z_raw = vec![Complex64::new(0.0, 0.0); b];
    let mut grad_y = vec![Complex64::new(0.0, 0.0); b];

    for (k, (&t, &x)) in batch.indices().iter().zip(&xs).enumerate() {
        z_raw[k] = frozen.apply_raw(k, x);
        let y = z_raw[k] * ch_scale;

        for h in 0..h_dim {
            let pre = dec.hidden_weights()[2 * h] * y.re
                + dec.hidden_weights()[2 * h + 1] * y.im
                + dec.hidden_bias()[h];
            hidden_pre[h] = pre;
            hidden_act[h] = super::leaky_relu(pre, dec.leaky_slope());
        }
        let mut max_logit = f64::NEG_INFINITY;
        for o in 0..m {
            let row = &dec.out_weights()[o * h_dim..(o + 1) * h_dim];
            let mut acc = dec.out_bias()[o];
            for (w_oh, a) in row.iter().zip(&hidden_act) {
                acc += w_oh * a;
            }
            probs[o] = acc;
            max_logit = max_logit.max(acc);
        }
        let mut sum = 0.0;
        for p in probs.iter_mut() {
            *p = (*p - max_logit).exp();
            sum += *p;
        }
        for p in probs.iter_mut() {
            *p /= sum;
        }
        let clipped = probs[t] < PROB_CLIP;
        loss += -probs[t].max(PROB_CLIP).ln();
        if clipped {
            // The clip flattens the loss locally; no gradient contribution.
            continue;
        }

        // Softmax cross-entropy: d logits = (probs - onehot)/B.
        let mut d_act = vec![0.0; h_dim];
        for o in 0..m {
            let d_logit = (probs[o] - if o == t { 1.0 } else { 0.0 }) * inv_b;
            grad_dec.out_bias_mut()[o] += d_logit;
            let row_off = o * h_dim;
            for h in 0..h_dim {
                grad_dec.out_weights_mut()[row_off + h] += d_logit * hidden_act[h];
                d_act[h] += dec.out_weights()[row_off + h] * d_logit;
            }
        }
        for h in 0..h_dim {
            let slope = if hidden_pre[h] > 0.0 { 1.0 } else { dec.leaky_slope() };
            d_pre[h] = d_act[h] * slope;
            grad_dec.hidden_weights_mut()[2 * h] += d_pre[h] * y.re;
            grad_dec.hidden_weights_mut()[2 * h + 1] += d_pre[h] * y.im;
            grad_dec.hidden_bias_mut()[h] += d_pre[h];
        }
        grad_y[k] = Complex64::new(
            (0..h_dim).map(|h| dec.hidden_weights()[2 * h] * d_pre[h]).sum(),
            (0..h_dim)
                .map(|h| dec.hidden_weights()[2 * h + 1] * d_pre[h])
                .sum(),
        );
    }

    // Second pass: pull the output gradients back through the channel. When
    // the channel renormalizes its output to unit empirical power, the scale
    // couples every slot to every other one, exactly like the constellation
    // normalization below.
    let renorm_coupling = if frozen.renormalizes_output() {
        let g_dot_scale: f64 = grad_y
            .iter()
            .zip(&z_raw)
            .map(|(g, z)| g.re * z.re + g.im * z.im)
            .sum();
        -g_dot_scale * ch_scale.powi(3) / b as f64
    } else {
        0.0
    };

    // Gradient accumulated on the normalized constellation points, and on the
    // unit-power scale factor itself.
    let mut grad_points = vec![Complex64::new(0.0, 0.0); m];
    let mut grad_scale = 0.0;
    for (k, (&t, &x)) in batch.indices().iter().zip(&xs).enumerate() {
        let g_z = grad_y[k] * ch_scale + z_raw[k] * renorm_coupling;
        // 2x2 channel Jacobian by central differences on the frozen raw map:
        // dL/d in_a = sum_b (d out_b / d in_a) dL/d out_b.
        let j = channel_jacobian(&frozen, k, x);
        let g_x = Complex64::new(
            j[0][0] * g_z.re + j[0][1] * g_z.im,
            j[1][0] * g_z.re + j[1][1] * g_z.im,
        );
        grad_points[t] += g_x;
        grad_scale += g_x.re * raw[t].re + g_x.im * raw[t].im;
    }

    // Through the normalization: x_i = s * raw_i with s = (mean |raw|^2)^(-1/2),
    // so ds/d raw_i = -s^3 raw_i / M.
    let scale_coupling = -grad_scale * scale.powi(3) / m as f64;
    for i in 0..m {
        let g = grad_points[i] * scale + raw[i] * scale_coupling;
        grad_enc.weights_mut()[2 * i] = g.re;
        grad_enc.weights_mut()[2 * i + 1] = g.im;
    }

    let grad = flatten(&grad_enc, &grad_dec)?;
    Ok((loss * inv_b, grad))
}

fn channel_jacobian(frozen: &FrozenChannel<'_>, k: usize, x: Complex64) -> [[f64; 2]; 2] {
    let h = CHANNEL_FD_STEP;
    let fp_re = frozen.apply_raw(k, x + Complex64::new(h, 0.0));
    let fm_re = frozen.apply_raw(k, x - Complex64::new(h, 0.0));
    let fp_im = frozen.apply_raw(k, x + Complex64::new(0.0, h));
    let fm_im = frozen.apply_raw(k, x - Complex64::new(0.0, h));
    let inv = 1.0 / (2.0 * h);
    // Row = input direction, column = output component.
    [
        [(fp_re.re - fm_re.re) * inv, (fp_re.im - fm_re.im) * inv],
        [(fp_im.re - fm_im.re) * inv, (fp_im.im - fm_im.im) * inv],
    ]
}

/// One Adam step on the mean batch cross-entropy. Returns the updated weights
/// and the loss (nats) at the pre-update weights.
///
/// Fails with [`Error::UnsupportedChannel`] for non-differentiable channels.
pub fn backprop_adam_step<R: Rng + ?Sized>(
    w: &WeightVector,
    batch: &OneHotBatch,
    channel: &ChannelConfig,
    adam: &mut AdamState,
    rng: &mut R,
) -> Result<(WeightVector, f64)> {
    if !channel.supports_gradient() {
        return Err(Error::UnsupportedChannel {
            channel: "phase-noise-bps",
            operation: "backpropagation training",
        });
    }
    let draw = channel.draw(batch.len(), rng);
    let (loss, grad) = cross_entropy_and_gradient(w, batch, channel, &draw)?;
    let mut updated = w.clone();
    adam.update(updated.values_mut(), grad.values());
    Ok((updated, loss))
}

/// Mean batch cross-entropy (nats) at fixed weights and noise, with the
/// probability clip applied. Equals the mean of squared scalarized
/// measurements.
pub fn batch_cross_entropy(
    w: &WeightVector,
    batch: &OneHotBatch,
    channel: &ChannelConfig,
    draw: &ChannelDraw,
) -> Result<f64> {
    let (enc, dec) = w.unflatten();
    let constellation = constellation_of(&enc)?;
    let xs: Vec<Complex64> = batch
        .indices()
        .iter()
        .map(|&t| constellation.point(t))
        .collect();
    let ys = channel.apply_with_draw(&xs, &constellation, draw)?;
    let mut scratch = dec.scratch();
    let ln_clip = PROB_CLIP.ln();
    let total: f64 = ys
        .iter()
        .zip(batch.indices())
        .map(|(&y, &t)| -dec.log_posterior_target(y, t, &mut scratch).max(ln_clip))
        .sum();
    Ok(total / batch.len() as f64)
}
