//! Encoder and decoder neural networks.
//!
//! The encoder is a bias-free linear map from a one-hot symbol index to an
//! I/Q point, i.e. an `M x 2` weight matrix whose rows are the raw
//! constellation points. The decoder is a two-layer network (`2 -> M/2`
//! leaky-ReLU hidden layer, `M`-way softmax output) producing posterior
//! symbol probabilities from a received point.
//!
//! All trainable parameters flatten into a single [`WeightVector`] so the
//! whole autoencoder can be treated as the state of a filter: weights are
//! stacked neuron by neuron within each layer, layers in depth order, encoder
//! first.

mod backprop;

pub use backprop::{
    backprop_adam_step, batch_cross_entropy, cross_entropy_and_gradient, AdamConfig, AdamState,
};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::channels::ChannelConfig;
use crate::constellation::Constellation;
use crate::error::{Error, Result};

/// Probabilities are clipped at this floor inside cross-entropy and the
/// scalarized measurement so logs stay finite.
pub const PROB_CLIP: f64 = 1e-12;

/// Default negative-input slope of the decoder's leaky-ReLU hidden layer.
pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

/// Draws a `fan_in * fan_out` matrix (flat, i.i.d. entries) from the Glorot
/// uniform distribution on `[-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))]`.
pub fn glorot_init<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Vec<f64> {
    assert!(fan_in >= 1 && fan_out >= 1, "glorot fans must be >= 1");
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let dist = Uniform::new_inclusive(-limit, limit).expect("valid uniform range");
    (0..fan_in * fan_out).map(|_| dist.sample(rng)).collect()
}

/// Shape descriptor of the autoencoder weight vector: block offsets follow
/// from the alphabet size, plus the (non-trainable) hidden activation slope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightLayout {
    m: usize,
    leaky_slope: f64,
}

impl WeightLayout {
    pub fn new(m: usize) -> Result<Self> {
        Self::with_leaky_slope(m, DEFAULT_LEAKY_SLOPE)
    }

    pub fn with_leaky_slope(m: usize, leaky_slope: f64) -> Result<Self> {
        if m < 2 || m % 2 != 0 {
            return Err(Error::Config(format!(
                "alphabet size must be even and >= 2, got {m}"
            )));
        }
        Ok(Self { m, leaky_slope })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn leaky_slope(&self) -> f64 {
        self.leaky_slope
    }

    /// Decoder hidden-layer width, `M/2`.
    pub fn hidden_dim(&self) -> usize {
        self.m / 2
    }

    /// Number of encoder parameters, `2M`.
    pub fn n_encoder(&self) -> usize {
        2 * self.m
    }

    /// Number of decoder parameters, `2(M/2) + M/2 + (M/2)M + M`.
    pub fn n_decoder(&self) -> usize {
        let h = self.hidden_dim();
        3 * h + (h + 1) * self.m
    }

    /// Total state dimension `N`.
    pub fn n_total(&self) -> usize {
        self.n_encoder() + self.n_decoder()
    }
}

/// Flat autoencoder parameter vector (the filter state).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    layout: WeightLayout,
    values: Vec<f64>,
}

impl WeightVector {
    pub fn new(layout: WeightLayout, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.n_total() {
            return Err(Error::InvalidInput(format!(
                "weight vector length {} does not match layout dimension {}",
                values.len(),
                layout.n_total()
            )));
        }
        Ok(Self { layout, values })
    }

    /// Glorot-initialized weights, biases zero.
    pub fn glorot<R: Rng + ?Sized>(layout: WeightLayout, rng: &mut R) -> Self {
        let enc = EncoderNet::glorot(layout.m, rng);
        let dec = DecoderNet::glorot(layout.m, layout.leaky_slope, rng);
        flatten(&enc, &dec).expect("matching layouts by construction")
    }

    pub fn layout(&self) -> WeightLayout {
        self.layout
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn unflatten(&self) -> (EncoderNet, DecoderNet) {
        unflatten_slice(self.layout, &self.values)
    }
}

/// Bias-free linear encoder: one-hot index -> I/Q point.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderNet {
    m: usize,
    /// Row-major `M x 2`: `weights[2i]` is Re, `weights[2i+1]` is Im of row `i`.
    weights: Vec<f64>,
}

impl EncoderNet {
    pub fn zeros(m: usize) -> Self {
        Self {
            m,
            weights: vec![0.0; 2 * m],
        }
    }

    pub fn glorot<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Self {
        Self {
            m,
            weights: glorot_init(m, 2, rng),
        }
    }

    pub fn from_weights(m: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != 2 * m {
            return Err(Error::InvalidInput(format!(
                "encoder weights length {} does not match 2M = {}",
                weights.len(),
                2 * m
            )));
        }
        Ok(Self { m, weights })
    }

    /// Builds the encoder whose rows are the given complex points.
    pub fn from_points(points: &[Complex64]) -> Self {
        let mut weights = Vec::with_capacity(2 * points.len());
        for p in points {
            weights.push(p.re);
            weights.push(p.im);
        }
        Self {
            m: points.len(),
            weights,
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    /// Raw (unnormalized) output for symbol index `k`: row `k` as Re + i Im.
    pub fn point(&self, k: usize) -> Complex64 {
        Complex64::new(self.weights[2 * k], self.weights[2 * k + 1])
    }
}

/// Maps a one-hot input through the encoder. The output equals the weight
/// row selected by the hot index; the output activation is linear.
pub fn encoder_forward(enc: &EncoderNet, one_hot: &[f64]) -> Result<Complex64> {
    let k = validate_one_hot(one_hot, enc.m)?;
    Ok(enc.point(k))
}

/// Passes all `M` one-hot vectors through the encoder and scales the outputs
/// by one common factor to unit average power. Normalization always uses the
/// full alphabet with uniform weights, never a training batch.
pub fn constellation_of(enc: &EncoderNet) -> Result<Constellation> {
    Constellation::normalized((0..enc.m).map(|k| enc.point(k)).collect())
}

fn validate_one_hot(one_hot: &[f64], m: usize) -> Result<usize> {
    if one_hot.len() != m {
        return Err(Error::InvalidInput(format!(
            "one-hot length {} does not match alphabet size {m}",
            one_hot.len()
        )));
    }
    let mut hot = None;
    for (i, &v) in one_hot.iter().enumerate() {
        if v != 0.0 {
            if v != 1.0 || hot.is_some() {
                return Err(Error::InvalidInput(
                    "one-hot vector must have exactly one entry equal to 1".into(),
                ));
            }
            hot = Some(i);
        }
    }
    hot.ok_or_else(|| Error::InvalidInput("one-hot vector is all zero".into()))
}

/// Two-layer softmax decoder: received point -> posterior over symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderNet {
    m: usize,
    hidden_dim: usize,
    leaky_slope: f64,
    /// Per hidden neuron `h`: `[2h]` weighs Re, `[2h+1]` weighs Im.
    hidden_weights: Vec<f64>,
    hidden_bias: Vec<f64>,
    /// Per output neuron `o`: weights at `[o * hidden_dim ..][..hidden_dim]`.
    out_weights: Vec<f64>,
    out_bias: Vec<f64>,
}

impl DecoderNet {
    pub fn zeros(m: usize, leaky_slope: f64) -> Self {
        let h = m / 2;
        Self {
            m,
            hidden_dim: h,
            leaky_slope,
            hidden_weights: vec![0.0; 2 * h],
            hidden_bias: vec![0.0; h],
            out_weights: vec![0.0; h * m],
            out_bias: vec![0.0; m],
        }
    }

    pub fn glorot<R: Rng + ?Sized>(m: usize, leaky_slope: f64, rng: &mut R) -> Self {
        let h = m / 2;
        Self {
            m,
            hidden_dim: h,
            leaky_slope,
            hidden_weights: glorot_init(2, h, rng),
            hidden_bias: vec![0.0; h],
            out_weights: glorot_init(h, m, rng),
            out_bias: vec![0.0; m],
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn leaky_slope(&self) -> f64 {
        self.leaky_slope
    }

    pub fn hidden_weights(&self) -> &[f64] {
        &self.hidden_weights
    }

    pub fn hidden_bias(&self) -> &[f64] {
        &self.hidden_bias
    }

    pub fn out_weights(&self) -> &[f64] {
        &self.out_weights
    }

    pub fn out_bias(&self) -> &[f64] {
        &self.out_bias
    }

    pub fn hidden_weights_mut(&mut self) -> &mut [f64] {
        &mut self.hidden_weights
    }

    pub fn hidden_bias_mut(&mut self) -> &mut [f64] {
        &mut self.hidden_bias
    }

    pub fn out_weights_mut(&mut self) -> &mut [f64] {
        &mut self.out_weights
    }

    pub fn out_bias_mut(&mut self) -> &mut [f64] {
        &mut self.out_bias
    }

    pub fn scratch(&self) -> DecoderScratch {
        DecoderScratch {
            hidden: vec![0.0; self.hidden_dim],
            logits: vec![0.0; self.m],
        }
    }

    /// Hidden activations and output logits for input `y`.
    fn forward_raw(&self, y: Complex64, scratch: &mut DecoderScratch) {
        let (re, im) = (y.re, y.im);
        for h in 0..self.hidden_dim {
            let pre = self.hidden_weights[2 * h] * re + self.hidden_weights[2 * h + 1] * im
                + self.hidden_bias[h];
            scratch.hidden[h] = leaky_relu(pre, self.leaky_slope);
        }
        for o in 0..self.m {
            let row = &self.out_weights[o * self.hidden_dim..(o + 1) * self.hidden_dim];
            let mut acc = self.out_bias[o];
            for (w, a) in row.iter().zip(&scratch.hidden) {
                acc += w * a;
            }
            scratch.logits[o] = acc;
        }
    }

    /// Softmax posterior written into `out` (max-subtracted, numerically stable).
    pub fn posterior_into(&self, y: Complex64, out: &mut [f64], scratch: &mut DecoderScratch) {
        self.forward_raw(y, scratch);
        softmax_into(&scratch.logits, out);
    }

    /// Log posterior probability `ln s^(target)` of a single symbol, without
    /// materializing the softmax vector.
    pub fn log_posterior_target(
        &self,
        y: Complex64,
        target: usize,
        scratch: &mut DecoderScratch,
    ) -> f64 {
        self.forward_raw(y, scratch);
        let lse = log_sum_exp(&scratch.logits);
        scratch.logits[target] - lse
    }
}

/// Reusable buffers for decoder forward passes in hot loops.
#[derive(Debug, Clone)]
pub struct DecoderScratch {
    hidden: Vec<f64>,
    logits: Vec<f64>,
}

pub fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

fn softmax_into(logits: &[f64], out: &mut [f64]) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &l) in out.iter_mut().zip(logits) {
        let e = (l - max).exp();
        *o = e;
        sum += e;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|&l| (l - max).exp()).sum();
    max + sum.ln()
}

/// Posterior of a received point; rows sum to 1 and are strictly positive for
/// finite inputs.
pub fn decoder_forward(dec: &DecoderNet, y: Complex64) -> Result<Vec<f64>> {
    if !y.re.is_finite() || !y.im.is_finite() {
        return Err(Error::InvalidInput(format!(
            "decoder input must be finite, got {y}"
        )));
    }
    let mut out = vec![0.0; dec.m];
    let mut scratch = dec.scratch();
    dec.posterior_into(y, &mut out, &mut scratch);
    Ok(out)
}

/// Flattens encoder and decoder parameters into one column vector.
///
/// Layout: encoder output neurons first (all Re weights, then all Im
/// weights), then the decoder hidden neurons (`[w_re, w_im, bias]` each),
/// then the decoder output neurons (`[w_0 .. w_{M/2-1}, bias]` each).
pub fn flatten(enc: &EncoderNet, dec: &DecoderNet) -> Result<WeightVector> {
    if enc.m != dec.m {
        return Err(Error::InvalidInput(format!(
            "encoder alphabet {} does not match decoder alphabet {}",
            enc.m, dec.m
        )));
    }
    let layout = WeightLayout::with_leaky_slope(enc.m, dec.leaky_slope)?;
    let m = enc.m;
    let h_dim = layout.hidden_dim();
    let mut values = Vec::with_capacity(layout.n_total());
    for neuron in 0..2 {
        for i in 0..m {
            values.push(enc.weights[2 * i + neuron]);
        }
    }
    for h in 0..h_dim {
        values.push(dec.hidden_weights[2 * h]);
        values.push(dec.hidden_weights[2 * h + 1]);
        values.push(dec.hidden_bias[h]);
    }
    for o in 0..m {
        values.extend_from_slice(&dec.out_weights[o * h_dim..(o + 1) * h_dim]);
        values.push(dec.out_bias[o]);
    }
    WeightVector::new(layout, values)
}

/// Rebuilds the encoder and decoder from a flat slice in [`flatten`] order.
pub fn unflatten_slice(layout: WeightLayout, values: &[f64]) -> (EncoderNet, DecoderNet) {
    assert_eq!(values.len(), layout.n_total(), "weight slice length mismatch");
    let m = layout.m();
    let h_dim = layout.hidden_dim();
    let mut enc = EncoderNet::zeros(m);
    for neuron in 0..2 {
        for i in 0..m {
            enc.weights[2 * i + neuron] = values[neuron * m + i];
        }
    }
    let mut dec = DecoderNet::zeros(m, layout.leaky_slope());
    let mut at = layout.n_encoder();
    for h in 0..h_dim {
        dec.hidden_weights[2 * h] = values[at];
        dec.hidden_weights[2 * h + 1] = values[at + 1];
        dec.hidden_bias[h] = values[at + 2];
        at += 3;
    }
    for o in 0..m {
        dec.out_weights[o * h_dim..(o + 1) * h_dim].copy_from_slice(&values[at..at + h_dim]);
        dec.out_bias[o] = values[at + h_dim];
        at += h_dim + 1;
    }
    (enc, dec)
}

/// A batch of one-hot inputs, stored as hot indices.
#[derive(Debug, Clone, PartialEq)]
pub struct OneHotBatch {
    m: usize,
    indices: Vec<usize>,
}

impl OneHotBatch {
    pub fn from_indices(m: usize, indices: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= m) {
            return Err(Error::InvalidInput(format!(
                "hot index {bad} out of range for alphabet size {m}"
            )));
        }
        Ok(Self { m, indices })
    }

    /// Builds a batch from explicit one-hot rows, validating each row.
    pub fn from_rows(rows: &[Vec<f64>], m: usize) -> Result<Self> {
        let indices = rows
            .iter()
            .map(|row| validate_one_hot(row, m))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { m, indices })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Materializes row `k` as an explicit one-hot vector.
    pub fn one_hot_row(&self, k: usize) -> Vec<f64> {
        let mut row = vec![0.0; self.m];
        row[self.indices[k]] = 1.0;
        row
    }
}

/// Decoder posteriors for a batch, one row per batch element.
#[derive(Debug, Clone, PartialEq)]
pub struct Posteriors {
    b: usize,
    m: usize,
    probs: Vec<f64>,
}

impl Posteriors {
    pub fn new(b: usize, m: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != b * m {
            return Err(Error::InvalidInput(format!(
                "posterior buffer length {} does not match {b} x {m}",
                probs.len()
            )));
        }
        Ok(Self { b, m, probs })
    }

    pub fn batch_len(&self) -> usize {
        self.b
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.probs[k * self.m..(k + 1) * self.m]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.probs.chunks_exact(self.m)
    }
}

/// Full autoencoder forward pass: encoder, unit-power normalization over the
/// whole alphabet, channel, decoder. Noise is drawn once from `rng`.
pub fn ae_forward<R: Rng + ?Sized>(
    w: &WeightVector,
    batch: &OneHotBatch,
    channel: &ChannelConfig,
    rng: &mut R,
) -> Result<(Posteriors, Vec<Complex64>)> {
    let draw = channel.draw(batch.len(), rng);
    ae_forward_with_draw(w, batch, channel, &draw)
}

/// [`ae_forward`] against a fixed noise realization. Reusing one draw across
/// calls makes the pass a deterministic function of the weights, which is how
/// cubature points share noise within a filter iteration.
pub fn ae_forward_with_draw(
    w: &WeightVector,
    batch: &OneHotBatch,
    channel: &ChannelConfig,
    draw: &crate::channels::ChannelDraw,
) -> Result<(Posteriors, Vec<Complex64>)> {
    if batch.m() != w.layout().m() {
        return Err(Error::InvalidInput(format!(
            "batch alphabet {} does not match weight layout {}",
            batch.m(),
            w.layout().m()
        )));
    }
    let (enc, dec) = w.unflatten();
    let constellation = constellation_of(&enc)?;
    let xs: Vec<Complex64> = batch
        .indices()
        .iter()
        .map(|&i| constellation.point(i))
        .collect();
    let ys = channel.apply_with_draw(&xs, &constellation, draw)?;
    let mut probs = vec![0.0; batch.len() * batch.m()];
    let mut scratch = dec.scratch();
    for (k, &y) in ys.iter().enumerate() {
        dec.posterior_into(y, &mut probs[k * batch.m()..(k + 1) * batch.m()], &mut scratch);
    }
    Ok((Posteriors::new(batch.len(), batch.m(), probs)?, ys))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::AwgnConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn glorot_single_value_bound() {
        let mut r = rng(0);
        for _ in 0..100 {
            let v = glorot_init(1, 1, &mut r)[0];
            assert!(v.abs() <= 3f64.sqrt());
        }
    }

    #[test]
    fn glorot_sample_variance_matches_uniform_law() {
        // Var of U(-a, a) is a^2/3 = (6/(fan_in+fan_out))/3 = 2/34 here.
        let mut r = rng(1);
        let n = 100_000;
        let draws: Vec<f64> = (0..n / 64).flat_map(|_| glorot_init(2, 32, &mut r)).collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / draws.len() as f64;
        let expected = 2.0 / 34.0;
        assert!(
            (var - expected).abs() / expected < 0.05,
            "sample variance {var} not within 5% of {expected}"
        );
    }

    #[test]
    fn glorot_is_deterministic_per_seed() {
        let a = glorot_init(3, 5, &mut rng(9));
        let b = glorot_init(3, 5, &mut rng(9));
        assert_eq!(a, b);
    }

    #[test]
    fn encoder_forward_selects_row() {
        let mut enc = EncoderNet::zeros(8);
        enc.weights_mut()[6] = 0.5;
        enc.weights_mut()[7] = -0.5;
        let mut u = vec![0.0; 8];
        u[3] = 1.0;
        assert_eq!(
            encoder_forward(&enc, &u).unwrap(),
            Complex64::new(0.5, -0.5)
        );
    }

    #[test]
    fn encoder_forward_zero_weights() {
        let enc = EncoderNet::zeros(4);
        for k in 0..4 {
            let mut u = vec![0.0; 4];
            u[k] = 1.0;
            assert_eq!(encoder_forward(&enc, &u).unwrap(), Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn encoder_forward_two_point_toy() {
        let enc = EncoderNet::from_points(&[Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)]);
        let u = vec![0.0, 1.0];
        assert_eq!(encoder_forward(&enc, &u).unwrap(), Complex64::new(-1.0, 0.0));
    }

    #[test]
    fn encoder_forward_rejects_malformed_one_hot() {
        let enc = EncoderNet::zeros(4);
        assert!(encoder_forward(&enc, &[0.0; 4]).is_err());
        assert!(encoder_forward(&enc, &[1.0, 1.0, 0.0, 0.0]).is_err());
        assert!(encoder_forward(&enc, &[0.5, 0.0, 0.0, 0.0]).is_err());
        assert!(encoder_forward(&enc, &[1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn constellation_of_normalizes() {
        let enc = EncoderNet::from_points(&[
            Complex64::new(2.0, 0.0),
            Complex64::new(-2.0, 0.0),
            Complex64::new(0.0, 2.0),
            Complex64::new(0.0, -2.0),
        ]);
        let c = constellation_of(&enc).unwrap();
        assert!((c.point(0) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((c.point(3) - Complex64::new(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn constellation_of_random_encoder_has_unit_power() {
        let enc = EncoderNet::glorot(16, &mut rng(3));
        let c = constellation_of(&enc).unwrap();
        assert!((c.mean_power() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constellation_of_is_scale_invariant() {
        let enc = EncoderNet::glorot(16, &mut rng(4));
        let mut scaled = enc.clone();
        for w in scaled.weights_mut() {
            *w *= 7.25;
        }
        let a = constellation_of(&enc).unwrap();
        let b = constellation_of(&scaled).unwrap();
        for (pa, pb) in a.points().iter().zip(b.points()) {
            assert!((pa - pb).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_decoder_gives_uniform_posterior() {
        let dec = DecoderNet::zeros(64, DEFAULT_LEAKY_SLOPE);
        let row = decoder_forward(&dec, Complex64::new(0.3, -1.2)).unwrap();
        for &p in &row {
            assert!((p - 1.0 / 64.0).abs() < 1e-15);
        }
    }

    #[test]
    fn decoder_bias_dominates_when_weights_zero() {
        let m = 16;
        let mut dec = DecoderNet::zeros(m, DEFAULT_LEAKY_SLOPE);
        dec.out_bias_mut()[0] = 10.0;
        let row = decoder_forward(&dec, Complex64::new(0.0, 0.0)).unwrap();
        let expected = 10f64.exp() / (10f64.exp() + (m - 1) as f64);
        assert!((row[0] - expected).abs() < 1e-12);
        assert!(row[0] > 0.99);
    }

    #[test]
    fn leaky_relu_negative_slope() {
        assert_eq!(leaky_relu(-1.0, 0.01), -0.01);
        assert_eq!(leaky_relu(2.0, 0.01), 2.0);
    }

    #[test]
    fn decoder_rejects_non_finite_input() {
        let dec = DecoderNet::zeros(4, DEFAULT_LEAKY_SLOPE);
        assert!(decoder_forward(&dec, Complex64::new(f64::NAN, 0.0)).is_err());
        assert!(decoder_forward(&dec, Complex64::new(0.0, f64::INFINITY)).is_err());
    }

    #[test]
    fn posterior_rows_sum_to_one() {
        let mut r = rng(5);
        for _ in 0..50 {
            let dec = DecoderNet::glorot(16, DEFAULT_LEAKY_SLOPE, &mut r);
            let y = Complex64::new(
                4.0 * (rand::Rng::random::<f64>(&mut r) - 0.5),
                4.0 * (rand::Rng::random::<f64>(&mut r) - 0.5),
            );
            let row = decoder_forward(&dec, y).unwrap();
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|&p| p > 0.0));
        }
    }

    #[test]
    fn log_posterior_matches_softmax() {
        let mut r = rng(11);
        let dec = DecoderNet::glorot(8, DEFAULT_LEAKY_SLOPE, &mut r);
        let y = Complex64::new(0.7, -0.4);
        let row = decoder_forward(&dec, y).unwrap();
        let mut scratch = dec.scratch();
        for t in 0..8 {
            let lp = dec.log_posterior_target(y, t, &mut scratch);
            assert!((lp - row[t].ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn flatten_unflatten_round_trip_is_exact() {
        for m in [2, 4, 16, 64] {
            let mut r = rng(m as u64);
            let layout = WeightLayout::new(m).unwrap();
            let w = WeightVector::glorot(layout, &mut r);
            let (enc, dec) = w.unflatten();
            let w2 = flatten(&enc, &dec).unwrap();
            assert_eq!(w.values(), w2.values());
        }
    }

    #[test]
    fn layout_dimensions_match_architecture() {
        let layout = WeightLayout::new(64).unwrap();
        assert_eq!(layout.n_encoder(), 128);
        assert_eq!(layout.n_decoder(), 2 * 32 + 32 + 32 * 64 + 64);
        assert_eq!(layout.n_total(), 2336);
    }

    #[test]
    fn ae_forward_is_deterministic_per_seed() {
        let layout = WeightLayout::new(4).unwrap();
        let w = WeightVector::glorot(layout, &mut rng(2));
        let batch = OneHotBatch::from_indices(4, vec![0, 1, 2, 3, 2, 1]).unwrap();
        let channel = ChannelConfig::Awgn(AwgnConfig { snr_db: 8.0 });
        let (p1, y1) = ae_forward(&w, &batch, &channel, &mut rng(77)).unwrap();
        let (p2, y2) = ae_forward(&w, &batch, &channel, &mut rng(77)).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(y1, y2);
    }

    #[test]
    fn ae_forward_zero_decoder_is_uniform() {
        let layout = WeightLayout::new(4).unwrap();
        let mut w = WeightVector::glorot(layout, &mut rng(6));
        let n_enc = layout.n_encoder();
        for v in &mut w.values_mut()[n_enc..] {
            *v = 0.0;
        }
        let batch = OneHotBatch::from_indices(4, vec![0, 1, 2, 3]).unwrap();
        let channel = ChannelConfig::Awgn(AwgnConfig { snr_db: 0.0 });
        let (posteriors, _) = ae_forward(&w, &batch, &channel, &mut rng(7)).unwrap();
        for row in posteriors.rows() {
            for &p in row {
                assert!((p - 0.25).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ae_forward_noiseless_with_matched_decoder_classifies() {
        // Two-point alphabet, decoder hand-built to separate by the real axis.
        let enc = EncoderNet::from_points(&[Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)]);
        let mut dec = DecoderNet::zeros(2, DEFAULT_LEAKY_SLOPE);
        dec.hidden_weights_mut()[0] = 10.0;
        dec.out_weights_mut()[0] = 1.0;
        dec.out_weights_mut()[1] = -1.0;
        let w = flatten(&enc, &dec).unwrap();
        let batch = OneHotBatch::from_indices(2, vec![0, 1, 0, 1]).unwrap();
        let channel = ChannelConfig::Awgn(AwgnConfig { snr_db: f64::INFINITY });
        let (posteriors, _) = ae_forward(&w, &batch, &channel, &mut rng(8)).unwrap();
        for (k, row) in posteriors.rows().enumerate() {
            let argmax = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            assert_eq!(argmax, batch.indices()[k]);
        }
    }
}
