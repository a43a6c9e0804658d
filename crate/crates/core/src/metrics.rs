//! Mutual-information lower bounds via mismatched decoding.
//!
//! Two receivers produce posterior approximations: an auxiliary-Gaussian
//! receiver (valid lower bound on any channel, exact maximum likelihood on
//! AWGN) and the trained decoder network. Either way the bound is
//! `log2(M) - (1/K) sum_k (-log2 q(x_k | y_k))`, estimated by Monte Carlo
//! over transmitted/received pairs.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constellation::Constellation;
use crate::error::{Error, Result};
use crate::nn::{Posteriors, PROB_CLIP};

/// Which posterior approximation produced an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReceiverKind {
    Gaussian,
    Decoder,
}

impl ReceiverKind {
    pub fn name(&self) -> &'static str {
        match self {
            ReceiverKind::Gaussian => "gaussian",
            ReceiverKind::Decoder => "decoder",
        }
    }
}

impl std::str::FromStr for ReceiverKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(ReceiverKind::Gaussian),
            "decoder" => Ok(ReceiverKind::Decoder),
            other => Err(Error::Config(format!(
                "unknown receiver kind '{other}' (expected 'gaussian' or 'decoder')"
            ))),
        }
    }
}

/// Monte-Carlo mutual-information lower bound in bits/symbol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiEstimate {
    pub bits_per_symbol: f64,
    pub num_symbols: usize,
    pub receiver: ReceiverKind,
}

/// Maximum-likelihood fit of the per-real-dimension auxiliary noise variance,
/// `sigma_G^2 = (1/2K) sum |y_k - x_k|^2`, floored at 1e-12.
pub fn fit_sigma(sent: &[Complex64], received: &[Complex64]) -> Result<f64> {
    if sent.is_empty() || sent.len() != received.len() {
        return Err(Error::InvalidInput(format!(
            "need equal nonzero lengths, got {} sent and {} received",
            sent.len(),
            received.len()
        )));
    }
    let sum: f64 = sent
        .iter()
        .zip(received)
        .map(|(x, y)| (y - x).norm_sqr())
        .sum();
    Ok((sum / (2.0 * sent.len() as f64)).max(1e-12))
}

/// Mismatched receiver assuming an auxiliary Gaussian channel with uniform
/// priors.
#[derive(Debug, Clone)]
pub struct GaussianReceiver {
    constellation: Constellation,
    sigma_sq: f64,
}

impl GaussianReceiver {
    pub fn new(constellation: Constellation, sigma_sq: f64) -> Result<Self> {
        if !(sigma_sq > 0.0) {
            return Err(Error::InvalidInput(format!(
                "auxiliary noise variance must be positive, got {sigma_sq}"
            )));
        }
        Ok(Self {
            constellation,
            sigma_sq,
        })
    }

    /// Builds the receiver with the variance fitted from input/output pairs.
    pub fn fitted(
        constellation: Constellation,
        sent: &[Complex64],
        received: &[Complex64],
    ) -> Result<Self> {
        let sigma_sq = fit_sigma(sent, received)?;
        Self::new(constellation, sigma_sq)
    }

    pub fn sigma_sq(&self) -> f64 {
        self.sigma_sq
    }

    pub fn constellation(&self) -> &Constellation {
        &self.constellation
    }

    /// Posterior over symbols given `y`: `q(x_i|y) ~ exp(-|y-x_i|^2 / (2 sigma^2))`
    /// normalized to sum 1, computed max-subtracted.
    pub fn posterior(&self, y: Complex64) -> Vec<f64> {
        let exponents = self.exponents(y);
        let max = exponents.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut out: Vec<f64> = exponents.iter().map(|e| (e - max).exp()).collect();
        let sum: f64 = out.iter().sum();
        for p in &mut out {
            *p /= sum;
        }
        out
    }

    /// `log2 q(x_target | y)` without materializing the posterior vector.
    pub fn log2_posterior_target(&self, y: Complex64, target: usize) -> f64 {
        let exponents = self.exponents(y);
        let max = exponents.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse: f64 = exponents.iter().map(|e| (e - max).exp()).sum::<f64>().ln() + max;
        (exponents[target] - lse) / std::f64::consts::LN_2
    }

    fn exponents(&self, y: Complex64) -> Vec<f64> {
        let inv = 1.0 / (2.0 * self.sigma_sq);
        self.constellation
            .points()
            .iter()
            .map(|&x| -(y - x).norm_sqr() * inv)
            .collect()
    }
}

/// MI lower bound with the mismatched Gaussian receiver: fits the auxiliary
/// variance from the pairs, then averages `log2 q(x_sent | y)`. Negative
/// Monte-Carlo results are clamped to zero.
pub fn mi_gaussian(
    sent_indices: &[usize],
    received: &[Complex64],
    constellation: &Constellation,
) -> Result<MiEstimate> {
    if sent_indices.len() != received.len() || sent_indices.is_empty() {
        return Err(Error::InvalidInput(format!(
            "need equal nonzero lengths, got {} indices and {} received",
            sent_indices.len(),
            received.len()
        )));
    }
    let sent: Vec<Complex64> = sent_indices
        .iter()
        .map(|&i| constellation.point(i))
        .collect();
    let receiver = GaussianReceiver::fitted(constellation.clone(), &sent, received)?;
    let k = sent_indices.len();
    let total: f64 = received
        .iter()
        .zip(sent_indices)
        .map(|(&y, &t)| receiver.log2_posterior_target(y, t))
        .sum();
    let m_bits = (constellation.len() as f64).log2();
    Ok(MiEstimate {
        bits_per_symbol: (m_bits + total / k as f64).max(0.0),
        num_symbols: k,
        receiver: ReceiverKind::Gaussian,
    })
}

/// MI lower bound from decoder posteriors:
/// `log2(M) - (1/K) sum_k (-log2 s_k^(target))` with probabilities clipped
/// at 1e-12. Negative results are clamped to zero.
pub fn mi_decoder(posteriors: &Posteriors, targets: &[usize]) -> Result<MiEstimate> {
    let k = posteriors.batch_len();
    if targets.len() != k || k == 0 {
        return Err(Error::InvalidInput(format!(
            "need one target per posterior row, got {} targets and {k} rows",
            targets.len()
        )));
    }
    let total: f64 = targets
        .iter()
        .enumerate()
        .map(|(row, &t)| posteriors.row(row)[t].max(PROB_CLIP).log2())
        .sum();
    let m_bits = (posteriors.m() as f64).log2();
    Ok(MiEstimate {
        bits_per_symbol: (m_bits + total / k as f64).max(0.0),
        num_symbols: k,
        receiver: ReceiverKind::Decoder,
    })
}
