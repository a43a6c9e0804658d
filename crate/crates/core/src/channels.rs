//! Seedable channel simulators.
//!
//! Three models, all operating at one sample per symbol:
//! - AWGN with noise variance `1/SNR`;
//! - a memoryless multi-span fiber model with nonlinear phase noise (NLPN)
//!   and per-span amplifier (ASE) noise;
//! - Wiener laser phase noise plus AWGN, compensated by blind phase search
//!   (BPS) carrier recovery. The argmin/decision steps make this model
//!   non-differentiable.
//!
//! Every channel is a deterministic function of (input, config, noise draw).
//! [`ChannelConfig::draw`] separates the randomness from the map itself so a
//! single noise realization can be shared across many weight realizations
//! within one optimizer iteration.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::constellation::Constellation;
use crate::error::{Error, Result};

/// Planck's constant in J*s (exact SI value).
pub const PLANCK: f64 = 6.626_070_15e-34;

/// AWGN channel. `snr_db = +inf` disables the noise entirely.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AwgnConfig {
    pub snr_db: f64,
}

impl AwgnConfig {
    /// Total complex noise variance `sigma_N^2 = 1/SNR` (half per quadrature).
    pub fn noise_variance(&self) -> f64 {
        if self.snr_db.is_infinite() && self.snr_db > 0.0 {
            0.0
        } else {
            10f64.powf(-self.snr_db / 10.0)
        }
    }
}

/// Multi-span fiber channel with nonlinear phase noise and lumped EDFA
/// amplification. `noise_figure_db = -inf` disables the ASE noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NlpnConfig {
    pub launch_power_dbm: f64,
    /// Nonlinearity parameter gamma in 1/(W*km).
    pub gamma_per_w_km: f64,
    pub alpha_db_per_km: f64,
    pub span_length_km: f64,
    pub num_spans: usize,
    pub noise_figure_db: f64,
    pub carrier_freq_hz: f64,
    pub symbol_rate_baud: f64,
}

impl NlpnConfig {
    /// Fiber parameters used throughout the experiments: gamma = 1.27 /W/km,
    /// alpha = 0.2 dB/km, NF = 5 dB, Fc = 193.41 THz, 10 spans of 100 km at
    /// 32 GBd.
    pub fn standard_fiber(launch_power_dbm: f64) -> Self {
        Self {
            launch_power_dbm,
            gamma_per_w_km: 1.27,
            alpha_db_per_km: 0.2,
            span_length_km: 100.0,
            num_spans: 10,
            noise_figure_db: 5.0,
            carrier_freq_hz: 193.41e12,
            symbol_rate_baud: 32e9,
        }
    }

    /// Attenuation in nepers/km (attenuation-positive convention).
    pub fn alpha_linear(&self) -> f64 {
        self.alpha_db_per_km * std::f64::consts::LN_10 / 10.0
    }

    /// Effective span length `(1 - exp(-alpha L)) / alpha`, reducing to `L`
    /// for a lossless fiber.
    pub fn effective_length_km(&self) -> f64 {
        let alpha = self.alpha_linear();
        if alpha == 0.0 {
            self.span_length_km
        } else {
            (1.0 - (-alpha * self.span_length_km).exp()) / alpha
        }
    }

    /// Amplifier gain exactly compensating the span loss, `G = exp(alpha L)`.
    pub fn amplifier_gain(&self) -> f64 {
        (self.alpha_linear() * self.span_length_km).exp()
    }

    /// Per-span ASE variance `P_n = h Fc Rs (G*NF - 1)/2` in watts, clamped
    /// at zero.
    pub fn ase_variance(&self) -> f64 {
        let nf = 10f64.powf(self.noise_figure_db / 10.0);
        let excess = self.amplifier_gain() * nf - 1.0;
        (PLANCK * self.carrier_freq_hz * self.symbol_rate_baud * excess / 2.0).max(0.0)
    }

    pub fn launch_power_watts(&self) -> Result<f64> {
        let p = 10f64.powf((self.launch_power_dbm - 30.0) / 10.0);
        if p <= 0.0 || !p.is_finite() {
            return Err(Error::InvalidInput(format!(
                "launch power must be positive and finite, got {} dBm",
                self.launch_power_dbm
            )));
        }
        Ok(p)
    }
}

/// Wiener phase noise + AWGN channel with blind-phase-search recovery.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseNoiseBpsConfig {
    pub snr_db: f64,
    /// Combined transmitter and receiver oscillator linewidth in Hz.
    pub linewidth_hz: f64,
    pub symbol_rate_baud: f64,
    /// Number of BPS test phases, `N_s >= 2`.
    pub num_test_phases: usize,
    /// BPS averaging window, `W >= 1` symbols.
    pub window_size: usize,
}

impl PhaseNoiseBpsConfig {
    pub fn symbol_period(&self) -> f64 {
        1.0 / self.symbol_rate_baud
    }

    /// Variance of the per-symbol phase increment, `2 pi dv T_s`.
    pub fn phase_increment_variance(&self) -> f64 {
        TAU * self.linewidth_hz * self.symbol_period()
    }

    pub fn noise_variance(&self) -> f64 {
        AwgnConfig { snr_db: self.snr_db }.noise_variance()
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_test_phases < 2 {
            return Err(Error::Config(format!(
                "BPS needs at least 2 test phases, got {}",
                self.num_test_phases
            )));
        }
        if self.window_size < 1 {
            return Err(Error::Config("BPS window size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Tagged union over the supported channel models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ChannelConfig {
    Awgn(AwgnConfig),
    Nlpn(NlpnConfig),
    PhaseNoiseBps(PhaseNoiseBpsConfig),
}

impl ChannelConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ChannelConfig::Awgn(_) => "awgn",
            ChannelConfig::Nlpn(_) => "nlpn",
            ChannelConfig::PhaseNoiseBps(_) => "phase-noise-bps",
        }
    }

    /// Whether the model is differentiable, i.e. usable with the
    /// backpropagation baseline.
    pub fn supports_gradient(&self) -> bool {
        !matches!(self, ChannelConfig::PhaseNoiseBps(_))
    }

    /// Draws one noise realization for a sequence of `len` symbols. The draw
    /// is independent of the channel input, so it can be reused to evaluate
    /// the channel as a deterministic map at many different inputs.
    pub fn draw<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> ChannelDraw {
        match self {
            ChannelConfig::Awgn(cfg) => ChannelDraw::Awgn {
                noise: complex_gaussian(cfg.noise_variance(), len, rng),
            },
            ChannelConfig::Nlpn(cfg) => ChannelDraw::Nlpn {
                ase: complex_gaussian(cfg.ase_variance(), len * cfg.num_spans, rng),
            },
            ChannelConfig::PhaseNoiseBps(cfg) => {
                let phases = wiener_phase(len, cfg, rng);
                let noise = complex_gaussian(cfg.noise_variance(), len, rng);
                ChannelDraw::PhaseNoiseBps { phases, noise }
            }
        }
    }

    /// Applies the channel with a fresh noise realization from `rng`.
    ///
    /// `reference` is the decision alphabet used by BPS recovery (the current
    /// learned constellation); AWGN and NLPN ignore it.
    pub fn apply<R: Rng + ?Sized>(
        &self,
        x: &[Complex64],
        reference: &Constellation,
        rng: &mut R,
    ) -> Result<Vec<Complex64>> {
        let draw = self.draw(x.len(), rng);
        self.apply_with_draw(x, reference, &draw)
    }

    /// Applies the channel against a fixed noise realization.
    pub fn apply_with_draw(
        &self,
        x: &[Complex64],
        reference: &Constellation,
        draw: &ChannelDraw,
    ) -> Result<Vec<Complex64>> {
        match (self, draw) {
            (ChannelConfig::Awgn(_), ChannelDraw::Awgn { noise }) => {
                check_draw_len(noise.len(), x.len())?;
                Ok(x.iter().zip(noise).map(|(&s, &n)| s + n).collect())
            }
            (ChannelConfig::Nlpn(cfg), ChannelDraw::Nlpn { ase }) => {
                check_draw_len(ase.len(), x.len() * cfg.num_spans)?;
                let raw = nlpn_raw_outputs(x, cfg, ase)?;
                let scale = nlpn_renorm_scale(&raw)?;
                Ok(raw.into_iter().map(|z| z * scale).collect())
            }
            (ChannelConfig::PhaseNoiseBps(cfg), ChannelDraw::PhaseNoiseBps { phases, noise }) => {
                check_draw_len(phases.len(), x.len())?;
                check_draw_len(noise.len(), x.len())?;
                let z: Vec<Complex64> = x
                    .iter()
                    .zip(phases.iter().zip(noise))
                    .map(|(&s, (&phi, &n))| s * Complex64::from_polar(1.0, phi) + n)
                    .collect();
                let (y, _) = bps_recover(&z, reference, cfg)?;
                Ok(y)
            }
            _ => Err(Error::InvalidInput(
                "channel draw does not match channel kind".into(),
            )),
        }
    }
}

fn check_draw_len(got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::InvalidInput(format!(
            "noise draw length {got} does not match required {want}"
        )));
    }
    Ok(())
}

/// One noise realization, reusable across weight realizations.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelDraw {
    Awgn {
        noise: Vec<Complex64>,
    },
    Nlpn {
        /// Symbol-major ASE samples: span `s` of symbol `k` at `k * num_spans + s`.
        ase: Vec<Complex64>,
    },
    PhaseNoiseBps {
        /// Accumulated Wiener phase per symbol.
        phases: Vec<f64>,
        noise: Vec<Complex64>,
    },
}

/// Circularly symmetric complex Gaussian samples with the given total
/// variance (half per quadrature).
fn complex_gaussian<R: Rng + ?Sized>(
    total_variance: f64,
    len: usize,
    rng: &mut R,
) -> Vec<Complex64> {
    if total_variance == 0.0 {
        return vec![Complex64::new(0.0, 0.0); len];
    }
    let normal = Normal::new(0.0, (total_variance / 2.0).sqrt()).expect("valid std");
    (0..len)
        .map(|_| Complex64::new(normal.sample(rng), normal.sample(rng)))
        .collect()
}

/// AWGN: `y_k = x_k + n_k` with total noise variance `1/SNR`.
pub fn awgn_apply<R: Rng + ?Sized>(
    x: &[Complex64],
    cfg: &AwgnConfig,
    rng: &mut R,
) -> Vec<Complex64> {
    let noise = complex_gaussian(cfg.noise_variance(), x.len(), rng);
    x.iter().zip(noise).map(|(&s, n)| s + n).collect()
}

/// One symbol through the span recursion, in normalized (unit launch power)
/// units: `z <- z * exp(i gamma L_eff P |z|^2) + n_ASE / sqrt(P)` per span.
fn nlpn_symbol(cfg: &NlpnConfig, power_w: f64, x: Complex64, ase: &[Complex64]) -> Complex64 {
    let gamma_leff = cfg.gamma_per_w_km * cfg.effective_length_km();
    let inv_sqrt_p = power_w.sqrt().recip();
    let mut z = x;
    for n in ase {
        let theta = gamma_leff * power_w * z.norm_sqr();
        z = z * Complex64::from_polar(1.0, theta) + n * inv_sqrt_p;
    }
    z
}

fn nlpn_raw_outputs(x: &[Complex64], cfg: &NlpnConfig, ase: &[Complex64]) -> Result<Vec<Complex64>> {
    let power_w = cfg.launch_power_watts()?;
    Ok(x.iter()
        .enumerate()
        .map(|(k, &s)| nlpn_symbol(cfg, power_w, s, &ase[k * cfg.num_spans..(k + 1) * cfg.num_spans]))
        .collect())
}

fn nlpn_renorm_scale(raw: &[Complex64]) -> Result<f64> {
    let mean_power = raw.iter().map(|z| z.norm_sqr()).sum::<f64>() / raw.len() as f64;
    if mean_power <= 0.0 || !mean_power.is_finite() {
        return Err(Error::InvalidInput(
            "NLPN output has zero or non-finite power".into(),
        ));
    }
    Ok(mean_power.sqrt().recip())
}

/// NLPN fiber channel: per-span nonlinear phase rotation plus ASE noise,
/// output rescaled to unit average power.
pub fn nlpn_apply<R: Rng + ?Sized>(
    x: &[Complex64],
    cfg: &NlpnConfig,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    cfg.launch_power_watts()?;
    let draw = ChannelConfig::Nlpn(*cfg).draw(x.len(), rng);
    ChannelConfig::Nlpn(*cfg).apply_with_draw(x, &dummy_reference(), &draw)
}

fn dummy_reference() -> Constellation {
    Constellation::from_unit_power(vec![Complex64::new(1.0, 0.0)], 1e-9)
        .expect("single unit point")
}

/// Accumulated Wiener phase: `phi_0 = 0`, `phi_k = phi_{k-1} + N(0, sigma_phi^2)`.
pub fn wiener_phase<R: Rng + ?Sized>(
    len: usize,
    cfg: &PhaseNoiseBpsConfig,
    rng: &mut R,
) -> Vec<f64> {
    let var = cfg.phase_increment_variance();
    let mut phases = Vec::with_capacity(len);
    let mut phi = 0.0;
    if var == 0.0 {
        return vec![0.0; len];
    }
    let normal = Normal::new(0.0, var.sqrt()).expect("valid std");
    for k in 0..len {
        if k > 0 {
            phi += normal.sample(rng);
        }
        phases.push(phi);
    }
    phases
}

/// Windowed BPS decision distances, row-major `len x N_s`.
///
/// Entry `(k, i)` is the sum over the window centered on symbol `k`
/// (truncated at the sequence edges) of the squared distance between each
/// symbol rotated by test phase `theta_i = (i/N_s) 2 pi` and its nearest
/// reference point.
pub fn bps_windowed_distances(
    z: &[Complex64],
    reference: &Constellation,
    cfg: &PhaseNoiseBpsConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if reference.is_empty() {
        return Err(Error::InvalidInput("empty BPS reference constellation".into()));
    }
    if z.is_empty() {
        return Err(Error::InvalidInput("empty BPS input sequence".into()));
    }
    let len = z.len();
    let n_s = cfg.num_test_phases;
    let w = cfg.window_size;
    // Window covers (w-1)/2 symbols before and w/2 after the current one.
    let before = (w - 1) / 2;
    let after = w / 2;

    let mut windowed = vec![0.0; len * n_s];
    let mut prefix = vec![0.0; len + 1];
    for i in 0..n_s {
        let rot = Complex64::from_polar(1.0, -(i as f64) / n_s as f64 * TAU);
        for (k, &sym) in z.iter().enumerate() {
            let rotated = sym * rot;
            let mut best = f64::INFINITY;
            for &c in reference.points() {
                let d = (rotated - c).norm_sqr();
                if d < best {
                    best = d;
                }
            }
            prefix[k + 1] = prefix[k] + best;
        }
        for k in 0..len {
            let lo = k.saturating_sub(before);
            let hi = (k + after).min(len - 1);
            windowed[k * n_s + i] = prefix[hi + 1] - prefix[lo];
        }
    }
    Ok(windowed)
}

/// Blind phase search: rotates each symbol by the test phase minimizing the
/// windowed decision distance (ties broken by lowest phase index). Returns
/// the compensated sequence and the chosen phase per symbol.
pub fn bps_recover(
    z: &[Complex64],
    reference: &Constellation,
    cfg: &PhaseNoiseBpsConfig,
) -> Result<(Vec<Complex64>, Vec<f64>)> {
    let n_s = cfg.num_test_phases;
    let distances = bps_windowed_distances(z, reference, cfg)?;
    let mut y = Vec::with_capacity(z.len());
    let mut estimates = Vec::with_capacity(z.len());
    for (k, &sym) in z.iter().enumerate() {
        let row = &distances[k * n_s..(k + 1) * n_s];
        let mut best_i = 0;
        let mut best_d = row[0];
        for (i, &d) in row.iter().enumerate().skip(1) {
            if d < best_d {
                best_d = d;
                best_i = i;
            }
        }
        let theta = best_i as f64 / n_s as f64 * TAU;
        y.push(sym * Complex64::from_polar(1.0, -theta));
        estimates.push(theta);
    }
    Ok((y, estimates))
}

/// Full non-differentiable channel: Wiener phase rotation, AWGN, then BPS
/// phase recovery against `reference`.
pub fn phase_noise_channel_apply<R: Rng + ?Sized>(
    x: &[Complex64],
    cfg: &PhaseNoiseBpsConfig,
    reference: &Constellation,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    let channel = ChannelConfig::PhaseNoiseBps(*cfg);
    let draw = channel.draw(x.len(), rng);
    channel.apply_with_draw(x, reference, &draw)
}

/// Per-symbol deterministic channel map for gradient computation, with every
/// stochastic and sequence-level quantity frozen. Only differentiable models
/// can be frozen.
#[derive(Debug)]
pub enum FrozenChannel<'a> {
    Awgn {
        noise: &'a [Complex64],
    },
    Nlpn {
        cfg: &'a NlpnConfig,
        power_w: f64,
        ase: &'a [Complex64],
        renorm_scale: f64,
    },
}

impl FrozenChannel<'_> {
    /// Output of symbol slot `k` for input `x`, before any output
    /// renormalization.
    pub fn apply_raw(&self, k: usize, x: Complex64) -> Complex64 {
        match self {
            FrozenChannel::Awgn { noise } => x + noise[k],
            FrozenChannel::Nlpn {
                cfg, power_w, ase, ..
            } => {
                let spans = &ase[k * cfg.num_spans..(k + 1) * cfg.num_spans];
                nlpn_symbol(cfg, *power_w, x, spans)
            }
        }
    }

    /// Frozen output renormalization factor (1 for channels that do not
    /// renormalize).
    pub fn renorm_scale(&self) -> f64 {
        match self {
            FrozenChannel::Awgn { .. } => 1.0,
            FrozenChannel::Nlpn { renorm_scale, .. } => *renorm_scale,
        }
    }

    /// Whether the channel rescales its output to unit empirical power, i.e.
    /// whether the renormalization factor is itself a function of the inputs.
    pub fn renormalizes_output(&self) -> bool {
        matches!(self, FrozenChannel::Nlpn { .. })
    }

    /// Output of symbol slot `k` for input `x`.
    pub fn apply(&self, k: usize, x: Complex64) -> Complex64 {
        self.apply_raw(k, x) * self.renorm_scale()
    }
}

/// Freezes a channel draw into a per-symbol map around `nominal_input` (the
/// unperturbed channel input, used to pin the NLPN output renormalization).
pub fn freeze_for_gradient<'a>(
    channel: &'a ChannelConfig,
    draw: &'a ChannelDraw,
    nominal_input: &[Complex64],
) -> Result<FrozenChannel<'a>> {
    match (channel, draw) {
        (ChannelConfig::Awgn(_), ChannelDraw::Awgn { noise }) => {
            check_draw_len(noise.len(), nominal_input.len())?;
            Ok(FrozenChannel::Awgn { noise })
        }
        (ChannelConfig::Nlpn(cfg), ChannelDraw::Nlpn { ase }) => {
            check_draw_len(ase.len(), nominal_input.len() * cfg.num_spans)?;
            let raw = nlpn_raw_outputs(nominal_input, cfg, ase)?;
            Ok(FrozenChannel::Nlpn {
                cfg,
                power_w: cfg.launch_power_watts()?,
                ase,
                renorm_scale: nlpn_renorm_scale(&raw)?,
            })
        }
        (ChannelConfig::PhaseNoiseBps(_), _) => Err(Error::UnsupportedChannel {
            channel: "phase-noise-bps",
            operation: "gradient computation",
        }),
        _ => Err(Error::InvalidInput(
            "channel draw does not match channel kind".into(),
        )),
    }
}
