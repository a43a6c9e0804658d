//! Training orchestration: batch construction, the CKF/backprop iteration
//! loop with convergence detection, the (q, r) grid search, and the
//! train/test protocol.
//!
//! Everything is a deterministic function of the master seed: weight
//! initialization, batch order, channel noise, validation and evaluation all
//! consume independent named streams derived from it.

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::ChannelConfig;
use crate::ckf::{ckf_step, CkfHyperparams, CkfState, MeasurementBatch};
use crate::constellation::Constellation;
use crate::error::{Error, Result};
use crate::metrics::{mi_decoder, mi_gaussian, ReceiverKind};
use crate::nn::{
    ae_forward, backprop_adam_step, constellation_of, AdamConfig, AdamState, DecoderNet,
    OneHotBatch, WeightLayout, WeightVector,
};
use crate::seed::SeedSpace;

/// Hyperparameter values searched by default for both q and r:
/// `{1, 1e-1, ..., 1e-6}`.
pub const DEFAULT_GRID: [f64; 7] = [1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6];

/// Symbols used for the held-out run that scores grid-search cells.
const GRID_SELECT_SYMBOLS: usize = 10_000;

/// Default iteration caps.
pub const DEFAULT_CKF_MAX_ITERATIONS: usize = 2000;
pub const DEFAULT_BP_MAX_ITERATIONS: usize = 20_000;

/// Stop when the relative change of the loss moving average stays below
/// `rel_tol` for `consecutive_hits` checks (one check per `window`
/// iterations).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceConfig {
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_hits")]
    pub consecutive_hits: usize,
}

fn default_window() -> usize {
    50
}
fn default_rel_tol() -> f64 {
    1e-4
}
fn default_hits() -> usize {
    3
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            window: default_window(),
            rel_tol: default_rel_tol(),
            consecutive_hits: default_hits(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OptimizerConfig {
    Ckf(CkfHyperparams),
    Backprop(AdamConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Alphabet size (a power of two).
    pub m: usize,
    /// Symbols per iteration; must be a multiple of `m`.
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    pub channel: ChannelConfig,
    pub max_iterations: usize,
    pub convergence: ConvergenceConfig,
    pub master_seed: u64,
}

impl TrainConfig {
    /// CKF training with the default batch size `32 M` and iteration cap.
    pub fn ckf(m: usize, hp: CkfHyperparams, channel: ChannelConfig, master_seed: u64) -> Self {
        Self {
            m,
            batch_size: 32 * m,
            optimizer: OptimizerConfig::Ckf(hp),
            channel,
            max_iterations: DEFAULT_CKF_MAX_ITERATIONS,
            convergence: ConvergenceConfig::default(),
            master_seed,
        }
    }

    /// Backprop/Adam training with the default batch size and iteration cap.
    pub fn backprop(m: usize, adam: AdamConfig, channel: ChannelConfig, master_seed: u64) -> Self {
        Self {
            m,
            batch_size: 32 * m,
            optimizer: OptimizerConfig::Backprop(adam),
            channel,
            max_iterations: DEFAULT_BP_MAX_ITERATIONS,
            convergence: ConvergenceConfig::default(),
            master_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 || !self.m.is_power_of_two() {
            return Err(Error::Config(format!(
                "alphabet size must be a power of two >= 2, got {}",
                self.m
            )));
        }
        if self.batch_size == 0 || self.batch_size % self.m != 0 {
            return Err(Error::Config(format!(
                "batch size {} must be a positive multiple of M = {}",
                self.batch_size, self.m
            )));
        }
        if self.convergence.window == 0 {
            return Err(Error::Config("convergence window must be >= 1".into()));
        }
        if self.max_iterations != 0 && self.max_iterations < self.convergence.window {
            return Err(Error::Config(format!(
                "max_iterations {} must be 0 or >= the convergence window {}",
                self.max_iterations, self.convergence.window
            )));
        }
        if let OptimizerConfig::Ckf(hp) = &self.optimizer {
            CkfHyperparams::new(hp.q, hp.r)?;
        }
        Ok(())
    }
}

/// Outcome of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub final_weights: WeightVector,
    /// Mean cross-entropy (nats) per iteration.
    pub loss_trace: Vec<f64>,
    /// Decoder-receiver MI on a fresh validation batch, bits/symbol.
    pub mi_validation: f64,
    pub iterations_run: usize,
    pub hyperparams_used: OptimizerConfig,
}

/// Balanced shuffled batch: every symbol appears exactly `b/m` times, targets
/// equal the hot indices.
pub fn make_batch<R: Rng + ?Sized>(m: usize, b: usize, rng: &mut R) -> Result<MeasurementBatch> {
    if m == 0 || b == 0 || b % m != 0 {
        return Err(Error::Config(format!(
            "batch size {b} must be a positive multiple of M = {m}"
        )));
    }
    let mut indices: Vec<usize> = (0..b).map(|k| k % m).collect();
    indices.shuffle(rng);
    Ok(MeasurementBatch::new(OneHotBatch::from_indices(m, indices)?))
}

struct ConvergenceTracker {
    cfg: ConvergenceConfig,
    losses: Vec<f64>,
    prev_avg: Option<f64>,
    hits: usize,
}

impl ConvergenceTracker {
    fn new(cfg: ConvergenceConfig) -> Self {
        Self {
            cfg,
            losses: Vec::new(),
            prev_avg: None,
            hits: 0,
        }
    }

    /// Records one loss; returns true once converged.
    fn update(&mut self, loss: f64) -> bool {
        self.losses.push(loss);
        if self.losses.len() % self.cfg.window != 0 {
            return false;
        }
        let window = &self.losses[self.losses.len() - self.cfg.window..];
        let avg = window.iter().sum::<f64>() / self.cfg.window as f64;
        if let Some(prev) = self.prev_avg {
            let rel = (avg - prev).abs() / prev.abs().max(1e-12);
            if rel < self.cfg.rel_tol {
                self.hits += 1;
            } else {
                self.hits = 0;
            }
        }
        self.prev_avg = Some(avg);
        self.hits >= self.cfg.consecutive_hits
    }
}

/// Trains one autoencoder from Glorot initialization (identity initial
/// covariance for the CKF) until convergence or the iteration cap.
pub fn train(cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    let seeds = SeedSpace::new(cfg.master_seed);
    let layout = WeightLayout::new(cfg.m)?;
    let w0 = WeightVector::glorot(layout, &mut seeds.stream("init"));
    let mut batch_rng = seeds.stream("batch");
    let mut noise_rng = seeds.stream("channel-noise");
    let mut tracker = ConvergenceTracker::new(cfg.convergence);
    let mut trace = Vec::new();

    let final_weights = match &cfg.optimizer {
        OptimizerConfig::Ckf(hp) => {
            let hp = CkfHyperparams::new(hp.q, hp.r)?;
            let mut state = CkfState::from_weights(&w0);
            for j in 1..=cfg.max_iterations {
                let batch = make_batch(cfg.m, cfg.batch_size, &mut batch_rng)?;
                let (next, loss) =
                    ckf_step(&state, &hp, layout, &batch, &cfg.channel, &mut noise_rng).map_err(
                        |e| match e {
                            Error::NumericalBreakdown(msg) => Error::NumericalBreakdown(format!(
                                "iteration {j} (q={:e}, r={:e}): {msg}",
                                hp.q, hp.r
                            )),
                            other => other,
                        },
                    )?;
                state = next;
                trace.push(loss);
                if tracker.update(loss) {
                    break;
                }
            }
            state.weights(layout)?
        }
        OptimizerConfig::Backprop(adam_cfg) => {
            let mut weights = w0;
            let mut adam = AdamState::new(weights.len(), *adam_cfg);
            for _ in 1..=cfg.max_iterations {
                let batch = make_batch(cfg.m, cfg.batch_size, &mut batch_rng)?;
                let (next, loss) = backprop_adam_step(
                    &weights,
                    batch.inputs(),
                    &cfg.channel,
                    &mut adam,
                    &mut noise_rng,
                )?;
                weights = next;
                trace.push(loss);
                if tracker.update(loss) {
                    break;
                }
            }
            weights
        }
    };

    let mut val_rng = seeds.stream("validation");
    let batch = make_batch(cfg.m, cfg.batch_size, &mut val_rng)?;
    let (posteriors, _) = ae_forward(&final_weights, batch.inputs(), &cfg.channel, &mut val_rng)?;
    let mi_validation = mi_decoder(&posteriors, batch.targets())?.bits_per_symbol;

    Ok(TrainReport {
        final_weights,
        iterations_run: trace.len(),
        loss_trace: trace,
        mi_validation,
        hyperparams_used: cfg.optimizer.clone(),
    })
}

/// Independent test simulations and the reported statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalProtocol {
    pub num_runs: usize,
    pub symbols_per_run: usize,
}

/// The testing protocol used for the headline results: 100 simulations of
/// 1e5 symbols.
pub const PAPER_PROTOCOL: EvalProtocol = EvalProtocol {
    num_runs: 100,
    symbols_per_run: 100_000,
};

/// Desk-scale protocol: 20 simulations of 1e4 symbols.
pub const DESK_PROTOCOL: EvalProtocol = EvalProtocol {
    num_runs: 20,
    symbols_per_run: 10_000,
};

/// Per-run MI values and their summary statistics (mean, max, 25th
/// percentile with linear interpolation).
#[derive(Debug, Clone, PartialEq)]
pub struct EvalStats {
    pub mean: f64,
    pub max: f64,
    pub p25: f64,
    pub per_run: Vec<f64>,
}

impl EvalStats {
    fn from_runs(per_run: Vec<f64>) -> Self {
        let mean = per_run.iter().sum::<f64>() / per_run.len() as f64;
        let max = per_run.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sorted = per_run.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let p25 = percentile(&sorted, 25.0);
        Self {
            mean,
            max,
            p25,
            per_run,
        }
    }
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let rank = p / 100.0 * (n - 1) as f64;
    let lo = rank.floor() as usize;
    let frac = rank - lo as f64;
    if lo + 1 >= n {
        sorted[n - 1]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

/// Evaluates trained weights over independent simulation runs with either
/// receiver.
pub fn evaluate(
    weights: &WeightVector,
    channel: &ChannelConfig,
    protocol: EvalProtocol,
    receiver: ReceiverKind,
    eval_seed: u64,
) -> Result<EvalStats> {
    let (enc, dec) = weights.unflatten();
    let constellation = constellation_of(&enc)?;
    evaluate_with(&constellation, Some(&dec), channel, protocol, receiver, eval_seed)
}

/// Evaluates a bare constellation (no trained decoder) with the Gaussian
/// receiver.
pub fn evaluate_constellation(
    constellation: &Constellation,
    channel: &ChannelConfig,
    protocol: EvalProtocol,
    eval_seed: u64,
) -> Result<EvalStats> {
    evaluate_with(
        constellation,
        None,
        channel,
        protocol,
        ReceiverKind::Gaussian,
        eval_seed,
    )
}

fn evaluate_with(
    constellation: &Constellation,
    decoder: Option<&DecoderNet>,
    channel: &ChannelConfig,
    protocol: EvalProtocol,
    receiver: ReceiverKind,
    eval_seed: u64,
) -> Result<EvalStats> {
    if protocol.num_runs == 0 || protocol.symbols_per_run == 0 {
        return Err(Error::Config(
            "evaluation needs at least one run and one symbol per run".into(),
        ));
    }
    if receiver == ReceiverKind::Decoder && decoder.is_none() {
        return Err(Error::Config(
            "decoder receiver requires trained weights".into(),
        ));
    }
    let seeds = SeedSpace::new(eval_seed);
    let per_run: Vec<f64> = (0..protocol.num_runs)
        .into_par_iter()
        .map(|run| {
            let mut rng = seeds.indexed_stream("eval-run", run as u64);
            single_run_mi(
                constellation,
                decoder,
                channel,
                protocol.symbols_per_run,
                receiver,
                &mut rng,
            )
        })
        .collect::<Result<_>>()?;
    Ok(EvalStats::from_runs(per_run))
}

fn single_run_mi<R: Rng + ?Sized>(
    constellation: &Constellation,
    decoder: Option<&DecoderNet>,
    channel: &ChannelConfig,
    symbols: usize,
    receiver: ReceiverKind,
    rng: &mut R,
) -> Result<f64> {
    let m = constellation.len();
    let indices: Vec<usize> = (0..symbols).map(|_| rng.random_range(0..m)).collect();
    let xs: Vec<Complex64> = indices.iter().map(|&i| constellation.point(i)).collect();
    let ys = channel.apply(&xs, constellation, rng)?;
    match receiver {
        ReceiverKind::Gaussian => Ok(mi_gaussian(&indices, &ys, constellation)?.bits_per_symbol),
        ReceiverKind::Decoder => {
            let dec = decoder.expect("checked by caller");
            let mut probs = vec![0.0; symbols * m];
            let mut scratch = dec.scratch();
            for (k, &y) in ys.iter().enumerate() {
                dec.posterior_into(y, &mut probs[k * m..(k + 1) * m], &mut scratch);
            }
            let posteriors = crate::nn::Posteriors::new(symbols, m, probs)?;
            Ok(mi_decoder(&posteriors, &indices)?.bits_per_symbol)
        }
    }
}

/// One grid-search cell: hyperparameters plus the training outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub q: f64,
    pub r: f64,
    /// Last traced loss (nats), when training finished.
    pub final_loss: Option<f64>,
    /// Decoder-receiver validation MI from the train report.
    pub validation_mi: Option<f64>,
    /// Gaussian-receiver MI on the shared held-out selection run.
    pub selection_mi: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct GridSearchReport {
    pub best: CkfHyperparams,
    pub best_report: TrainReport,
    pub cells: Vec<GridCell>,
}

/// Trains one autoencoder per (q, r) pair, all from the same master seed, and
/// selects the pair with the highest mismatched-Gaussian MI on a shared
/// held-out test run. Ties break towards smaller q, then smaller r.
pub fn grid_search(
    base: &TrainConfig,
    q_set: &[f64],
    r_set: &[f64],
) -> Result<GridSearchReport> {
    if q_set.is_empty() || r_set.is_empty() {
        return Err(Error::Config("grid search needs non-empty q and r sets".into()));
    }
    if !matches!(base.optimizer, OptimizerConfig::Ckf(_)) {
        return Err(Error::Config(
            "grid search applies to the CKF optimizer only".into(),
        ));
    }
    let pairs: Vec<(f64, f64)> = q_set
        .iter()
        .flat_map(|&q| r_set.iter().map(move |&r| (q, r)))
        .collect();

    let outcomes: Vec<(GridCell, Option<TrainReport>)> = pairs
        .par_iter()
        .map(|&(q, r)| grid_cell(base, q, r))
        .collect();

    let mut best: Option<(usize, f64)> = None;
    for (i, (cell, report)) in outcomes.iter().enumerate() {
        let (Some(mi), Some(_)) = (cell.selection_mi, report.as_ref()) else {
            continue;
        };
        let better = match best {
            None => true,
            Some((j, best_mi)) => {
                let (bq, br) = pairs[j];
                mi > best_mi || (mi == best_mi && (cell.q < bq || (cell.q == bq && cell.r < br)))
            }
        };
        if better {
            best = Some((i, mi));
        }
    }

    let cells: Vec<GridCell> = outcomes.iter().map(|(c, _)| c.clone()).collect();
    match best {
        Some((i, _)) => Ok(GridSearchReport {
            best: CkfHyperparams {
                q: pairs[i].0,
                r: pairs[i].1,
            },
            best_report: outcomes[i].1.clone().expect("selected cell has a report"),
            cells,
        }),
        None => {
            let summary = cells
                .iter()
                .map(|c| {
                    format!(
                        "q={:e} r={:e}: {}",
                        c.q,
                        c.r,
                        c.error.as_deref().unwrap_or("no finite selection MI")
                    )
                })
                .collect::<Vec<_>>()
                .join("\n");
            Err(Error::SearchFailed(summary))
        }
    }
}

fn grid_cell(base: &TrainConfig, q: f64, r: f64) -> (GridCell, Option<TrainReport>) {
    let mut cell = GridCell {
        q,
        r,
        final_loss: None,
        validation_mi: None,
        selection_mi: None,
        error: None,
    };
    let hp = match CkfHyperparams::new(q, r) {
        Ok(hp) => hp,
        Err(e) => {
            cell.error = Some(e.to_string());
            return (cell, None);
        }
    };
    let cfg = TrainConfig {
        optimizer: OptimizerConfig::Ckf(hp),
        ..base.clone()
    };
    match train(&cfg) {
        Ok(report) => {
            cell.final_loss = report.loss_trace.last().copied();
            cell.validation_mi = Some(report.mi_validation);
            if report.final_weights.values().iter().any(|v| !v.is_finite()) {
                cell.error = Some("training diverged to non-finite weights".into());
                return (cell, None);
            }
            match selection_run_mi(&report.final_weights, &base.channel, base.master_seed) {
                Ok(mi) if mi.is_finite() => {
                    cell.selection_mi = Some(mi);
                    (cell, Some(report))
                }
                Ok(mi) => {
                    cell.error = Some(format!("selection MI is not finite: {mi}"));
                    (cell, None)
                }
                Err(e) => {
                    cell.error = Some(e.to_string());
                    (cell, None)
                }
            }
        }
        Err(e) => {
            cell.error = Some(e.to_string());
            (cell, None)
        }
    }
}

/// Gaussian-receiver MI of one held-out run, identical across grid cells.
fn selection_run_mi(weights: &WeightVector, channel: &ChannelConfig, master_seed: u64) -> Result<f64> {
    let (enc, _) = weights.unflatten();
    let constellation = constellation_of(&enc)?;
    let mut rng = SeedSpace::new(master_seed).stream("grid-select");
    single_run_mi(
        &constellation,
        None,
        channel,
        GRID_SELECT_SYMBOLS,
        ReceiverKind::Gaussian,
        &mut rng,
    )
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

    fn noiseless() -> ChannelConfig {
        ChannelConfig::Awgn(AwgnConfig { snr_db: f64::INFINITY })
    }

    #[test]
    fn make_batch_is_balanced() {
        let batch = make_batch(4, 8, &mut rng(0)).unwrap();
        let mut hist = [0usize; 4];
        for &i in batch.targets() {
            hist[i] += 1;
        }
        assert_eq!(hist, [2, 2, 2, 2]);
    }

    #[test]
    fn make_batch_histogram_always_flat() {
        for seed in 0..10 {
            let batch = make_batch(16, 512, &mut rng(seed)).unwrap();
            let mut hist = vec![0usize; 16];
            for &i in batch.targets() {
                hist[i] += 1;
            }
            assert!(hist.iter().all(|&c| c == 32));
        }
    }

    #[test]
    fn make_batch_same_seed_same_permutation() {
        let a = make_batch(8, 64, &mut rng(5)).unwrap();
        let b = make_batch(8, 64, &mut rng(5)).unwrap();
        assert_eq!(a.targets(), b.targets());
    }

    #[test]
    fn make_batch_rejects_indivisible() {
        assert!(make_batch(4, 10, &mut rng(0)).is_err());
        assert!(make_batch(4, 0, &mut rng(0)).is_err());
    }

    #[test]
    fn measured_vector_is_zero() {
        let batch = make_batch(4, 16, &mut rng(1)).unwrap();
        assert!(batch.measured().iter().all(|&v| v == 0.0));
        assert_eq!(batch.measured().len(), 16);
    }

    #[test]
    fn zero_iterations_returns_initial_weights() {
        let mut cfg = TrainConfig::ckf(
            4,
            CkfHyperparams::new(1e-3, 1e-2).unwrap(),
            noiseless(),
            99,
        );
        cfg.max_iterations = 0;
        let report = train(&cfg).unwrap();
        assert!(report.loss_trace.is_empty());
        assert_eq!(report.iterations_run, 0);
        let layout = WeightLayout::new(4).unwrap();
        let expected = WeightVector::glorot(layout, &mut SeedSpace::new(99).stream("init"));
        assert_eq!(report.final_weights.values(), expected.values());
    }

    #[test]
    fn train_is_deterministic_in_master_seed() {
        let mut cfg = TrainConfig::ckf(
            4,
            CkfHyperparams::new(1e-3, 1e-2).unwrap(),
            ChannelConfig::Awgn(AwgnConfig { snr_db: 12.0 }),
            7,
        );
        cfg.max_iterations = 60;
        cfg.convergence.consecutive_hits = usize::MAX;
        let a = train(&cfg).unwrap();
        let b = train(&cfg).unwrap();
        assert_eq!(a.final_weights.values(), b.final_weights.values());
        assert_eq!(a.loss_trace, b.loss_trace);
        assert_eq!(a.mi_validation.to_bits(), b.mi_validation.to_bits());
    }

    #[test]
    fn vanishing_gain_keeps_weights_near_initial() {
        let mut cfg = TrainConfig::ckf(
            4,
            CkfHyperparams::new(0.0, 1e12).unwrap(),
            ChannelConfig::Awgn(AwgnConfig { snr_db: 10.0 }),
            11,
        );
        cfg.max_iterations = 50;
        let report = train(&cfg).unwrap();
        let layout = WeightLayout::new(4).unwrap();
        let init = WeightVector::glorot(layout, &mut SeedSpace::new(11).stream("init"));
        let delta: f64 = report
            .final_weights
            .values()
            .iter()
            .zip(init.values())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(delta < 1e-6, "weights moved by {delta} with vanishing gain");
    }

    #[test]
    fn percentile_interpolation() {
        let sorted = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(percentile(&sorted, 25.0), 2.0);
        assert_eq!(percentile(&sorted, 0.0), 1.0);
        assert_eq!(percentile(&sorted, 100.0), 5.0);
        let sorted = [1.0, 2.0];
        assert_eq!(percentile(&sorted, 25.0), 1.25);
        assert_eq!(percentile(&[3.5], 25.0), 3.5);
    }

    #[test]
    fn evaluate_single_run_statistics_coincide() {
        let layout = WeightLayout::new(4).unwrap();
        let w = WeightVector::glorot(layout, &mut rng(13));
        let stats = evaluate(
            &w,
            &ChannelConfig::Awgn(AwgnConfig { snr_db: 10.0 }),
            EvalProtocol {
                num_runs: 1,
                symbols_per_run: 1000,
            },
            ReceiverKind::Gaussian,
            3,
        )
        .unwrap();
        assert_eq!(stats.mean, stats.max);
        assert_eq!(stats.mean, stats.p25);
    }

    #[test]
    fn evaluate_noiseless_saturates_at_entropy() {
        let qam = Constellation::square_qam(16).unwrap();
        let stats = evaluate_constellation(
            &qam,
            &noiseless(),
            EvalProtocol {
                num_runs: 5,
                symbols_per_run: 2000,
            },
            17,
        )
        .unwrap();
        assert!((stats.mean - 4.0).abs() < 1e-6);
        assert!((stats.max - 4.0).abs() < 1e-6);
        assert!((stats.p25 - 4.0).abs() < 1e-6);
    }

    #[test]
    fn evaluate_is_deterministic() {
        let qam = Constellation::square_qam(4).unwrap();
        let channel = ChannelConfig::Awgn(AwgnConfig { snr_db: 6.0 });
        let protocol = EvalProtocol {
            num_runs: 4,
            symbols_per_run: 500,
        };
        let a = evaluate_constellation(&qam, &channel, protocol, 23).unwrap();
        let b = evaluate_constellation(&qam, &channel, protocol, 23).unwrap();
        assert_eq!(a.per_run, b.per_run);
    }

    #[test]
    fn grid_search_rejects_empty_sets() {
        let cfg = TrainConfig::ckf(
            4,
            CkfHyperparams::new(1e-3, 1e-2).unwrap(),
            noiseless(),
            1,
        );
        assert!(grid_search(&cfg, &[], &[1e-2]).is_err());
        assert!(grid_search(&cfg, &[1e-3], &[]).is_err());
    }

    #[test]
    fn grid_search_singleton_matches_plain_training() {
        let mut cfg = TrainConfig::ckf(
            4,
            CkfHyperparams::new(1e-3, 1e-2).unwrap(),
            ChannelConfig::Awgn(AwgnConfig { snr_db: 14.0 }),
            31,
        );
        cfg.max_iterations = 60;
        cfg.convergence.consecutive_hits = usize::MAX;
        let report = grid_search(&cfg, &[1e-3], &[1e-2]).unwrap();
        assert_eq!(report.cells.len(), 1);
        assert_eq!(report.best.q, 1e-3);
        assert_eq!(report.best.r, 1e-2);
        let plain = train(&cfg).unwrap();
        assert_eq!(
            report.best_report.final_weights.values(),
            plain.final_weights.values()
        );
    }
}
