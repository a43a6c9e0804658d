//! Experiment specification files and command-line overrides.
//!
//! A spec is a TOML file naming the experiment, the training setup, the
//! channel, an optional sweep of operating points, the evaluation protocol
//! and an optional hyperparameter grid. Command-line flags override file
//! values; the `GCS_OUTPUT_DIR` environment variable overrides the output
//! directory (flags take precedence over it).

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use gcs_core::channels::ChannelConfig;
use gcs_core::ckf::CkfHyperparams;
use gcs_core::metrics::ReceiverKind;
use gcs_core::nn::AdamConfig;
use gcs_core::trainer::{
    ConvergenceConfig, EvalProtocol, OptimizerConfig, TrainConfig, DEFAULT_BP_MAX_ITERATIONS,
    DEFAULT_CKF_MAX_ITERATIONS, DEFAULT_GRID,
};
use gcs_core::Error as CoreError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub train: TrainSection,
    pub channel: ChannelConfig,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub evaluation: Option<EvalSection>,
    #[serde(default)]
    pub grid: Option<GridSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub m: usize,
    /// Defaults to 32 * m.
    #[serde(default)]
    pub batch_size: Option<usize>,
    /// "ckf" or "backprop".
    pub optimizer: String,
    #[serde(default)]
    pub max_iterations: Option<usize>,
    #[serde(default)]
    pub ckf: Option<CkfHyperparams>,
    #[serde(default)]
    pub adam: Option<AdamConfig>,
    #[serde(default)]
    pub convergence: Option<ConvergenceConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default)]
    pub snr_db: Option<Vec<f64>>,
    #[serde(default)]
    pub launch_power_dbm: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    #[serde(default = "default_num_runs")]
    pub num_runs: usize,
    #[serde(default = "default_symbols")]
    pub symbols_per_run: usize,
    #[serde(default = "default_receiver")]
    pub receiver: String,
}

fn default_num_runs() -> usize {
    20
}
fn default_symbols() -> usize {
    10_000
}
fn default_receiver() -> String {
    "gaussian".into()
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            num_runs: default_num_runs(),
            symbols_per_run: default_symbols(),
            receiver: default_receiver(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default)]
    pub q: Option<Vec<f64>>,
    #[serde(default)]
    pub r: Option<Vec<f64>>,
}

/// Flag-level overrides shared by the spec-driven commands. All flags are
/// optional; present values replace the file's.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct SpecOverrides {
    /// Master seed override
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replace the sweep with a single SNR operating point (dB)
    #[arg(long)]
    pub snr_db: Option<f64>,
    /// Replace the sweep with a single launch-power operating point (dBm)
    #[arg(long)]
    pub launch_dbm: Option<f64>,
    /// Fiber span count override (NLPN channel)
    #[arg(long)]
    pub num_spans: Option<usize>,
    /// BPS averaging window override
    #[arg(long)]
    pub window_size: Option<usize>,
    /// BPS test-phase count override
    #[arg(long)]
    pub test_phases: Option<usize>,
    /// Iteration cap override
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// Output directory override (flag > GCS_OUTPUT_DIR > spec file)
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

/// The kind of value swept over operating points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpKind {
    SnrDb,
    LaunchPowerDbm,
}

impl OpKind {
    pub fn for_channel(channel: &ChannelConfig) -> OpKind {
        match channel {
            ChannelConfig::Nlpn(_) => OpKind::LaunchPowerDbm,
            _ => OpKind::SnrDb,
        }
    }
}

/// A fully resolved experiment: everything a command needs, with overrides
/// applied and defaults filled in.
#[derive(Debug, Clone)]
pub struct ResolvedExperiment {
    pub name: String,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub base_train: TrainConfig,
    pub op_kind: OpKind,
    pub points: Vec<f64>,
    pub protocol: EvalProtocol,
    pub receiver: ReceiverKind,
    pub grid_q: Vec<f64>,
    pub grid_r: Vec<f64>,
}

impl ResolvedExperiment {
    /// The training config for one operating point.
    pub fn train_config_at(&self, point: f64) -> TrainConfig {
        let mut cfg = self.base_train.clone();
        apply_operating_point(&mut cfg.channel, self.op_kind, point);
        cfg
    }

    pub fn channel_at(&self, point: f64) -> ChannelConfig {
        let mut channel = self.base_train.channel.clone();
        apply_operating_point(&mut channel, self.op_kind, point);
        channel
    }

    /// Filesystem-safe label of one operating point, e.g. `snr10` or
    /// `pin-2.5`.
    pub fn point_label(&self, point: f64) -> String {
        match self.op_kind {
            OpKind::SnrDb => format!("snr{point}"),
            OpKind::LaunchPowerDbm => format!("pin{point}"),
        }
    }
}

pub fn apply_operating_point(channel: &mut ChannelConfig, kind: OpKind, value: f64) {
    match (channel, kind) {
        (ChannelConfig::Awgn(cfg), OpKind::SnrDb) => cfg.snr_db = value,
        (ChannelConfig::PhaseNoiseBps(cfg), OpKind::SnrDb) => cfg.snr_db = value,
        (ChannelConfig::Nlpn(cfg), OpKind::LaunchPowerDbm) => cfg.launch_power_dbm = value,
        // Mismatches are rejected during resolution.
        _ => unreachable!("operating-point kind checked during resolution"),
    }
}

pub fn load_spec(path: &Path) -> anyhow::Result<ExperimentSpec> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read spec file {}", path.display()))?;
    let spec: ExperimentSpec = toml::from_str(&text)
        .map_err(|e| anyhow::Error::new(e).context(format!("invalid spec {}", path.display())))?;
    Ok(spec)
}

pub fn resolve(spec: ExperimentSpec, overrides: &SpecOverrides) -> anyhow::Result<ResolvedExperiment> {
    let mut channel = spec.channel.clone();
    if let Some(spans) = overrides.num_spans {
        match &mut channel {
            ChannelConfig::Nlpn(cfg) => cfg.num_spans = spans,
            _ => bail!(CoreError::Config(
                "--num-spans applies to the nlpn channel only".into()
            )),
        }
    }
    if let Some(w) = overrides.window_size {
        match &mut channel {
            ChannelConfig::PhaseNoiseBps(cfg) => cfg.window_size = w,
            _ => bail!(CoreError::Config(
                "--window-size applies to the phase-noise-bps channel only".into()
            )),
        }
    }
    if let Some(n) = overrides.test_phases {
        match &mut channel {
            ChannelConfig::PhaseNoiseBps(cfg) => cfg.num_test_phases = n,
            _ => bail!(CoreError::Config(
                "--test-phases applies to the phase-noise-bps channel only".into()
            )),
        }
    }

    let op_kind = OpKind::for_channel(&channel);
    let points = resolve_points(&spec, op_kind, overrides)?;

    let seed = overrides.seed.unwrap_or(spec.seed);
    let optimizer = build_optimizer(&spec.train)?;
    let max_iterations = overrides
        .max_iterations
        .or(spec.train.max_iterations)
        .unwrap_or(match optimizer {
            OptimizerConfig::Ckf(_) => DEFAULT_CKF_MAX_ITERATIONS,
            OptimizerConfig::Backprop(_) => DEFAULT_BP_MAX_ITERATIONS,
        });
    let base_train = TrainConfig {
        m: spec.train.m,
        batch_size: spec.train.batch_size.unwrap_or(32 * spec.train.m),
        optimizer,
        channel,
        max_iterations,
        convergence: spec.train.convergence.unwrap_or_default(),
        master_seed: seed,
    };

    let eval = spec.evaluation.clone().unwrap_or_default();
    let receiver: ReceiverKind = eval.receiver.parse()?;
    let protocol = EvalProtocol {
        num_runs: eval.num_runs,
        symbols_per_run: eval.symbols_per_run,
    };

    let output_dir = overrides
        .output_dir
        .clone()
        .or_else(|| std::env::var_os("GCS_OUTPUT_DIR").map(PathBuf::from))
        .or(spec.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));

    let (grid_q, grid_r) = match &spec.grid {
        Some(g) => (
            g.q.clone().unwrap_or_else(|| DEFAULT_GRID.to_vec()),
            g.r.clone().unwrap_or_else(|| DEFAULT_GRID.to_vec()),
        ),
        None => (DEFAULT_GRID.to_vec(), DEFAULT_GRID.to_vec()),
    };

    Ok(ResolvedExperiment {
        name: spec.name,
        seed,
        output_dir,
        base_train,
        op_kind,
        points,
        protocol,
        receiver,
        grid_q,
        grid_r,
    })
}

fn resolve_points(
    spec: &ExperimentSpec,
    op_kind: OpKind,
    overrides: &SpecOverrides,
) -> anyhow::Result<Vec<f64>> {
    if let Some(snr) = overrides.snr_db {
        if op_kind != OpKind::SnrDb {
            bail!(CoreError::Config(
                "--snr-db does not apply to the nlpn channel; use --launch-dbm".into()
            ));
        }
        return Ok(vec![snr]);
    }
    if let Some(p) = overrides.launch_dbm {
        if op_kind != OpKind::LaunchPowerDbm {
            bail!(CoreError::Config(
                "--launch-dbm applies to the nlpn channel only; use --snr-db".into()
            ));
        }
        return Ok(vec![p]);
    }
    match &spec.sweep {
        None => {
            // Single operating point taken from the channel itself.
            let value = match (&spec.channel, op_kind) {
                (ChannelConfig::Awgn(cfg), _) => cfg.snr_db,
                (ChannelConfig::PhaseNoiseBps(cfg), _) => cfg.snr_db,
                (ChannelConfig::Nlpn(cfg), _) => cfg.launch_power_dbm,
            };
            Ok(vec![value])
        }
        Some(sweep) => {
            let points = match (op_kind, &sweep.snr_db, &sweep.launch_power_dbm) {
                (OpKind::SnrDb, Some(p), None) => p.clone(),
                (OpKind::LaunchPowerDbm, None, Some(p)) => p.clone(),
                (OpKind::SnrDb, None, Some(_)) => bail!(CoreError::Config(
                    "sweep.launch_power_dbm does not match an SNR-driven channel".into()
                )),
                (OpKind::LaunchPowerDbm, Some(_), None) => bail!(CoreError::Config(
                    "sweep.snr_db does not match the nlpn channel".into()
                )),
                _ => bail!(CoreError::Config(
                    "sweep must set exactly one of snr_db or launch_power_dbm".into()
                )),
            };
            if points.is_empty() {
                bail!(CoreError::Config("sweep must be non-empty".into()));
            }
            Ok(points)
        }
    }
}

fn build_optimizer(train: &TrainSection) -> anyhow::Result<OptimizerConfig> {
    match train.optimizer.as_str() {
        "ckf" => {
            let hp = train.ckf.ok_or_else(|| {
                CoreError::Config("optimizer 'ckf' requires a [train.ckf] table with q and r".into())
            })?;
            Ok(OptimizerConfig::Ckf(CkfHyperparams::new(hp.q, hp.r)?))
        }
        "backprop" => Ok(OptimizerConfig::Backprop(train.adam.unwrap_or_default())),
        other => bail!(CoreError::Config(format!(
            "unknown optimizer '{other}' (expected 'ckf' or 'backprop')"
        ))),
    }
}
