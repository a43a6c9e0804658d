//! `gcs evaluate`: mutual-information table for stored constellations (or
//! built-in square QAM) over a channel, using the mismatched Gaussian
//! receiver.

use std::path::PathBuf;

use anyhow::bail;

use gcs_core::channels::{AwgnConfig, ChannelConfig, NlpnConfig, PhaseNoiseBpsConfig};
use gcs_core::seed::SeedSpace;
use gcs_core::trainer::{evaluate_constellation, EvalProtocol};
use gcs_core::{Constellation, Error as CoreError};

use crate::constellation_file::ConstellationFile;
use crate::csv_out::{CsvBuilder, CsvField};
use crate::spec::{apply_operating_point, load_spec, resolve, OpKind, SpecOverrides};

#[derive(Debug, clap::Args)]
pub struct EvaluateArgs {
    /// Constellation file(s) to evaluate
    #[arg(long = "constellation", value_name = "FILE")]
    pub constellations: Vec<PathBuf>,
    /// Evaluate the built-in square QAM of this size (power of 4)
    #[arg(long)]
    pub qam: Option<usize>,
    /// Experiment spec providing channel/evaluation/seed (optional when the
    /// channel is fully given by flags)
    #[arg(long, value_name = "FILE")]
    pub spec: Option<PathBuf>,
    #[command(flatten)]
    pub channel_flags: ChannelFlags,
    #[command(flatten)]
    pub overrides: SpecOverrides,
    /// Simulation runs per row
    #[arg(long)]
    pub runs: Option<usize>,
    /// Symbols per simulation run
    #[arg(long)]
    pub symbols: Option<usize>,
    /// Output CSV path (default: <output-dir>/evaluate.csv)
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

/// Channel built from flags when no spec file is given. Parameters that have
/// no flag fall back to the standard experiment values (1.27 /W/km fiber,
/// 0.2 dB/km, NF 5 dB, 193.41 THz, 100 km spans, 32 GBd, 100 kHz linewidth).
#[derive(Debug, Default, clap::Args)]
pub struct ChannelFlags {
    /// Channel kind: awgn | nlpn | phase-noise-bps
    #[arg(long)]
    pub channel: Option<String>,
    /// Combined laser linewidth in Hz (phase-noise-bps)
    #[arg(long)]
    pub linewidth_hz: Option<f64>,
    /// Symbol rate in baud
    #[arg(long)]
    pub symbol_rate_baud: Option<f64>,
}

pub fn run(args: &EvaluateArgs) -> anyhow::Result<()> {
    let (channel, points, op_kind, protocol, seed, output_dir) = match &args.spec {
        Some(path) => {
            let exp = resolve(load_spec(path)?, &args.overrides)?;
            (
                exp.base_train.channel.clone(),
                exp.points.clone(),
                exp.op_kind,
                exp.protocol,
                exp.seed,
                exp.output_dir.clone(),
            )
        }
        None => {
            let channel = channel_from_flags(&args.channel_flags, &args.overrides)?;
            let op_kind = OpKind::for_channel(&channel);
            let point = match &channel {
                ChannelConfig::Awgn(cfg) => cfg.snr_db,
                ChannelConfig::PhaseNoiseBps(cfg) => cfg.snr_db,
                ChannelConfig::Nlpn(cfg) => cfg.launch_power_dbm,
            };
            let output_dir = args
                .overrides
                .output_dir
                .clone()
                .or_else(|| std::env::var_os("GCS_OUTPUT_DIR").map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("."));
            (
                channel,
                vec![point],
                op_kind,
                gcs_core::trainer::DESK_PROTOCOL,
                args.overrides.seed.unwrap_or(0),
                output_dir,
            )
        }
    };
    let protocol = EvalProtocol {
        num_runs: args.runs.unwrap_or(protocol.num_runs),
        symbols_per_run: args.symbols.unwrap_or(protocol.symbols_per_run),
    };

    let mut inputs: Vec<(String, Constellation)> = Vec::new();
    for path in &args.constellations {
        let file = ConstellationFile::read(path)?;
        inputs.push((file.metadata.label.clone(), file.constellation()?));
    }
    if let Some(m) = args.qam {
        inputs.push((format!("qam{m}"), Constellation::square_qam(m)?));
    }
    if inputs.is_empty() {
        bail!(CoreError::Config(
            "nothing to evaluate: pass --constellation and/or --qam".into()
        ));
    }

    let seeds = SeedSpace::new(seed);
    let mut csv = CsvBuilder::new(&[
        "label",
        "operating_point",
        "receiver",
        "mi_mean",
        "mi_max",
        "mi_p25",
        "runs",
        "symbols_per_run",
        "seed",
    ]);
    for (op_index, &point) in points.iter().enumerate() {
        let mut channel_at = channel.clone();
        apply_operating_point(&mut channel_at, op_kind, point);
        let eval_seed = seeds.derive("evaluate", op_index as u64);
        for (label, constellation) in &inputs {
            let stats = evaluate_constellation(constellation, &channel_at, protocol, eval_seed)?;
            println!(
                "{label} @ {point}: mean {:.4} max {:.4} p25 {:.4} bits/symbol",
                stats.mean, stats.max, stats.p25
            );
            csv.row(&[
                CsvField::Str(label),
                CsvField::Float(point),
                CsvField::Str("gaussian"),
                CsvField::Float(stats.mean),
                CsvField::Float(stats.max),
                CsvField::Float(stats.p25),
                CsvField::Int(protocol.num_runs as u64),
                CsvField::Int(protocol.symbols_per_run as u64),
                CsvField::Int(eval_seed),
            ]);
        }
    }

    let out = args
        .out
        .clone()
        .unwrap_or_else(|| output_dir.join("evaluate.csv"));
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            super::ensure_dir(parent)?;
        }
    }
    super::write_text(&out, &csv.finish())?;
    println!("wrote {}", out.display());
    Ok(())
}

fn channel_from_flags(
    flags: &ChannelFlags,
    overrides: &SpecOverrides,
) -> anyhow::Result<ChannelConfig> {
    let kind = flags.channel.as_deref().ok_or_else(|| {
        CoreError::Config("pass --spec or --channel to define the channel".into())
    })?;
    let symbol_rate = flags.symbol_rate_baud.unwrap_or(32e9);
    match kind {
        "awgn" => {
            let snr = overrides.snr_db.ok_or_else(|| {
                CoreError::Config("awgn channel requires --snr-db".into())
            })?;
            Ok(ChannelConfig::Awgn(AwgnConfig { snr_db: snr }))
        }
        "nlpn" => {
            let pin = overrides.launch_dbm.ok_or_else(|| {
                CoreError::Config("nlpn channel requires --launch-dbm".into())
            })?;
            let mut cfg = NlpnConfig::standard_fiber(pin);
            cfg.symbol_rate_baud = symbol_rate;
            if let Some(spans) = overrides.num_spans {
                cfg.num_spans = spans;
            }
            Ok(ChannelConfig::Nlpn(cfg))
        }
        "phase-noise-bps" => {
            let snr = overrides.snr_db.ok_or_else(|| {
                CoreError::Config("phase-noise-bps channel requires --snr-db".into())
            })?;
            Ok(ChannelConfig::PhaseNoiseBps(PhaseNoiseBpsConfig {
                snr_db: snr,
                linewidth_hz: flags.linewidth_hz.unwrap_or(100e3),
                symbol_rate_baud: symbol_rate,
                num_test_phases: overrides.test_phases.unwrap_or(36),
                window_size: overrides.window_size.unwrap_or(64),
            }))
        }
        other => bail!(CoreError::Config(format!(
            "unknown channel kind '{other}' (awgn | nlpn | phase-noise-bps)"
        ))),
    }
}
