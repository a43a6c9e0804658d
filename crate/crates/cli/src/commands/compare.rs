//! `gcs compare`: trains/evaluates the requested series over one sweep and
//! emits a single tidy CSV for external plotting.

use std::path::PathBuf;

use anyhow::bail;
use rayon::prelude::*;

use gcs_core::metrics::ReceiverKind;
use gcs_core::seed::SeedSpace;
use gcs_core::trainer::{
    evaluate, evaluate_constellation, train, EvalStats, OptimizerConfig, TrainConfig,
};
use gcs_core::{Constellation, Error as CoreError};

use crate::csv_out::{CsvBuilder, CsvField};
use crate::spec::{load_spec, resolve, ResolvedExperiment, SpecOverrides};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Series {
    AeCkf,
    AeBp,
    Qam,
}

impl Series {
    fn name(&self) -> &'static str {
        match self {
            Series::AeCkf => "ae-ckf",
            Series::AeBp => "ae-bp",
            Series::Qam => "qam",
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct CompareArgs {
    /// Experiment spec (TOML)
    #[arg(long, value_name = "FILE")]
    pub spec: PathBuf,
    /// Series to include
    #[arg(long, value_delimiter = ',', default_values = ["ae-ckf", "ae-bp", "qam"])]
    pub series: Vec<Series>,
    /// Receivers to report for the trained series (default: the spec's
    /// evaluation receiver)
    #[arg(long, value_delimiter = ',')]
    pub receivers: Vec<String>,
    /// Output CSV path (default: <output-dir>/<name>.compare.csv)
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: SpecOverrides,
}

pub fn run(args: &CompareArgs) -> anyhow::Result<()> {
    let exp = resolve(load_spec(&args.spec)?, &args.overrides)?;
    let receivers: Vec<ReceiverKind> = if args.receivers.is_empty() {
        vec![exp.receiver]
    } else {
        args.receivers
            .iter()
            .map(|s| s.parse())
            .collect::<Result<_, _>>()?
    };
    if args.series.contains(&Series::AeBp) && !exp.base_train.channel.supports_gradient() {
        bail!(CoreError::UnsupportedChannel {
            channel: "phase-noise-bps",
            operation: "backpropagation training (ae-bp series)",
        });
    }

    // Train every (point, trainable series) job up front.
    let jobs: Vec<(usize, Series)> = exp
        .points
        .iter()
        .enumerate()
        .flat_map(|(i, _)| {
            args.series
                .iter()
                .filter(|s| **s != Series::Qam)
                .map(move |&s| (i, s))
        })
        .collect();
    let trained: Vec<((usize, Series), anyhow::Result<gcs_core::trainer::TrainReport>)> = jobs
        .par_iter()
        .map(|&(i, series)| {
            let cfg = series_config(&exp, series, exp.points[i]);
            ((i, series), train(&cfg).map_err(anyhow::Error::new))
        })
        .collect();

    let seeds = SeedSpace::new(exp.seed);
    let mut csv = CsvBuilder::new(&[
        "series",
        "operating_point",
        "receiver",
        "mi_mean",
        "mi_max",
        "mi_p25",
    ]);
    let mut emit = |series: &str, point: f64, receiver: &str, stats: &EvalStats| {
        println!(
            "{series} @ {point} [{receiver}]: mean {:.4} max {:.4} p25 {:.4}",
            stats.mean, stats.max, stats.p25
        );
        csv.row(&[
            CsvField::Str(series),
            CsvField::Float(point),
            CsvField::Str(receiver),
            CsvField::Float(stats.mean),
            CsvField::Float(stats.max),
            CsvField::Float(stats.p25),
        ]);
    };

    for (i, &point) in exp.points.iter().enumerate() {
        let channel = exp.channel_at(point);
        let eval_seed = seeds.derive("evaluate", i as u64);
        for &series in &args.series {
            match series {
                Series::Qam => {
                    let qam = Constellation::square_qam(exp.base_train.m)?;
                    let stats = evaluate_constellation(&qam, &channel, exp.protocol, eval_seed)?;
                    emit(series.name(), point, "gaussian", &stats);
                }
                _ => {
                    let report = match trained
                        .iter()
                        .find(|(key, _)| *key == (i, series))
                        .map(|(_, r)| r)
                    {
                        Some(Ok(report)) => report,
                        Some(Err(e)) => bail!("{} at {point}: {e:#}", series.name()),
                        None => unreachable!("every trainable job was scheduled"),
                    };
                    for &receiver in &receivers {
                        let stats = evaluate(
                            &report.final_weights,
                            &channel,
                            exp.protocol,
                            receiver,
                            eval_seed,
                        )?;
                        emit(series.name(), point, receiver.name(), &stats);
                    }
                }
            }
        }
    }

    super::ensure_dir(&exp.output_dir)?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| exp.output_dir.join(format!("{}.compare.csv", exp.name)));
    super::write_text(&out, &csv.finish())?;
    println!("wrote {}", out.display());
    Ok(())
}

/// Training config for one series at one operating point: the CKF series uses
/// the spec's (q, r); the BP series uses the spec's Adam settings.
fn series_config(exp: &ResolvedExperiment, series: Series, point: f64) -> TrainConfig {
    let mut cfg = exp.train_config_at(point);
    match series {
        Series::AeCkf => {
            if !matches!(cfg.optimizer, OptimizerConfig::Ckf(_)) {
                cfg.optimizer = OptimizerConfig::Ckf(gcs_core::ckf::CkfHyperparams {
                    q: 1e-4,
                    r: 1e-2,
                });
            }
        }
        Series::AeBp => {
            if !matches!(cfg.optimizer, OptimizerConfig::Backprop(_)) {
                cfg.optimizer = OptimizerConfig::Backprop(gcs_core::nn::AdamConfig::default());
                cfg.max_iterations = gcs_core::trainer::DEFAULT_BP_MAX_ITERATIONS;
            }
        }
        Series::Qam => {}
    }
    cfg
}
