//! `gcs train`: one training run per operating point, each leaving behind a
//! constellation file, a loss trace and a run manifest.

use std::path::{Path, PathBuf};

use anyhow::Context;
use rayon::prelude::*;

use gcs_core::nn::constellation_of;
use gcs_core::trainer::{train, TrainConfig, TrainReport};

use crate::constellation_file::{ConstellationFile, Metadata};
use crate::csv_out::{CsvBuilder, CsvField};
use crate::spec::{load_spec, resolve, ResolvedExperiment, SpecOverrides};

#[derive(Debug, clap::Args)]
pub struct TrainArgs {
    /// Experiment spec (TOML)
    #[arg(long, value_name = "FILE")]
    pub spec: PathBuf,
    #[command(flatten)]
    pub overrides: SpecOverrides,
}

pub fn run(args: &TrainArgs) -> anyhow::Result<()> {
    let spec = load_spec(&args.spec)?;
    let exp = resolve(spec, &args.overrides)?;
    super::ensure_dir(&exp.output_dir)?;

    let outcomes: Vec<(f64, anyhow::Result<TrainReport>)> = exp
        .points
        .par_iter()
        .map(|&point| {
            let cfg = exp.train_config_at(point);
            (point, train(&cfg).map_err(anyhow::Error::new))
        })
        .collect();

    // Write artifacts for every successful point, then surface the first
    // failure (partial artifacts are intentionally retained).
    let mut first_error = None;
    for (point, outcome) in outcomes {
        match outcome {
            Ok(report) => {
                let cfg = exp.train_config_at(point);
                write_artifacts(&exp, point, &cfg, &report)?;
                println!(
                    "{}: {} iterations, final loss {:.6} nats, validation MI {:.4} bits",
                    exp.point_label(point),
                    report.iterations_run,
                    report.loss_trace.last().copied().unwrap_or(f64::NAN),
                    report.mi_validation
                );
            }
            Err(e) => {
                eprintln!("{}: training failed: {e:#}", exp.point_label(point));
                if first_error.is_none() {
                    first_error = Some(e);
                }
            }
        }
    }
    match first_error {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn write_artifacts(
    exp: &ResolvedExperiment,
    point: f64,
    cfg: &TrainConfig,
    report: &TrainReport,
) -> anyhow::Result<()> {
    let stem = format!("{}-{}", exp.name, exp.point_label(point));
    let base = exp.output_dir.join(&stem);

    let (enc, _) = report.final_weights.unflatten();
    let constellation = constellation_of(&enc)?;
    let file = ConstellationFile::new(
        &constellation,
        Metadata {
            label: stem.clone(),
            channel: cfg.channel.name().to_string(),
            operating_point: point,
            seed: cfg.master_seed,
        },
    );
    file.write(&with_ext(&base, "constellation.toml"))?;

    let mut csv = CsvBuilder::new(&["iteration", "loss_nats"]);
    for (i, &loss) in report.loss_trace.iter().enumerate() {
        csv.row(&[CsvField::Int(i as u64 + 1), CsvField::Float(loss)]);
    }
    super::write_text(&with_ext(&base, "loss.csv"), &csv.finish())?;

    super::write_text(
        &with_ext(&base, "manifest.toml"),
        &render_manifest(exp, point, cfg, report)?,
    )?;
    Ok(())
}

fn with_ext(base: &Path, ext: &str) -> PathBuf {
    let mut s = base.as_os_str().to_os_string();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn render_manifest(
    exp: &ResolvedExperiment,
    point: f64,
    cfg: &TrainConfig,
    report: &TrainReport,
) -> anyhow::Result<String> {
    #[derive(serde::Serialize)]
    struct Manifest<'a> {
        name: &'a str,
        operating_point: f64,
        seed: u64,
        version: &'a str,
        iterations_run: usize,
        mi_validation_bits: f64,
        train: &'a TrainConfig,
    }
    let manifest = Manifest {
        name: &exp.name,
        operating_point: point,
        seed: cfg.master_seed,
        version: env!("CARGO_PKG_VERSION"),
        iterations_run: report.iterations_run,
        mi_validation_bits: report.mi_validation,
        train: cfg,
    };
    toml::to_string_pretty(&manifest).context("cannot serialize run manifest")
}
