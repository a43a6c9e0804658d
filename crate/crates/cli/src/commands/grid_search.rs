//! `gcs grid-search`: trains one autoencoder per (q, r) cell and reports the
//! per-cell table plus the selected pair.

use std::path::PathBuf;

use anyhow::bail;

use gcs_core::trainer::grid_search;
use gcs_core::Error as CoreError;

use crate::csv_out::{CsvBuilder, CsvField};
use crate::spec::{load_spec, resolve, SpecOverrides};

#[derive(Debug, clap::Args)]
pub struct GridSearchArgs {
    /// Experiment spec (TOML)
    #[arg(long, value_name = "FILE")]
    pub spec: PathBuf,
    #[command(flatten)]
    pub overrides: SpecOverrides,
}

pub fn run(args: &GridSearchArgs) -> anyhow::Result<()> {
    let exp = resolve(load_spec(&args.spec)?, &args.overrides)?;
    if exp.points.len() != 1 {
        bail!(CoreError::Config(format!(
            "grid-search runs a single operating point; the spec resolves to {} (narrow it with --snr-db/--launch-dbm)",
            exp.points.len()
        )));
    }
    let point = exp.points[0];
    let base = exp.train_config_at(point);
    let report = grid_search(&base, &exp.grid_q, &exp.grid_r)?;

    super::ensure_dir(&exp.output_dir)?;
    let stem = format!("{}-{}", exp.name, exp.point_label(point));

    let mut csv = CsvBuilder::new(&[
        "q",
        "r",
        "final_loss_nats",
        "validation_mi_bits",
        "selection_mi_bits",
        "error",
        "selected",
    ]);
    for cell in &report.cells {
        let selected = cell.q == report.best.q && cell.r == report.best.r;
        csv.row(&[
            CsvField::Float(cell.q),
            CsvField::Float(cell.r),
            cell.final_loss.map_or(CsvField::Empty, CsvField::Float),
            cell.validation_mi.map_or(CsvField::Empty, CsvField::Float),
            cell.selection_mi.map_or(CsvField::Empty, CsvField::Float),
            cell.error.as_deref().map_or(CsvField::Empty, CsvField::Str),
            CsvField::Bool(selected),
        ]);
    }
    let csv_path = exp.output_dir.join(format!("{stem}.grid.csv"));
    super::write_text(&csv_path, &csv.finish())?;

    #[derive(serde::Serialize)]
    struct GridManifest<'a> {
        name: &'a str,
        operating_point: f64,
        seed: u64,
        version: &'a str,
        best_q: f64,
        best_r: f64,
        best_validation_mi_bits: f64,
        train: &'a gcs_core::trainer::TrainConfig,
    }
    let manifest = toml::to_string_pretty(&GridManifest {
        name: &exp.name,
        operating_point: point,
        seed: exp.seed,
        version: env!("CARGO_PKG_VERSION"),
        best_q: report.best.q,
        best_r: report.best.r,
        best_validation_mi_bits: report.best_report.mi_validation,
        train: &base,
    })?;
    super::write_text(
        &exp.output_dir.join(format!("{stem}.grid-manifest.toml")),
        &manifest,
    )?;

    println!(
        "selected q={:e} r={:e} (validation MI {:.4} bits); wrote {}",
        report.best.q,
        report.best.r,
        report.best_report.mi_validation,
        csv_path.display()
    );
    Ok(())
}
