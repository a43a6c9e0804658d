//! `gcs export-qam`: writes a square-QAM reference constellation file.

use std::path::PathBuf;

use gcs_core::Constellation;

use crate::constellation_file::{ConstellationFile, Metadata};

#[derive(Debug, clap::Args)]
pub struct ExportQamArgs {
    /// Constellation size (a power of 4)
    #[arg(long)]
    pub m: usize,
    /// Destination file
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Label stored in the file metadata
    #[arg(long)]
    pub label: Option<String>,
}

pub fn run(args: &ExportQamArgs) -> anyhow::Result<()> {
    let constellation = Constellation::square_qam(args.m)?;
    let file = ConstellationFile::new(
        &constellation,
        Metadata {
            label: args.label.clone().unwrap_or_else(|| format!("qam{}", args.m)),
            channel: "reference".into(),
            operating_point: 0.0,
            seed: 0,
        },
    );
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            super::ensure_dir(parent)?;
        }
    }
    file.write(&args.out)?;
    println!("wrote {}", args.out.display());
    Ok(())
}
