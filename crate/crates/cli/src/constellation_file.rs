//! Constellation files: structured TOML holding the points and their
//! provenance. Chosen over binary for diffability; floats are written with 17
//! significant digits so files round-trip bit-exactly and rewrites are
//! byte-stable.

use std::path::Path;

use anyhow::Context;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use gcs_core::{Constellation, Error as CoreError};

pub const SCHEMA_VERSION: u32 = 1;

/// Unit-power tolerance enforced when loading.
const POWER_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstellationFile {
    pub schema: u32,
    pub m: usize,
    pub points: Vec<(f64, f64)>,
    pub metadata: Metadata,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metadata {
    pub label: String,
    pub channel: String,
    pub operating_point: f64,
    pub seed: u64,
}

impl ConstellationFile {
    pub fn new(constellation: &Constellation, metadata: Metadata) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            m: constellation.len(),
            points: constellation.points().iter().map(|p| (p.re, p.im)).collect(),
            metadata,
        }
    }

    pub fn constellation(&self) -> anyhow::Result<Constellation> {
        let points: Vec<Complex64> = self
            .points
            .iter()
            .map(|&(re, im)| Complex64::new(re, im))
            .collect();
        Ok(Constellation::from_unit_power(points, POWER_TOL)?)
    }

    /// Canonical byte-stable rendering.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("schema = {}\n", self.schema));
        out.push_str(&format!("m = {}\n", self.m));
        out.push_str("points = [\n");
        for &(re, im) in &self.points {
            out.push_str(&format!("    [{}, {}],\n", full(re), full(im)));
        }
        out.push_str("]\n\n[metadata]\n");
        out.push_str(&format!("label = {}\n", toml_string(&self.metadata.label)));
        out.push_str(&format!(
            "channel = {}\n",
            toml_string(&self.metadata.channel)
        ));
        out.push_str(&format!(
            "operating_point = {}\n",
            full(self.metadata.operating_point)
        ));
        out.push_str(&format!("seed = {}\n", self.metadata.seed));
        out
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        std::fs::write(path, self.render())
            .with_context(|| format!("cannot write constellation file {}", path.display()))?;
        Ok(())
    }

    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read constellation file {}", path.display()))?;
        let file: ConstellationFile = toml::from_str(&text).map_err(|e| {
            anyhow::Error::new(e).context(format!("malformed constellation file {}", path.display()))
        })?;
        file.validate()
            .map_err(|e| e.context(format!("invalid constellation file {}", path.display())))?;
        Ok(file)
    }

    fn validate(&self) -> anyhow::Result<()> {
        if self.schema != SCHEMA_VERSION {
            anyhow::bail!(CoreError::Config(format!(
                "unsupported constellation schema {} (expected {SCHEMA_VERSION})",
                self.schema
            )));
        }
        if self.m != self.points.len() {
            anyhow::bail!(CoreError::Config(format!(
                "constellation file claims M = {} but lists {} points",
                self.m,
                self.points.len()
            )));
        }
        self.constellation()?;
        Ok(())
    }
}

/// Full-precision float rendering: 17 significant digits, round-trip exact.
pub fn full(v: f64) -> String {
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{v:.16e}")
}

fn toml_string(s: &str) -> String {
    format!("{:?}", s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ConstellationFile {
        let c = Constellation::square_qam(4).unwrap();
        ConstellationFile::new(
            &c,
            Metadata {
                label: "qam4".into(),
                channel: "awgn".into(),
                operating_point: 10.0,
                seed: 42,
            },
        )
    }

    #[test]
    fn render_parse_round_trip_is_exact() {
        let file = sample();
        let text = file.render();
        let parsed: ConstellationFile = toml::from_str(&text).unwrap();
        assert_eq!(parsed.m, file.m);
        for (a, b) in parsed.points.iter().zip(&file.points) {
            assert_eq!(a.0.to_bits(), b.0.to_bits());
            assert_eq!(a.1.to_bits(), b.1.to_bits());
        }
        assert_eq!(parsed.render(), text);
    }

    #[test]
    fn power_mismatch_is_rejected() {
        let mut file = sample();
        for p in &mut file.points {
            p.0 *= 1.5;
        }
        assert!(file.validate().is_err());
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let mut file = sample();
        file.points.pop();
        assert!(file.validate().is_err());
    }
}
