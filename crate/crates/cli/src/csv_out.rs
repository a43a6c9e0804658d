//! CSV emission with a fixed, versioned schema. Column order never changes
//! within a schema version; every float is written with 17 significant
//! digits.

use std::fmt::Write as _;

use crate::constellation_file::full;

pub const CSV_SCHEMA: u32 = 1;

pub struct CsvBuilder {
    out: String,
}

impl CsvBuilder {
    pub fn new(columns: &[&str]) -> Self {
        let mut out = String::new();
        let _ = writeln!(out, "# gcs-csv-schema: {CSV_SCHEMA}");
        let _ = writeln!(out, "{}", columns.join(","));
        Self { out }
    }

    pub fn row(&mut self, fields: &[CsvField<'_>]) {
        let rendered: Vec<String> = fields.iter().map(|f| f.render()).collect();
        let _ = writeln!(self.out, "{}", rendered.join(","));
    }

    pub fn finish(self) -> String {
        self.out
    }
}

pub enum CsvField<'a> {
    Str(&'a str),
    Float(f64),
    Int(u64),
    Bool(bool),
    Empty,
}

impl CsvField<'_> {
    fn render(&self) -> String {
        match self {
            CsvField::Str(s) => quote(s),
            CsvField::Float(v) => full(*v),
            CsvField::Int(v) => v.to_string(),
            CsvField::Bool(b) => b.to_string(),
            CsvField::Empty => String::new(),
        }
    }
}

fn quote(s: &str) -> String {
    let cleaned = s.replace('\n', "; ");
    if cleaned.contains(',') || cleaned.contains('"') {
        format!("\"{}\"", cleaned.replace('"', "\"\""))
    } else {
        cleaned
    }
}
