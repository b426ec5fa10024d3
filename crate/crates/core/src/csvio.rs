//! CSV emission with deterministic formatting.
//!
//! Every file starts with a single `#` header line naming columns and
//! units; floats are serialized with 17 significant digits so identical
//! runs produce bitwise-identical files.

use crate::Result;
use std::io::Write;

/// Format a float with 17 significant digits.
pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

pub struct CsvWriter {
    out: std::io::BufWriter<std::fs::File>,
}

impl CsvWriter {
    /// Create the file and write the `#` header line.
    pub fn create(path: &std::path::Path, header: &str) -> Result<Self> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "# {header}")?;
        Ok(Self { out })
    }

    pub fn row(&mut self, values: &[f64]) -> Result<()> {
        let mut line = String::with_capacity(values.len() * 24);
        for (i, v) in values.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&fmt(*v));
        }
        writeln!(self.out, "{line}")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}
