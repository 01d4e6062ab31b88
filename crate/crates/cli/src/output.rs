//! Plain-text output: CSV files and two-column tables with 17 significant
//! digits.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};

/// `x` with 17 significant digits; non-finite values as `nan`, `inf`, `-inf`.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

pub struct CsvWriter {
    out: BufWriter<File>,
    width: usize,
}

impl CsvWriter {
    pub fn create(path: &Path, header: &[String]) -> Result<Self> {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = Self {
            out: BufWriter::new(file),
            width: header.len(),
        };
        w.line(&header.join(","))?;
        Ok(w)
    }

    pub fn row(&mut self, fields: &[String]) -> Result<()> {
        debug_assert_eq!(fields.len(), self.width);
        self.line(&fields.join(","))
    }

    pub fn line(&mut self, text: &str) -> Result<()> {
        writeln!(self.out, "{text}")?;
        Ok(())
    }

    pub fn finish(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

/// Whitespace-separated columns, one row per entry of `x`.
pub fn write_table(path: &Path, columns: &[&[f64]]) -> Result<()> {
    let mut out =
        BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    let n = columns.first().map_or(0, |c| c.len());
    for i in 0..n {
        let row: Vec<String> = columns.iter().map(|c| num(c[i])).collect();
        writeln!(out, "{}", row.join(" "))?;
    }
    out.flush()?;
    Ok(())
}
