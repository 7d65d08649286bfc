//! CSV output: comma-separated, header row, floats at 17 significant digits
//! so every double round-trips exactly. Undefined values are emitted as
//! empty fields.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::Context;

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub struct CsvWriter {
    out: BufWriter<File>,
    columns: Vec<String>,
    rows: u64,
}

impl CsvWriter {
    pub fn create(path: &Path, columns: Vec<String>) -> anyhow::Result<Self> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)
                    .with_context(|| format!("creating {}", parent.display()))?;
            }
        }
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut out = BufWriter::new(file);
        writeln!(out, "{}", columns.join(","))?;
        Ok(Self { out, columns, rows: 0 })
    }

    pub fn write_row(&mut self, fields: &[String]) -> anyhow::Result<()> {
        debug_assert_eq!(fields.len(), self.columns.len());
        writeln!(self.out, "{}", fields.join(","))?;
        self.rows += 1;
        Ok(())
    }

    pub fn finish(mut self) -> anyhow::Result<(u64, Vec<String>)> {
        self.out.flush()?;
        Ok((self.rows, self.columns))
    }
}
