use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::error::Result;

use super::ExperimentConfig;

/// Output directory for one experiment run.
pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(OutputDir {
            root: root.to_path_buf(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn file(&self, name: &str) -> Result<fs::File> {
        Ok(fs::File::create(self.path(name))?)
    }

    /// Writes a header and rows of already formatted cells.
    pub fn write_csv(&self, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<()> {
        let mut w = csv::Writer::from_writer(self.file(name)?);
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    /// meta.json: config echo, crate version, and experiment-specific extras.
    pub fn write_meta<T: Serialize>(&self, cfg: &ExperimentConfig, extra: &T) -> Result<()> {
        let meta = json!({
            "config": cfg,
            "versions": { "polyshift": env!("CARGO_PKG_VERSION") },
            "details": extra,
        });
        fs::write(
            self.path("meta.json"),
            serde_json::to_string_pretty(&meta)? + "\n",
        )?;
        Ok(())
    }
}

/// Fixed-precision cell; NaN and missing values become empty strings.
pub fn cell(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6e}")
    } else {
        String::new()
    }
}

pub fn opt_cell<T: ToString>(v: Option<T>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}
