use std::path::{Path, PathBuf};

use crate::CliError;

/// One CSV output: a name (file stem), a header and rows of text cells.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len(), "row width in {}", self.name);
        self.rows.push(row);
    }

    pub fn to_csv_bytes(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| CliError::Numerical(format!("csv buffer: {e}")))
    }

    /// Writes `<dir>/<name>.csv`, creating `dir` if needed.
    pub fn write(&self, dir: &Path) -> Result<PathBuf, CliError> {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
        let path = dir.join(format!("{}.csv", self.name));
        std::fs::write(&path, self.to_csv_bytes()?).map_err(|source| CliError::Io { path: path.clone(), source })?;
        Ok(path)
    }
}

/// Shortest round-trip decimal form, so identical values give identical bytes.
pub fn num(x: f64) -> String {
    format!("{x}")
}
