//! CSV formatting and atomic file output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Scientific notation with 17 significant digits, enough to round-trip.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// A table written as one CSV file. Empty cells are `None`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
    /// Leading integer column (e.g. the iteration index), if any.
    pub index_column: Option<String>,
    pub index: Vec<usize>,
}

impl Table {
    pub fn new(header: Vec<String>) -> Self {
        Table {
            header,
            ..Table::default()
        }
    }

    pub fn with_index(index_column: &str, header: Vec<String>) -> Self {
        Table {
            header,
            index_column: Some(index_column.to_string()),
            ..Table::default()
        }
    }

    pub fn push(&mut self, row: Vec<Option<f64>>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn push_indexed(&mut self, index: usize, row: Vec<Option<f64>>) {
        self.index.push(index);
        self.push(row);
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = self.index_column.iter().cloned().collect();
        header.extend(self.header.iter().cloned());
        w.write_record(&header)?;
        for (k, row) in self.rows.iter().enumerate() {
            let mut record: Vec<String> = Vec::with_capacity(header.len());
            if self.index_column.is_some() {
                record.push(self.index[k].to_string());
            }
            record.extend(row.iter().map(|v| v.map(fmt_float).unwrap_or_default()));
            w.write_record(&record)?;
        }
        w.into_inner()
            .map_err(|e| Error::io("csv buffer", e.into_error()))
    }

    pub fn write_atomic(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }
}

/// Writes to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = PathBuf::from(path);
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    tmp.set_file_name(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
