use std::path::Path;

use trisplat_core::train::MetricsRow;

use crate::error::{IoError, Result};

/// Writes the training log as CSV with a header row.
pub fn write_metrics_csv(rows: &[MetricsRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| IoError::format(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| IoError::format(path, e))?;
    }
    w.flush().map_err(|e| IoError::io(path, e))
}
