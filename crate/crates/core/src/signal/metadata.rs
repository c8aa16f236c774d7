//! UrbanSound8K-style metadata CSV.

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

/// One row of the dataset manifest. Extra CSV columns (start, end,
/// salience, fsID) are ignored.
#[derive(Debug, Clone, Deserialize, PartialEq)]
pub struct ClipMeta {
    pub slice_file_name: String,
    pub fold: u16,
    #[serde(rename = "classID")]
    pub class_id: u16,
    pub class: String,
}

pub fn read_metadata(path: &Path) -> Result<Vec<ClipMeta>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Metadata(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (i, record) in reader.deserialize::<ClipMeta>().enumerate() {
        let row =
            record.map_err(|e| Error::Metadata(format!("{} row {}: {e}", path.display(), i + 2)))?;
        if row.class_id > 9 {
            return Err(Error::Metadata(format!(
                "{} row {}: classID {} out of range 0-9",
                path.display(),
                i + 2,
                row.class_id
            )));
        }
        rows.push(row);
    }
    Ok(rows)
}
