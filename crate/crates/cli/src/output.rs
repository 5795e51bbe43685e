use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::CliError;

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: Option<&PathBuf>, value: &T) -> Result<(), CliError> {
    let Some(path) = path else { return Ok(()) };
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Numeric(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// Writes `rows` under `header`; floats use the shortest round-trip form.
pub fn write_csv(path: Option<&PathBuf>, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
    let Some(path) = path else { return Ok(()) };
    let io = |e: std::io::Error| CliError::Usage(format!("{}: {e}", path.display()));
    let mut f = std::io::BufWriter::new(fs::File::create(path).map_err(io)?);
    writeln!(f, "{}", header.join(",")).map_err(io)?;
    for row in rows {
        writeln!(f, "{}", row.join(",")).map_err(io)?;
    }
    f.flush().map_err(io)
}

/// One-line JSON for the human summary.
pub fn inline<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).unwrap_or_default()
}
