use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult};

pub fn write_file(dir: &Path, name: &str, contents: &str) -> CliResult<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Write {
        path: dir.display().to_string(),
        source,
    })?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|source| CliError::Write {
        path: path.display().to_string(),
        source,
    })?;
    Ok(path)
}

/// Shortest representation that round-trips; never locale dependent.
pub fn num(x: f64) -> String {
    format!("{x}")
}

/// Drops float noise such as 0.045000000000000005.
pub fn short(x: f64) -> String {
    format!("{}", (x * 1e12).round() / 1e12)
}

pub fn km(x: f64) -> String {
    format!("{x:.2}")
}
