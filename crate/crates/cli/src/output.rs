use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliResult;

pub fn hash_file(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(|e| synspace::Error::Io {
        path: path.to_owned(),
        source: e,
    })?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> CliResult {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| synspace::Error::Io {
            path: parent.to_owned(),
            source: e,
        })?;
    }
    synspace::format::write_atomic(path, bytes)?;
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    write_file(path, text.as_bytes())
}

pub fn write_report<T: Serialize>(dir: &Path, name: &str, value: &T) -> CliResult {
    write_json(&dir.join(name), value)
}
