use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::LoadError;

/// `(line, outcome)` for each non-blank line.
pub type ParsedLines<T> = Vec<(usize, Result<T, String>)>;

/// Parse every non-blank line, keeping 1-based line numbers and per-line
/// outcomes so callers can either fail fast or collect diagnostics.
pub fn parse_lines<T: DeserializeOwned>(path: &Path) -> Result<ParsedLines<T>, LoadError> {
    let text = fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, serde_json::from_str(l).map_err(|e| e.to_string())))
        .collect())
}

/// Parse every line, failing on the first malformed one.
pub fn read_records<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>, LoadError> {
    parse_lines(path)?
        .into_iter()
        .map(|(line, r)| {
            r.map(|v| (line, v))
                .map_err(|message| LoadError::Malformed {
                    path: path.to_path_buf(),
                    line,
                    message,
                })
        })
        .collect()
}

pub fn write_line<W: Write, T: Serialize>(out: &mut W, value: &T) -> std::io::Result<()> {
    serde_json::to_writer(&mut *out, value)?;
    out.write_all(b"\n")
}
