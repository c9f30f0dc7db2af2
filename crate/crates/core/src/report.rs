//! Float formatting and JSON output shared by the report writers.

use std::path::Path;

use serde::Serialize;

use crate::error::{Result, SwdError};

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Pretty-printed JSON with a trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| SwdError::Solver(format!("cannot serialize report: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json_string(value)?).map_err(|source| SwdError::Io {
        path: path.to_path_buf(),
        source,
    })
}
