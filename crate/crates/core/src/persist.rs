//! Versioned JSON files for fitted models and trained multipliers.
//!
//! Every file is an envelope `{"format": ..., "version": ..., "payload": ...}`.
//! Loading rejects a missing or unknown version and a mismatched format.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{MdcpError, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    format: String,
    version: u32,
    payload: T,
}

pub fn to_json<T: Serialize>(format: &str, value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(&Envelope {
        format: format.to_string(),
        version: FORMAT_VERSION,
        payload: value,
    })?)
}

pub fn from_json<T: DeserializeOwned>(format: &str, text: &str) -> Result<T> {
    let env: Envelope<T> = serde_json::from_str(text)?;
    if env.format != format {
        return Err(MdcpError::Invalid(format!(
            "expected a `{format}` file, found `{}`",
            env.format
        )));
    }
    if env.version != FORMAT_VERSION {
        return Err(MdcpError::Invalid(format!(
            "unsupported {format} version {} (this build reads {FORMAT_VERSION})",
            env.version
        )));
    }
    Ok(env.payload)
}

pub fn save<T: Serialize>(path: &Path, format: &str, value: &T) -> Result<()> {
    std::fs::write(path, to_json(format, value)?)?;
    Ok(())
}

pub fn load<T: DeserializeOwned>(path: &Path, format: &str) -> Result<T> {
    from_json(format, &std::fs::read_to_string(path)?)
}
