//! Checkpoint file layout:
//!
//! ```text
//! XCROSSNET-CHECKPOINT\n
//! <header byte length>\n
//! <JSON header>
//! <parameters as little-endian f64, registry order>
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelConfig, ParamCounts, ParamRegistry, XCrossNetModel};
use crate::error::{Result, XcnError};
use crate::params::Parameterized;

pub const CHECKPOINT_MAGIC: &str = "XCROSSNET-CHECKPOINT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub model: ModelConfig,
    pub counts: ParamCounts,
    pub registry: ParamRegistry,
    /// Free-form metadata, e.g. the training step.
    #[serde(default)]
    pub meta: serde_json::Map<String, serde_json::Value>,
}

pub fn save_checkpoint(
    model: &XCrossNetModel,
    meta: serde_json::Map<String, serde_json::Value>,
    path: &Path,
) -> Result<()> {
    let header = CheckpointHeader {
        format_version: CHECKPOINT_VERSION,
        model: model.config().clone(),
        counts: model.param_counts(),
        registry: model.registry(),
        meta,
    };
    let json = serde_json::to_vec(&header)?;
    // Write to a sibling file first so an interrupted save never leaves a
    // truncated checkpoint behind.
    let tmp = path.with_extension("tmp");
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        writeln!(w, "{CHECKPOINT_MAGIC}")?;
        writeln!(w, "{}", json.len())?;
        w.write_all(&json)?;
        for v in model.flat_params() {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn read_line(r: &mut impl BufRead, what: &str) -> Result<String> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    if !line.ends_with('\n') {
        return Err(XcnError::Checkpoint(format!("truncated before end of {what}")));
    }
    line.pop();
    Ok(line)
}

pub fn load_checkpoint(path: &Path) -> Result<(XCrossNetModel, CheckpointHeader)> {
    let mut r = BufReader::new(File::open(path)?);
    let magic = read_line(&mut r, "magic line")?;
    if magic != CHECKPOINT_MAGIC {
        return Err(XcnError::Checkpoint("not a checkpoint file (bad magic line)".into()));
    }
    let header_len: usize = read_line(&mut r, "header length")?
        .parse()
        .map_err(|_| XcnError::Checkpoint("header length is not a number".into()))?;
    let mut json = vec![0u8; header_len];
    r.read_exact(&mut json)
        .map_err(|_| XcnError::Checkpoint("truncated header".into()))?;

    let version: serde_json::Value = serde_json::from_slice(&json)?;
    let found = version.get("format_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
    if found != CHECKPOINT_VERSION {
        return Err(XcnError::UnsupportedVersion {
            found,
            supported: CHECKPOINT_VERSION,
        });
    }
    let header: CheckpointHeader = serde_json::from_value(version)?;

    let mut model = XCrossNetModel::zeros(&header.model)?;
    if model.registry() != header.registry {
        return Err(XcnError::Checkpoint("parameter registry does not match the stored topology".into()));
    }
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    let expected = model.num_params() * 8;
    if payload.len() != expected {
        return Err(XcnError::Checkpoint(format!(
            "payload holds {} bytes, expected {expected}",
            payload.len()
        )));
    }
    let flat: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    model.set_flat_params(&flat)?;
    Ok((model, header))
}
