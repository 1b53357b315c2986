//! Binary checkpoint format.
//!
//! ```text
//! [u64 LE header length][JSON header][f64 LE payload]
//! ```
//!
//! The header holds the format version, model kind, configuration echo
//! (model spec, embedding rows and optionally the field schema) and a
//! manifest of `{name, shape, dtype}` entries. The payload is every tensor's
//! data in manifest order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::FieldSchema;
use crate::error::{Error, Result};
use crate::model::{Model, ModelSpec};
use crate::numcore::{ParamStore, Tensor};

pub const FORMAT_VERSION: u32 = 1;
const DTYPE: &str = "f64";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointConfig {
    pub model: ModelSpec,
    pub field_rows: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<FieldSchema>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub dtype: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    model_kind: String,
    config: CheckpointConfig,
    manifest: Vec<ManifestEntry>,
}

/// A loaded checkpoint: the model and, when saved with one, its schema.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: Model,
    pub schema: Option<FieldSchema>,
}

fn format_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

pub fn to_bytes(model: &Model, schema: Option<&FieldSchema>) -> Result<Vec<u8>> {
    let manifest: Vec<ManifestEntry> = model
        .params
        .iter()
        .map(|p| ManifestEntry {
            name: p.name.clone(),
            shape: p.value.shape().to_vec(),
            dtype: DTYPE.into(),
        })
        .collect();
    let header = Header {
        format_version: FORMAT_VERSION,
        model_kind: model.spec().kind_name(),
        config: CheckpointConfig {
            model: model.spec().clone(),
            field_rows: model.field_rows().to_vec(),
            schema: schema.cloned(),
        },
        manifest,
    };
    let json = serde_json::to_vec(&header)?;
    let payload_len: usize = model.params.iter().map(|p| p.value.len()).sum();
    let mut out = Vec::with_capacity(8 + json.len() + 8 * payload_len);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for p in model.params.iter() {
        for &v in p.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < 8 {
        return Err(format_err("file too short for a header length"));
    }
    let header_len = u64::from_le_bytes(bytes[..8].try_into().expect("eight bytes"));
    let header_end = usize::try_from(header_len)
        .ok()
        .and_then(|n| n.checked_add(8))
        .filter(|&end| end <= bytes.len())
        .ok_or_else(|| format_err(format!("header length {header_len} exceeds file size {}", bytes.len())))?;
    let raw: serde_json::Value = serde_json::from_slice(&bytes[8..header_end])
        .map_err(|e| format_err(format!("header is not valid JSON: {e}")))?;
    let version = raw
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| format_err("header has no format_version"))?;
    if version != u64::from(FORMAT_VERSION) {
        return Err(Error::Version {
            found: u32::try_from(version).unwrap_or(u32::MAX),
            expected: FORMAT_VERSION,
        });
    }
    let header: Header = serde_json::from_value(raw).map_err(|e| format_err(format!("corrupt header: {e}")))?;

    let payload = &bytes[header_end..];
    let mut expected = 0usize;
    for entry in &header.manifest {
        if entry.dtype != DTYPE {
            return Err(format_err(format!(
                "tensor `{}` has unsupported dtype `{}`",
                entry.name, entry.dtype
            )));
        }
        let n = entry
            .shape
            .iter()
            .try_fold(1usize, |acc, &s| acc.checked_mul(s))
            .ok_or_else(|| format_err(format!("tensor `{}` shape overflows", entry.name)))?;
        expected = expected
            .checked_add(n)
            .ok_or_else(|| format_err("manifest size overflows"))?;
    }
    if payload.len() != expected * 8 {
        return Err(format_err(format!(
            "payload has {} bytes, manifest needs {}",
            payload.len(),
            expected * 8
        )));
    }

    let mut params = ParamStore::new();
    let mut values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("eight bytes")));
    for entry in &header.manifest {
        let n: usize = entry.shape.iter().product();
        let data: Vec<f64> = values.by_ref().take(n).collect();
        let tensor =
            Tensor::new(entry.shape.clone(), data).map_err(|e| format_err(format!("tensor `{}`: {e}", entry.name)))?;
        params
            .insert(entry.name.clone(), tensor)
            .map_err(|e| format_err(format!("manifest: {e}")))?;
    }
    let config = header.config;
    if let Some(schema) = &config.schema {
        if schema.field_rows() != config.field_rows {
            return Err(format_err("schema does not match the recorded embedding rows"));
        }
    }
    let model = Model::from_params(config.model, config.field_rows, params)
        .map_err(|e| format_err(format!("manifest does not match the model: {e}")))?;
    Ok(Checkpoint {
        model,
        schema: config.schema,
    })
}

pub fn save_checkpoint(path: &Path, model: &Model, schema: Option<&FieldSchema>) -> Result<()> {
    std::fs::write(path, to_bytes(model, schema)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    from_bytes(&std::fs::read(path)?)
}
