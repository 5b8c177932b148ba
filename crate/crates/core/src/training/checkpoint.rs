//! Binary checkpoint: magic, version, JSON header, then raw little-endian parameters.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::trainer::TrainConfig;
use crate::data::NormalizationStats;
use crate::error::{Error, Result};
use crate::models::{build, Architecture, ModelGraph, ModelSpec};

const MAGIC: &[u8; 8] = b"TRJMCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything stored next to the weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub architecture: String,
    pub spec: ModelSpec,
    pub history_len: usize,
    pub horizon: usize,
    pub dt: f64,
    pub stats: NormalizationStats,
    pub train: Option<TrainConfig>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub graph: ModelGraph,
    pub meta: CheckpointMeta,
}

impl Checkpoint {
    pub fn stats(&self) -> &NormalizationStats {
        &self.meta.stats
    }
}

pub fn encode_checkpoint(
    graph: &ModelGraph,
    stats: &NormalizationStats,
    dt: f64,
    train: Option<&TrainConfig>,
) -> Result<Vec<u8>> {
    let meta = CheckpointMeta {
        architecture: graph.spec().architecture.id().to_string(),
        spec: graph.spec().clone(),
        history_len: graph.history_len(),
        horizon: graph.horizon(),
        dt,
        stats: *stats,
        train: train.copied(),
    };
    let header = serde_json::to_vec(&meta)?;
    let mut out = Vec::with_capacity(header.len() + 8 * graph.parameter_count() + 256);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&(graph.parameters().len() as u32).to_le_bytes());
    for p in graph.parameters() {
        out.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
        out.extend_from_slice(p.name.as_bytes());
        out.extend_from_slice(&(p.value.rank() as u32).to_le_bytes());
        for &d in p.value.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in p.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn save_checkpoint(
    graph: &ModelGraph,
    stats: &NormalizationStats,
    dt: f64,
    train: Option<&TrainConfig>,
    path: &Path,
) -> Result<()> {
    let bytes = encode_checkpoint(graph, stats, dt, train)?;
    fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    decode_checkpoint(&bytes, path)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn fail(&self, message: impl Into<String>) -> Error {
        Error::Checkpoint { path: PathBuf::from(self.path), message: message.into() }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.fail(format!("truncated while reading {what} at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

pub fn decode_checkpoint(bytes: &[u8], path: &Path) -> Result<Checkpoint> {
    let mut r = Reader { bytes, pos: 0, path };
    if r.take(8, "magic")? != MAGIC {
        return Err(r.fail("not a trajmc checkpoint"));
    }
    let version = r.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(r.fail(format!("format version {version} is not supported (expected {CHECKPOINT_VERSION})")));
    }
    let header_len = r.u64("header length")? as usize;
    let header = r.take(header_len, "header")?;
    let raw: serde_json::Value =
        serde_json::from_slice(header).map_err(|e| r.fail(format!("corrupt header: {e}")))?;
    let arch_id = raw.get("architecture").and_then(|v| v.as_str()).unwrap_or_default().to_string();
    if arch_id.parse::<Architecture>().is_err() {
        return Err(r.fail(format!("unknown architecture id `{arch_id}`")));
    }
    let meta: CheckpointMeta = serde_json::from_value(raw).map_err(|e| r.fail(format!("corrupt header: {e}")))?;
    let mut graph = build(&meta.spec).map_err(|e| r.fail(format!("header describes an invalid model: {e}")))?;

    let count = r.u32("parameter count")? as usize;
    if count != graph.parameters().len() {
        return Err(r.fail(format!(
            "{} parameter tensors stored, {} expected for {arch_id}",
            count,
            graph.parameters().len()
        )));
    }
    let mut values = Vec::with_capacity(count);
    for expected in graph.parameters() {
        let name_len = r.u32("parameter name length")? as usize;
        let name = std::str::from_utf8(r.take(name_len, "parameter name")?)
            .map_err(|_| r.fail("parameter name is not UTF-8"))?;
        if name != expected.name {
            return Err(r.fail(format!("found parameter `{name}` where `{}` was expected", expected.name)));
        }
        let rank = r.u32("rank")? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(r.u64("dimension")? as usize);
        }
        if dims != expected.value.shape() {
            return Err(r.fail(format!("`{name}` has shape {dims:?}, expected {:?}", expected.value.shape())));
        }
        let raw = r.take(8 * expected.len(), "parameter values")?;
        let data: Vec<f64> = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        values.push(data);
    }
    if r.pos != bytes.len() {
        return Err(r.fail(format!("{} trailing bytes after the last parameter", bytes.len() - r.pos)));
    }
    for (param, data) in graph.parameters_mut().iter_mut().zip(values) {
        param.value.data_mut().copy_from_slice(&data);
        param.value.check_finite(&format!("checkpoint parameter `{}`", param.name))?;
    }
    Ok(Checkpoint { graph, meta })
}
