//! Binary checkpoints: a magic line, a one-line JSON header, then raw
//! little-endian `f64` tensor data in header order.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Model, ModelConfig};
use crate::optim::{Adam, AdamConfig};
use crate::tensor::Tensor;

const MAGIC: &str = "COOPSTEER-CKPT-1\n";

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct OptimizerEntry {
    config: AdamConfig,
    t: u64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    model: ModelConfig,
    tensors: Vec<TensorEntry>,
    optimizer: Option<OptimizerEntry>,
    extra: serde_json::Value,
}

/// Everything restored from a checkpoint file.
#[derive(Debug)]
pub struct Checkpoint {
    pub model: Model,
    pub optimizer: Option<Adam>,
    /// Caller-defined metadata stored alongside the weights.
    pub extra: serde_json::Value,
}

/// Serialize to bytes; the optimizer's moments follow the parameters.
pub fn to_bytes(model: &Model, optimizer: Option<&Adam>, extra: &serde_json::Value) -> Result<Vec<u8>> {
    let params = model.named_params();
    let mut tensors: Vec<TensorEntry> = params
        .iter()
        .map(|(name, t)| TensorEntry {
            name: name.clone(),
            shape: t.shape().to_vec(),
        })
        .collect();
    let mut blobs: Vec<&Tensor> = params.iter().map(|(_, t)| *t).collect();
    if let Some(opt) = optimizer {
        let (m, v) = opt.moments();
        if m.len() != params.len() {
            return Err(Error::Config(format!(
                "optimizer tracks {} tensors, model has {}",
                m.len(),
                params.len()
            )));
        }
        for (prefix, moments) in [("adam.m", m), ("adam.v", v)] {
            for ((name, _), t) in params.iter().zip(moments) {
                tensors.push(TensorEntry {
                    name: format!("{prefix}.{name}"),
                    shape: t.shape().to_vec(),
                });
                blobs.push(t);
            }
        }
    }
    let header = Header {
        model: model.config().clone(),
        tensors,
        optimizer: optimizer.map(|o| OptimizerEntry { config: o.config, t: o.t }),
        extra: extra.clone(),
    };
    let json = serde_json::to_string(&header).map_err(|e| Error::Format(e.to_string()))?;
    let total: usize = blobs.iter().map(|t| t.numel()).sum();
    let mut out = Vec::with_capacity(MAGIC.len() + json.len() + 1 + total * 8);
    out.extend_from_slice(MAGIC.as_bytes());
    out.extend_from_slice(json.as_bytes());
    out.push(b'\n');
    for t in blobs {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
    let rest = bytes
        .strip_prefix(MAGIC.as_bytes())
        .ok_or_else(|| Error::Format("not a coopsteer checkpoint".into()))?;
    let nl = rest
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Format("checkpoint header is not terminated".into()))?;
    let header: Header =
        serde_json::from_slice(&rest[..nl]).map_err(|e| Error::Format(format!("checkpoint header: {e}")))?;
    let mut body = &rest[nl + 1..];

    let mut read = |entry: &TensorEntry| -> Result<Tensor> {
        let n: usize = entry.shape.iter().product();
        if body.len() < n * 8 {
            return Err(Error::Format(format!("checkpoint truncated inside `{}`", entry.name)));
        }
        let (chunk, tail) = body.split_at(n * 8);
        body = tail;
        let data = chunk
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
            .collect();
        Tensor::new(&entry.shape, data)
    };

    let mut model = Model::zeros(header.model)?;
    let names: Vec<String> = model.named_params().into_iter().map(|(n, _)| n).collect();
    let wanted = if header.optimizer.is_some() { 3 * names.len() } else { names.len() };
    if header.tensors.len() != wanted {
        return Err(Error::Format(format!(
            "checkpoint lists {} tensors, expected {wanted}",
            header.tensors.len()
        )));
    }
    for ((slot, name), entry) in model.params_mut().into_iter().zip(&names).zip(&header.tensors) {
        if &entry.name != name || entry.shape != slot.shape() {
            return Err(Error::Format(format!(
                "checkpoint tensor `{}` {:?} does not match model tensor `{name}` {:?}",
                entry.name,
                entry.shape,
                slot.shape()
            )));
        }
        *slot = read(entry)?;
    }
    let optimizer = match header.optimizer {
        None => None,
        Some(o) => {
            let k = names.len();
            let m = header.tensors[k..2 * k].iter().map(&mut read).collect::<Result<Vec<_>>>()?;
            let v = header.tensors[2 * k..].iter().map(&mut read).collect::<Result<Vec<_>>>()?;
            Some(Adam::from_state(o.config, o.t, m, v)?)
        }
    };
    if !body.is_empty() {
        return Err(Error::Format(format!("{} trailing bytes after checkpoint data", body.len())));
    }
    Ok(Checkpoint {
        model,
        optimizer,
        extra: header.extra,
    })
}

/// Write via a temporary sibling and rename, so readers never see a partial file.
pub fn save(path: &Path, model: &Model, optimizer: Option<&Adam>, extra: &serde_json::Value) -> Result<()> {
    let bytes = to_bytes(model, optimizer, extra)?;
    write_atomic(path, &bytes)
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
