//! Binary model checkpoint: magic, format version, a JSON header (config,
//! vocabulary, q, tensor length), then parameters and both Adam moment
//! vectors as little-endian `f64`.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use loglab_core::pumodel::{AdamState, Model, ModelConfig, Vocab};
use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};
use crate::formats::Provenance;

const MAGIC: &[u8; 8] = b"LOGLABCK";
pub const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    provenance: Provenance,
    config: ModelConfig,
    vocab: Vocab,
    q: f64,
    param_count: usize,
    adam_step: u64,
}

fn put_f64s(buf: &mut Vec<u8>, values: &[f64]) {
    buf.reserve(values.len() * 8);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode(model: &Model, provenance: &Provenance) -> Vec<u8> {
    let header = Header {
        provenance: provenance.clone(),
        config: model.config.clone(),
        vocab: model.vocab.clone(),
        q: model.q,
        param_count: model.params.len(),
        adam_step: model.adam.step,
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut buf = Vec::with_capacity(20 + json.len() + model.params.len() * 24);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&json);
    put_f64s(&mut buf, &model.params);
    put_f64s(&mut buf, &model.adam.m);
    put_f64s(&mut buf, &model.adam.v);
    buf
}

struct Cursor<'a>(&'a [u8]);

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.0.len() < n {
            return Err(PipelineError::data("checkpoint: truncated"));
        }
        let (head, rest) = self.0.split_at(n);
        self.0 = rest;
        Ok(head)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        Ok(self.take(n * 8)?.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

pub fn decode(bytes: &[u8]) -> Result<(Model, Provenance)> {
    let bad = |msg: String| PipelineError::data(format!("checkpoint: {}", msg));
    let mut cur = Cursor(bytes);
    if cur.take(8)? != MAGIC {
        return Err(bad("not a loglab checkpoint".into()));
    }
    let version = u32::from_le_bytes(cur.take(4)?.try_into().unwrap());
    if version != VERSION {
        return Err(bad(format!("unsupported version {}", version)));
    }
    let len = u64::from_le_bytes(cur.take(8)?.try_into().unwrap()) as usize;
    let header: Header = serde_json::from_slice(cur.take(len)?).map_err(|e| bad(e.to_string()))?;
    let n = header.param_count;
    let params = cur.f64s(n)?;
    let m = cur.f64s(n)?;
    let v = cur.f64s(n)?;
    if !cur.0.is_empty() {
        return Err(bad("trailing bytes".into()));
    }
    let model = Model { config: header.config, vocab: header.vocab, q: header.q, params, adam: AdamState { m, v, step: header.adam_step } };
    model.validate()?;
    Ok((model, header.provenance))
}

pub fn save(path: &Path, model: &Model, provenance: &Provenance) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| PipelineError::io(path, e))?;
    f.write_all(&encode(model, provenance)).map_err(|e| PipelineError::io(path, e))
}

pub fn load(path: &Path) -> Result<(Model, Provenance)> {
    let mut bytes = Vec::new();
    fs::File::open(path).and_then(|mut f| f.read_to_end(&mut bytes)).map_err(|e| PipelineError::io(path, e))?;
    decode(&bytes)
}
