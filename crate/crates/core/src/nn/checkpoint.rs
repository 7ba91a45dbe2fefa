//! Binary checkpoint format.
//!
//! ```text
//! magic    8 bytes  "CTXMTCKP"
//! version  u32 LE
//! hlen     u32 LE   length of the header in bytes
//! header   hlen bytes of UTF-8 JSON (hyperparameters, tensor names/shapes, counters)
//! data     little-endian f32 arrays: parameters in header order, then the
//!          optimizer first moments and second moments when present
//! ```
//!
//! Values are stored as `f32`; parameters and moments produced by this
//! crate always lie on the `f32` grid, so a save/load round trip is exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mat::Mat;
use super::model::{param_specs, Hyperparams, Model, Parameters};
use crate::error::{Error, Result};
use crate::train::OptimizerState;

pub const MAGIC: &[u8; 8] = b"CTXMTCKP";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub hp: Hyperparams,
    pub params: Parameters,
    pub optimizer: Option<OptimizerState>,
    pub seed: u64,
    pub step: u64,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    hyperparams: Hyperparams,
    tensors: Vec<TensorEntry>,
    optimizer_step: Option<u64>,
    seed: u64,
    step: u64,
}

impl Checkpoint {
    pub fn from_model(model: &Model, optimizer: Option<OptimizerState>, seed: u64, step: u64) -> Self {
        Checkpoint {
            hp: model.hp.clone(),
            params: model.params.clone(),
            optimizer,
            seed,
            step,
        }
    }

    pub fn model(&self) -> Result<Model> {
        Model::from_parts(self.hp.clone(), self.params.clone())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            hyperparams: self.hp.clone(),
            tensors: self
                .params
                .names
                .iter()
                .zip(&self.params.tensors)
                .map(|(n, t)| TensorEntry {
                    name: n.clone(),
                    rows: t.rows,
                    cols: t.cols,
                })
                .collect(),
            optimizer_step: self.optimizer.as_ref().map(|o| o.step),
            seed: self.seed,
            step: self.step,
        };
        let header = serde_json::to_vec(&header)?;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        let mut write = |m: &Mat| {
            for &v in &m.data {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        };
        self.params.tensors.iter().for_each(&mut write);
        if let Some(opt) = &self.optimizer {
            opt.m.iter().for_each(&mut write);
            opt.v.iter().for_each(&mut write);
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let corrupt = |m: &str| Error::CorruptCheckpoint(m.to_string());
        if bytes.len() < 16 {
            return Err(corrupt("file shorter than the fixed header"));
        }
        if &bytes[..8] != MAGIC {
            return Err(corrupt("bad magic"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(Error::CheckpointVersion {
                found: version,
                expected: VERSION,
            });
        }
        let hlen = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
        let body = bytes.get(16..16 + hlen).ok_or_else(|| corrupt("truncated header"))?;
        let header: Header =
            serde_json::from_slice(body).map_err(|e| Error::CorruptCheckpoint(format!("header: {e}")))?;
        header.hyperparams.validate()?;
        let specs = param_specs(&header.hyperparams);
        if specs.len() != header.tensors.len()
            || specs
                .iter()
                .zip(&header.tensors)
                .any(|((n, (r, c)), t)| *n != t.name || *r != t.rows || *c != t.cols)
        {
            return Err(corrupt("tensor table does not match hyperparameters"));
        }
        let per_set: usize = header.tensors.iter().map(|t| t.rows * t.cols).sum();
        let sets = if header.optimizer_step.is_some() { 3 } else { 1 };
        let data = &bytes[16 + hlen..];
        if data.len() != per_set * sets * 4 {
            return Err(corrupt(&format!(
                "expected {} data bytes, found {}",
                per_set * sets * 4,
                data.len()
            )));
        }
        let mut floats = data
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64);
        let mut read_set = || -> Vec<Mat> {
            header
                .tensors
                .iter()
                .map(|t| Mat::from_vec(t.rows, t.cols, floats.by_ref().take(t.rows * t.cols).collect()))
                .collect()
        };
        let tensors = read_set();
        let optimizer = header.optimizer_step.map(|step| OptimizerState {
            step,
            m: read_set(),
            v: read_set(),
        });
        Ok(Checkpoint {
            hp: header.hyperparams,
            params: Parameters {
                names: header.tensors.into_iter().map(|t| t.name).collect(),
                tensors,
            },
            optimizer,
            seed: header.seed,
            step: header.step,
        })
    }
}

pub fn save_checkpoint(c: &Checkpoint, path: &Path) -> Result<()> {
    crate::report::write_atomic(path, &c.to_bytes()?)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(with_opt: bool) -> Checkpoint {
        let hp = Hyperparams {
            enc_layers: 1,
            dec_layers: 1,
            heads: 2,
            d_model: 4,
            d_ff: 6,
            dropout: 0.1,
            label_smoothing: 0.1,
            max_len: 20,
            src_vocab: 9,
            tgt_vocab: 9,
        };
        let model = Model::init(hp, 17).unwrap();
        let opt = with_opt.then(|| {
            let mut o = OptimizerState::new(&model.params);
            o.step = 3;
            o.m[0].data[0] = 0.25;
            o.v[1].data[2] = 1.5e-3f32 as f64;
            o
        });
        Checkpoint::from_model(&model, opt, 42, 3)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for opt in [false, true] {
            let c = sample(opt);
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("m.ckpt");
            save_checkpoint(&c, &p).unwrap();
            let back = load_checkpoint(&p).unwrap();
            assert_eq!(back, c);
            for (a, b) in back.params.tensors.iter().zip(&c.params.tensors) {
                for (x, y) in a.data.iter().zip(&b.data) {
                    assert_eq!(x.to_bits(), y.to_bits());
                }
            }
        }
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let bytes = sample(false).to_bytes().unwrap();
        let err = Checkpoint::from_bytes(&bytes[..bytes.len() - 3]).unwrap_err();
        assert!(err.to_string().starts_with("corrupt checkpoint"));
        assert!(matches!(Checkpoint::from_bytes(&bytes[..10]), Err(Error::CorruptCheckpoint(_))));
    }

    #[test]
    fn old_version_rejected() {
        let mut bytes = sample(false).to_bytes().unwrap();
        bytes[8..12].copy_from_slice(&0u32.to_le_bytes());
        assert!(matches!(
            Checkpoint::from_bytes(&bytes),
            Err(Error::CheckpointVersion { found: 0, expected: 1 })
        ));
    }

    #[test]
    fn shape_mismatch_rejected() {
        let c = sample(false);
        let bytes = c.to_bytes().unwrap();
        let hlen = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        let header = String::from_utf8(bytes[16..16 + hlen].to_vec()).unwrap();
        let tampered = header.replacen("\"rows\":9", "\"rows\":8", 1);
        let mut out = bytes[..12].to_vec();
        out.extend_from_slice(&(tampered.len() as u32).to_le_bytes());
        out.extend_from_slice(tampered.as_bytes());
        out.extend_from_slice(&bytes[16 + hlen..]);
        assert!(matches!(Checkpoint::from_bytes(&out), Err(Error::CorruptCheckpoint(_))));
    }
}
