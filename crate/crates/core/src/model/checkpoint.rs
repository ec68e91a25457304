//! Binary checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    8 bytes  "TAGMTCK\0"
//! version  u32
//! dtype    u8       1 = f32, 2 = f64
//! config   u32 length + UTF-8 JSON of the model config
//! count    u32
//! tensor*  u32 name length, name, u32 rank, u64 dims[rank], values
//! checksum u64      FNV-1a of every preceding byte
//! ```

use std::fs;
use std::path::Path;

use super::config::ModelConfig;
use super::network::{fnv1a, Seq2SeqModel};
use super::params::{Layout, Params};
use crate::error::{Error, Result};
use crate::scalar::{DType, Scalar};

const MAGIC: &[u8; 8] = b"TAGMTCK\0";
const VERSION: u32 = 1;

pub fn save_checkpoint<T: Scalar>(model: &Seq2SeqModel<T>, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.push(T::DTYPE.code());
    let cfg = serde_json::to_vec(model.config()).expect("config serializes");
    buf.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
    buf.extend_from_slice(&cfg);
    let params = model.params();
    buf.extend_from_slice(&(params.specs().len() as u32).to_le_bytes());
    for spec in params.specs() {
        buf.extend_from_slice(&(spec.name.len() as u32).to_le_bytes());
        buf.extend_from_slice(spec.name.as_bytes());
        buf.extend_from_slice(&(spec.shape.len() as u32).to_le_bytes());
        for &d in &spec.shape {
            buf.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in &params.data()[spec.offset..spec.offset + spec.len()] {
            v.write_le(&mut buf);
        }
    }
    let sum = fnv1a(&buf);
    buf.extend_from_slice(&sum.to_le_bytes());
    // write-then-rename keeps the previous checkpoint intact on failure
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, &buf).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Checkpoint(format!(
                "truncated: wanted {n} bytes at offset {}",
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Loads a checkpoint, rebuilding the model from its stored config.
pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<Seq2SeqModel<T>> {
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    if buf.len() < MAGIC.len() + 8 || &buf[..MAGIC.len()] != MAGIC {
        return Err(Error::Checkpoint(format!(
            "{} is not a checkpoint",
            path.display()
        )));
    }
    let body = &buf[..buf.len() - 8];
    let stored = u64::from_le_bytes(buf[buf.len() - 8..].try_into().unwrap());
    let mut r = Reader {
        buf: body,
        pos: MAGIC.len(),
    };
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let dtype = DType::from_code(r.take(1)?[0])
        .ok_or_else(|| Error::Checkpoint("unknown element type".into()))?;
    let cfg_len = r.u32()? as usize;
    let config: ModelConfig = serde_json::from_slice(r.take(cfg_len)?)
        .map_err(|e| Error::Checkpoint(format!("bad config header: {e}")))?;
    config.validate()?;
    let (layout, specs) = Layout::specs(&config);
    let count = r.u32()? as usize;
    if count != specs.len() {
        return Err(Error::Checkpoint(format!(
            "shape mismatch: {count} tensors stored, config implies {}",
            specs.len()
        )));
    }
    let total: usize = specs.iter().map(|s| s.len()).sum();
    let mut data = Vec::with_capacity(total);
    for spec in &specs {
        let name_len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?;
        let rank = r.u32()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u64()? as usize);
        }
        if name != spec.name || shape != spec.shape {
            return Err(Error::Checkpoint(format!(
                "shape mismatch: stored {name} {shape:?}, expected {} {:?}",
                spec.name, spec.shape
            )));
        }
        let n = spec.len();
        let bytes = r.take(n * dtype.width())?;
        for chunk in bytes.chunks(dtype.width()) {
            data.push(match dtype {
                DType::F32 => T::of(f32::read_le(chunk) as f64),
                DType::F64 => T::of(f64::read_le(chunk)),
            });
        }
    }
    if r.pos != body.len() {
        return Err(Error::Checkpoint("trailing bytes after tensors".into()));
    }
    if fnv1a(body) != stored {
        return Err(Error::Checkpoint("checksum mismatch".into()));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(
            "checkpoint holds non-finite parameters".into(),
        ));
    }
    Ok(Seq2SeqModel::assemble(
        config,
        layout,
        Params { specs, data },
    ))
}

/// Loads a checkpoint and insists its tensor shapes match `expected`.
pub fn load_checkpoint_expecting<T: Scalar>(
    path: &Path,
    expected: &ModelConfig,
) -> Result<Seq2SeqModel<T>> {
    let model = load_checkpoint::<T>(path)?;
    if !model.config().same_shapes(expected) {
        return Err(Error::Checkpoint(format!(
            "shape mismatch: checkpoint config {:?} vs expected {:?}",
            model.config(),
            expected
        )));
    }
    Ok(model)
}
