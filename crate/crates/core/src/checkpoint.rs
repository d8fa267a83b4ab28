//! Binary checkpoint files.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "GPLP" 0x01
//! u32 manifest length, then that many u32 config values:
//!     input_dim hidden_dim num_layers phi_depth head0 head1 head2 readout features
//! u32 tensor count
//! per tensor: u64 element count, then f32 values
//! ```
//!
//! Tensors follow [`ModelConfig::param_shapes`] order.

use std::fs;
use std::path::Path;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::model::{FeatureMode, ModelConfig, ModelParams, Readout};

pub const MAGIC: &[u8; 5] = b"GPLP\x01";

pub fn to_bytes(params: &ModelParams<f32>) -> Vec<u8> {
    let c = params.config();
    let manifest = [
        c.input_dim() as u32,
        c.hidden_dim as u32,
        c.num_layers as u32,
        c.phi_depth as u32,
        c.head_dims[0] as u32,
        c.head_dims[1] as u32,
        c.head_dims[2] as u32,
        c.readout.code(),
        c.features.code(),
    ];
    let mut out = Vec::with_capacity(64 + params.num_scalars() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(manifest.len() as u32).to_le_bytes());
    for v in manifest {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(params.tensors().len() as u32).to_le_bytes());
    for t in params.tensors() {
        out.extend_from_slice(&(t.len() as u64).to_le_bytes());
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn from_bytes(buf: &[u8]) -> Result<ModelParams<f32>> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(MAGIC.len()).ok() != Some(&MAGIC[..]) {
        return Err(Error::Format("bad magic".into()));
    }
    let n = r.u32()? as usize;
    if n != 9 {
        return Err(Error::Format(format!("manifest has {n} entries, expected 9")));
    }
    let mut m = [0u32; 9];
    for v in &mut m {
        *v = r.u32()?;
    }
    let features = FeatureMode::from_code(m[8]).ok_or_else(|| Error::Format(format!("feature mode {}", m[8])))?;
    let readout = Readout::from_code(m[7]).ok_or_else(|| Error::Format(format!("readout {}", m[7])))?;
    let config = ModelConfig {
        features,
        hidden_dim: m[1] as usize,
        num_layers: m[2] as usize,
        phi_depth: m[3] as usize,
        head_dims: [m[4] as usize, m[5] as usize, m[6] as usize],
        readout,
    };
    if config.input_dim() != m[0] as usize {
        return Err(Error::Format(format!("input width {} does not match feature mode", m[0])));
    }
    config.validate().map_err(|e| Error::Format(e.to_string()))?;
    let shapes = config.param_shapes();
    let count = r.u32()? as usize;
    if count != shapes.len() {
        return Err(Error::Format(format!("{count} tensors, config needs {}", shapes.len())));
    }
    let mut tensors = Vec::with_capacity(count);
    for shape in shapes {
        let len = r.u64()? as usize;
        let want: usize = shape.iter().product();
        if len != want {
            return Err(Error::Format(format!("tensor of {len} values, expected {want}")));
        }
        let bytes = r.take(len.checked_mul(4).ok_or_else(|| Error::Format("tensor too large".into()))?)?;
        let data = bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
        tensors.push(Tensor::new(shape, data)?);
    }
    if r.pos != buf.len() {
        return Err(Error::Format(format!("{} trailing bytes", buf.len() - r.pos)));
    }
    ModelParams::new(config, tensors)
}

pub fn save_checkpoint(params: &ModelParams<f32>, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_bytes(params))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ModelParams<f32>> {
    from_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParams<f32> {
        let cfg = ModelConfig { hidden_dim: 8, head_dims: [6, 4, 1], phi_depth: 2, ..Default::default() };
        ModelParams::init(cfg, 4).unwrap()
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let p = params();
        let bytes = to_bytes(&p);
        let q = from_bytes(&bytes).unwrap();
        assert_eq!(q, p);
        assert_eq!(to_bytes(&q), bytes);
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let p = params();
        save_checkpoint(&p, &path).unwrap();
        let first = fs::read(&path).unwrap();
        save_checkpoint(&load_checkpoint(&path).unwrap(), &path).unwrap();
        assert_eq!(fs::read(&path).unwrap(), first);
        assert!(matches!(load_checkpoint(dir.path().join("missing")), Err(Error::Io(_))));
    }

    #[test]
    fn corrupt_files_rejected() {
        let bytes = to_bytes(&params());
        for cut in [0, 3, 5, 20, bytes.len() - 1] {
            assert!(matches!(from_bytes(&bytes[..cut]), Err(Error::Format(_))), "cut {cut}");
        }
        let mut bad = bytes.clone();
        bad[4] = 2;
        assert!(matches!(from_bytes(&bad), Err(Error::Format(_))));
        let mut extra = bytes;
        extra.push(0);
        assert!(matches!(from_bytes(&extra), Err(Error::Format(_))));
    }
}
