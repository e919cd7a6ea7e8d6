//! Single-file factorization checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic        8 bytes  "DNSNMFCK"
//! version      u32      1
//! manifest     u64 length + UTF-8 TOML (depth, dims, thetas, seed, p, n)
//! arrays       u32 count, then per array:
//!                u32 name length + name bytes ("z1".."zm", "h_top")
//!                u64 rows, u64 cols, rows·cols f64 values row-major
//! sweep log    u64 count, then per sweep:
//!                u64 index, f64 objective, u32 block count + u64 inner iterations
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::deep::{LayerStack, SweepReport};
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::shallow::SmoothingSpec;

const MAGIC: &[u8; 8] = b"DNSNMFCK";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub depth: usize,
    pub dims: Vec<usize>,
    pub thetas: Vec<f64>,
    pub seed: u64,
    pub p: usize,
    pub n: usize,
}

/// Sweep log entry as stored on disk (wall time is not persisted).
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub sweep_index: usize,
    pub objective: f64,
    pub per_block_inner_iters: Vec<usize>,
}

impl From<&SweepReport> for SweepRecord {
    fn from(s: &SweepReport) -> Self {
        Self {
            sweep_index: s.sweep_index,
            objective: s.objective,
            per_block_inner_iters: s.per_block_inner_iters.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub manifest: Manifest,
    pub stack: LayerStack,
    pub sweeps: Vec<SweepRecord>,
}

impl Checkpoint {
    pub fn new(stack: LayerStack, sweeps: Vec<SweepRecord>, seed: u64) -> Self {
        let manifest = Manifest {
            depth: stack.depth(),
            dims: stack.dims(),
            thetas: stack.thetas(),
            seed,
            p: stack.input_rows(),
            n: stack.samples(),
        };
        Self {
            manifest,
            stack,
            sweeps,
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        let manifest = toml::to_string(&self.manifest)
            .map_err(|e| Error::Config(format!("manifest serialization: {e}")))?;
        out.extend_from_slice(&(manifest.len() as u64).to_le_bytes());
        out.extend_from_slice(manifest.as_bytes());

        let mut arrays: Vec<(String, &DenseMatrix)> = self
            .stack
            .z()
            .iter()
            .enumerate()
            .map(|(i, z)| (format!("z{}", i + 1), z))
            .collect();
        arrays.push(("h_top".into(), self.stack.h_top()));
        out.extend_from_slice(&(arrays.len() as u32).to_le_bytes());
        for (name, m) in arrays {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
            out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
            for v in m.as_slice() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }

        out.extend_from_slice(&(self.sweeps.len() as u64).to_le_bytes());
        for s in &self.sweeps {
            out.extend_from_slice(&(s.sweep_index as u64).to_le_bytes());
            out.extend_from_slice(&s.objective.to_le_bytes());
            out.extend_from_slice(&(s.per_block_inner_iters.len() as u32).to_le_bytes());
            for &it in &s.per_block_inner_iters {
                out.extend_from_slice(&(it as u64).to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        let mut r = Reader {
            bytes,
            pos: 0,
            origin,
        };
        if r.take(8)? != MAGIC {
            return Err(Error::format(origin, "not a checkpoint file"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::format(origin, format!("unsupported version {version}")));
        }
        let len = r.u64()? as usize;
        let text = std::str::from_utf8(r.take(len)?)
            .map_err(|e| Error::format(origin, format!("manifest: {e}")))?;
        let manifest: Manifest =
            toml::from_str(text).map_err(|e| Error::format(origin, format!("manifest: {e}")))?;

        let count = r.u32()? as usize;
        let mut named = Vec::with_capacity(count);
        for _ in 0..count {
            let nlen = r.u32()? as usize;
            let name = String::from_utf8(r.take(nlen)?.to_vec())
                .map_err(|e| Error::format(origin, format!("array name: {e}")))?;
            let rows = r.u64()? as usize;
            let cols = r.u64()? as usize;
            let data = (0..rows * cols).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            let m = DenseMatrix::new(rows, cols, data)
                .map_err(|e| Error::format(origin, e.to_string()))?;
            named.push((name, m));
        }

        let mut z = Vec::with_capacity(manifest.depth);
        for i in 1..=manifest.depth {
            let key = format!("z{i}");
            let pos = named
                .iter()
                .position(|(n, _)| *n == key)
                .ok_or_else(|| Error::format(origin, format!("missing array {key}")))?;
            z.push(named[pos].1.clone());
        }
        let h_top = named
            .iter()
            .find(|(n, _)| n == "h_top")
            .map(|(_, m)| m.clone())
            .ok_or_else(|| Error::format(origin, "missing array h_top"))?;
        if manifest.thetas.len() != manifest.depth || manifest.dims.len() != manifest.depth {
            return Err(Error::format(origin, "manifest depth disagrees with dims/thetas"));
        }
        let smoothing = manifest
            .thetas
            .iter()
            .zip(&manifest.dims)
            .map(|(&t, &r)| SmoothingSpec::new(t, r))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::format(origin, e.to_string()))?;
        let stack = LayerStack::new(z, smoothing, h_top)
            .map_err(|e| Error::format(origin, e.to_string()))?;

        let sweeps_len = r.u64()? as usize;
        let mut sweeps = Vec::with_capacity(sweeps_len.min(1 << 20));
        for _ in 0..sweeps_len {
            let sweep_index = r.u64()? as usize;
            let objective = r.f64()?;
            let blocks = r.u32()? as usize;
            let per_block_inner_iters = (0..blocks)
                .map(|_| r.u64().map(|v| v as usize))
                .collect::<Result<Vec<_>>>()?;
            sweeps.push(SweepRecord {
                sweep_index,
                objective,
                per_block_inner_iters,
            });
        }
        if r.pos != bytes.len() {
            return Err(Error::format(origin, "trailing bytes after sweep log"));
        }
        Ok(Self {
            manifest,
            stack,
            sweeps,
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    origin: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::format(self.origin, "truncated checkpoint"))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn save_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<()> {
    fs::write(path, checkpoint.to_bytes()?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let z1 = DenseMatrix::from_rows(&[[0.1, 0.2], [0.3, 1e-300], [5.5, 0.0]]).unwrap();
        let z2 = DenseMatrix::from_rows(&[[1.0], [2.0]]).unwrap();
        let h = DenseMatrix::from_rows(&[[0.25, 0.5, 0.125, std::f64::consts::PI]]).unwrap();
        let stack = LayerStack::new(
            vec![z1, z2],
            vec![
                SmoothingSpec::new(0.3, 2).unwrap(),
                SmoothingSpec::new(0.0, 1).unwrap(),
            ],
            h,
        )
        .unwrap();
        let sweeps = vec![SweepRecord {
            sweep_index: 1,
            objective: 0.75,
            per_block_inner_iters: vec![3, 4, 5],
        }];
        Checkpoint::new(stack, sweeps, 42)
    }

    #[test]
    fn byte_round_trip_is_exact() {
        let ck = sample();
        let bytes = ck.to_bytes().unwrap();
        let back = Checkpoint::from_bytes(&bytes, Path::new("mem")).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn corrupt_inputs_are_format_errors() {
        let bytes = sample().to_bytes().unwrap();
        let origin = Path::new("mem");
        assert!(matches!(
            Checkpoint::from_bytes(&bytes[..bytes.len() - 3], origin),
            Err(Error::Format { .. })
        ));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(Checkpoint::from_bytes(&bad, origin), Err(Error::Format { .. })));
        let mut extra = bytes;
        extra.push(0);
        assert!(matches!(Checkpoint::from_bytes(&extra, origin), Err(Error::Format { .. })));
    }
}
