//! Binary container for tensor trains plus a JSON metadata sidecar.
//!
//! Layout, little endian: magic `LSPKTT01`, `u64` dimension count, then per
//! core `u64` shape triple and its entries as `f64` in row-major order, then
//! per dimension the grid lower and upper bounds (`f64`) and point count (`u64`).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Core, Grid, TensorTrain};
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"LSPKTT01";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TtMeta {
    pub eps: f64,
    pub max_rank: usize,
    pub provenance: String,
}

pub fn encode(tt: &TensorTrain) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + tt.storage() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(tt.dim() as u64).to_le_bytes());
    for c in tt.cores() {
        for s in [c.r0, c.n, c.r1] {
            out.extend_from_slice(&(s as u64).to_le_bytes());
        }
        for v in &c.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let g = tt.grid();
    for k in 0..g.dim() {
        out.extend_from_slice(&g.lower()[k].to_le_bytes());
        out.extend_from_slice(&g.upper()[k].to_le_bytes());
        out.extend_from_slice(&(g.counts()[k] as u64).to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn size(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Format("size does not fit".into()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<TensorTrain> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Format("not a tensor-train container".into()));
    }
    let d = r.size()?;
    if d == 0 || d > 4096 {
        return Err(Error::Format(format!("implausible dimension count {d}")));
    }
    let mut cores = Vec::with_capacity(d);
    for _ in 0..d {
        let (r0, n, r1) = (r.size()?, r.size()?, r.size()?);
        let len = r0
            .checked_mul(n)
            .and_then(|x| x.checked_mul(r1))
            .filter(|&l| l.saturating_mul(8) <= bytes.len())
            .ok_or_else(|| Error::Format("core shape exceeds file size".into()))?;
        let data = (0..len).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        cores.push(Core::new(r0, n, r1, data)?);
    }
    let (mut lo, mut hi, mut counts) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..d {
        lo.push(r.f64()?);
        hi.push(r.f64()?);
        counts.push(r.size()?);
    }
    if r.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after grid".into()));
    }
    TensorTrain::new(cores, Grid::new(lo, hi, counts)?)
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn save(path: &Path, tt: &TensorTrain, meta: &TtMeta) -> Result<()> {
    std::fs::write(path, encode(tt))?;
    std::fs::write(sidecar_path(path), serde_json::to_vec_pretty(meta)?)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(TensorTrain, TtMeta)> {
    let tt = decode(&std::fs::read(path)?)?;
    let meta = serde_json::from_slice(&std::fs::read(sidecar_path(path))?)?;
    Ok((tt, meta))
}
