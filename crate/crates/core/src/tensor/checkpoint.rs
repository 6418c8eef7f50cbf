//! Flat tensor archive: magic `CGTC`, a version byte, a little-endian `u32`
//! record count, then per record: `u32` name length, UTF-8 name, `u32` rank,
//! `u32` dims, and row-major little-endian `f64` values.

use std::io::{Read, Write};

use super::{Tensor, TensorError};

pub const MAGIC: &[u8; 4] = b"CGTC";
pub const VERSION: u8 = 1;

pub fn write_tensors<W: Write>(mut w: W, records: &[(String, Tensor)]) -> Result<(), TensorError> {
    w.write_all(MAGIC)?;
    w.write_all(&[VERSION])?;
    w.write_all(&(records.len() as u32).to_le_bytes())?;
    for (name, t) in records {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
        for &d in t.shape() {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(t.numel() * 8);
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize, what: &str) -> Result<&[u8], TensorError> {
        if self.pos + n > self.bytes.len() {
            return Err(TensorError::Format { offset: self.pos, msg: format!("truncated while reading {what}") });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32, TensorError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn read_tensors<R: Read>(mut r: R) -> Result<Vec<(String, Tensor)>, TensorError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut c = Cursor { bytes: &bytes, pos: 0 };
    if c.take(4, "magic")? != MAGIC {
        return Err(TensorError::Format { offset: 0, msg: "bad magic".into() });
    }
    let version = c.take(1, "version")?[0];
    if version != VERSION {
        return Err(TensorError::Format { offset: 4, msg: format!("unsupported version {version}") });
    }
    let count = c.u32("record count")? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let len = c.u32("name length")? as usize;
        let at = c.pos;
        let name = std::str::from_utf8(c.take(len, "name")?)
            .map_err(|_| TensorError::Format { offset: at, msg: "name is not UTF-8".into() })?
            .to_string();
        let rank = c.u32("rank")? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(c.u32("dimension")? as usize);
        }
        let numel: usize = shape.iter().product();
        let at = c.pos;
        let raw = c.take(numel * 8, "values")?;
        let data = raw
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
            .collect();
        let t = Tensor::new(shape, data).map_err(|e| TensorError::Format { offset: at, msg: e.to_string() })?;
        out.push((name, t));
    }
    if c.pos != bytes.len() {
        return Err(TensorError::Format { offset: c.pos, msg: "trailing bytes".into() });
    }
    Ok(out)
}
