//! Binary container for named tensors.
//!
//! Layout, all integers little-endian:
//! magic `FGNN`, format version (u32), tensor count (u32), then per tensor:
//! name length (u32), UTF-8 name, dimension count (u32, always 2), the
//! dimensions (u32 each), and the row-major f64 payload.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::diffmath::Tensor;
use crate::{Error, Result};

const MAGIC: [u8; 4] = *b"FGNN";
const VERSION: u32 = 1;

pub fn save_tensors(path: &Path, tensors: &[(String, &Tensor)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&u32_checked(tensors.len(), "tensor count")?.to_le_bytes())?;
    for (name, tensor) in tensors {
        let name_bytes = name.as_bytes();
        w.write_all(&u32_checked(name_bytes.len(), "name length")?.to_le_bytes())?;
        w.write_all(name_bytes)?;
        w.write_all(&2u32.to_le_bytes())?;
        w.write_all(&u32_checked(tensor.rows(), "rows")?.to_le_bytes())?;
        w.write_all(&u32_checked(tensor.cols(), "cols")?.to_le_bytes())?;
        for v in tensor.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_tensors(path: &Path) -> Result<Vec<(String, Tensor)>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic, "magic")?;
    if magic != MAGIC {
        return Err(Error::Checkpoint(format!(
            "bad magic {:?}, not a model checkpoint",
            magic
        )));
    }
    let version = read_u32(&mut r, "version")?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format version {} (expected {})",
            version, VERSION
        )));
    }
    let count = read_u32(&mut r, "tensor count")? as usize;
    let mut out = Vec::with_capacity(count);
    for t in 0..count {
        let name_len = read_u32(&mut r, "name length")? as usize;
        let mut name_bytes = vec![0u8; name_len];
        read_exact(&mut r, &mut name_bytes, "name")?;
        let name = String::from_utf8(name_bytes)
            .map_err(|_| Error::Checkpoint(format!("tensor {} has a non-UTF-8 name", t)))?;
        let ndim = read_u32(&mut r, "dimension count")?;
        if ndim != 2 {
            return Err(Error::Checkpoint(format!(
                "tensor {:?} has {} dimensions, expected 2",
                name, ndim
            )));
        }
        let rows = read_u32(&mut r, "rows")? as usize;
        let cols = read_u32(&mut r, "cols")? as usize;
        let len = rows.checked_mul(cols).ok_or_else(|| {
            Error::Checkpoint(format!("tensor {:?} has overflowing shape {}x{}", name, rows, cols))
        })?;
        let mut data = vec![0.0f64; len];
        let mut buf = [0u8; 8];
        for slot in &mut data {
            read_exact(&mut r, &mut buf, "tensor payload")?;
            *slot = f64::from_le_bytes(buf);
        }
        let tensor = Tensor::from_vec(rows, cols, data)
            .map_err(|e| Error::Checkpoint(format!("tensor {:?}: {}", name, e)))?;
        out.push((name, tensor));
    }
    let mut trailing = [0u8; 1];
    match r.read(&mut trailing)? {
        0 => Ok(out),
        _ => Err(Error::Checkpoint("trailing bytes after the last tensor".into())),
    }
}

fn u32_checked(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Checkpoint(format!("{} {} exceeds the format limit", what, v)))
}

fn read_u32(r: &mut impl Read, what: &str) -> Result<u32> {
    let mut buf = [0u8; 4];
    read_exact(r, &mut buf, what)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf)
        .map_err(|_| Error::Checkpoint(format!("file truncated while reading {}", what)))
}
