//! Parameter checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! b"GRAFTCKP"  u32 version  u32 count
//! count × { u32 name_len, name (utf-8), u32 ndim, ndim × u64 extent, f64 values }
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::optim::ParamStore;
use super::tensor::Tensor;
use crate::error::{GraftError, Result};

const MAGIC: &[u8; 8] = b"GRAFTCKP";
const VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(store: &ParamStore, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(store.len() as u32).to_le_bytes())?;
    for (name, t) in store.iter() {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
        for &s in t.shape() {
            w.write_all(&(s as u64).to_le_bytes())?;
        }
        for v in t.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

/// Reads parameter values; optimizer moments start at zero.
pub fn read_checkpoint<R: Read>(mut r: R) -> Result<ParamStore> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(GraftError::Checkpoint("bad magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(GraftError::Checkpoint(format!("unsupported version {version}")));
    }
    let count = read_u32(&mut r)?;
    let mut store = ParamStore::new();
    for _ in 0..count {
        let n = read_u32(&mut r)? as usize;
        let mut name = vec![0u8; n];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name)
            .map_err(|_| GraftError::Checkpoint("parameter name is not utf-8".into()))?;
        let ndim = read_u32(&mut r)? as usize;
        let shape = (0..ndim)
            .map(|_| read_u64(&mut r).map(|v| v as usize))
            .collect::<Result<Vec<_>>>()?;
        let len: usize = shape.iter().product();
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(f64::from_le_bytes(read_u64(&mut r)?.to_le_bytes()));
        }
        store.insert(name, Tensor::new(&shape, data)?);
    }
    Ok(store)
}

pub fn save_checkpoint(store: &ParamStore, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_checkpoint(store, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<ParamStore> {
    let bytes = fs::read(path)?;
    read_checkpoint(bytes.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Init;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut s = ParamStore::new();
        s.init("layer.w", 3, 5, Init::Xavier, 11);
        s.init("layer.b", 1, 5, Init::Normal(1e-300), 11);
        s.insert("odd", Tensor::new(&[2], vec![-0.0, f64::MIN_POSITIVE]).unwrap());
        let mut buf = Vec::new();
        write_checkpoint(&s, &mut buf).unwrap();
        let back = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(back.checksums(), s.checksums());
        assert_eq!(back.get("odd").unwrap().shape(), &[2]);
    }

    #[test]
    fn rejects_foreign_files() {
        assert!(read_checkpoint(&b"NOTACKPT\x01\0\0\0\0\0\0\0"[..]).is_err());
        let mut buf = Vec::new();
        write_checkpoint(&ParamStore::new(), &mut buf).unwrap();
        buf[8] = 9;
        assert!(read_checkpoint(buf.as_slice()).is_err());
    }
}
