//! Self-describing checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic      8 bytes  "NERSAUG\0"
//! version    u32
//! config     u64 length + UTF-8 text (resolved key=value block)
//! tables     u32 count, each: name, u32 item count, items      (strings)
//! arrays     u32 count, each: name, group, u8 trainable,
//!            u32 rank, rank × u64 dims, prod(dims) × f64
//! ```
//!
//! Strings inside tables and arrays are `u32 length + UTF-8 bytes`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{ParamStore, Tensor};
use crate::error::{Error, Result};
use crate::Scalar;

pub const MAGIC: &[u8; 8] = b"NERSAUG\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedArray {
    pub name: String,
    pub group: String,
    pub trainable: bool,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub config: String,
    pub tables: Vec<(String, Vec<String>)>,
    pub arrays: Vec<NamedArray>,
}

impl Checkpoint {
    pub fn from_store<F: Scalar>(store: &ParamStore<F>, config: String) -> Self {
        let arrays = store
            .entries()
            .map(|(_, e)| NamedArray {
                name: e.name.clone(),
                group: e.group.clone(),
                trainable: e.trainable,
                shape: e.value().shape().to_vec(),
                data: e.value().to_f64_vec(),
            })
            .collect();
        Self {
            config,
            tables: Vec::new(),
            arrays,
        }
    }

    pub fn to_store<F: Scalar>(&self) -> Result<ParamStore<F>> {
        let mut store = ParamStore::new();
        for a in &self.arrays {
            if store.id(&a.name).is_some() {
                return Err(Error::Checkpoint(format!("duplicate array `{}`", a.name)));
            }
            let t = Tensor::from_f64(a.shape.clone(), &a.data)
                .map_err(|e| Error::Checkpoint(format!("array `{}`: {e}", a.name)))?;
            store.insert(&a.name, &a.group, a.trainable, t);
        }
        Ok(store)
    }

    pub fn table(&self, name: &str) -> Option<&[String]> {
        self.tables
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.config.len() as u64).to_le_bytes())?;
        w.write_all(self.config.as_bytes())?;

        w.write_all(&(self.tables.len() as u32).to_le_bytes())?;
        for (name, items) in &self.tables {
            write_str(w, name)?;
            w.write_all(&(items.len() as u32).to_le_bytes())?;
            for s in items {
                write_str(w, s)?;
            }
        }

        w.write_all(&(self.arrays.len() as u32).to_le_bytes())?;
        for a in &self.arrays {
            write_str(w, &a.name)?;
            write_str(w, &a.group)?;
            w.write_all(&[a.trainable as u8])?;
            w.write_all(&(a.shape.len() as u32).to_le_bytes())?;
            for &d in &a.shape {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
            for &v in &a.data {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        read_exact(r, &mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint("bad magic; not a checkpoint file".into()));
        }
        let version = read_u32(r)?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let clen = read_u64(r)? as usize;
        let config = read_utf8(r, clen)?;

        let ntables = read_u32(r)? as usize;
        let mut tables = Vec::with_capacity(ntables);
        for _ in 0..ntables {
            let name = read_str(r)?;
            let n = read_u32(r)? as usize;
            let items = (0..n).map(|_| read_str(r)).collect::<Result<Vec<_>>>()?;
            tables.push((name, items));
        }

        let narrays = read_u32(r)? as usize;
        let mut arrays = Vec::with_capacity(narrays);
        for _ in 0..narrays {
            let name = read_str(r)?;
            let group = read_str(r)?;
            let mut flag = [0u8; 1];
            read_exact(r, &mut flag)?;
            let rank = read_u32(r)? as usize;
            let shape = (0..rank)
                .map(|_| read_u64(r).map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let len: usize = shape.iter().product();
            let mut data = Vec::with_capacity(len);
            let mut buf = [0u8; 8];
            for _ in 0..len {
                read_exact(r, &mut buf)?;
                data.push(f64::from_le_bytes(buf));
            }
            arrays.push(NamedArray {
                name,
                group,
                trainable: flag[0] != 0,
                shape,
                data,
            });
        }
        Ok(Self {
            config,
            tables,
            arrays,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(&mut BufReader::new(file))
    }
}

fn write_str(w: &mut impl Write, s: &str) -> std::io::Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

fn read_exact(r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf)
        .map_err(|e| Error::Checkpoint(format!("truncated file: {e}")))
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_utf8(r: &mut impl Read, len: usize) -> Result<String> {
    let mut buf = vec![0u8; len];
    read_exact(r, &mut buf)?;
    String::from_utf8(buf).map_err(|_| Error::Checkpoint("invalid UTF-8 string".into()))
}

fn read_str(r: &mut impl Read) -> Result<String> {
    let len = read_u32(r)? as usize;
    read_utf8(r, len)
}
