//! Versioned single-file container: `JEEB` magic, u32 LE version, u32 LE
//! header length, a JSON header, then each named block as u32 LE nonzero
//! count followed by `(u32 LE index, f64 LE value)` pairs. The header lists
//! the blocks in file order with their dense lengths.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"JEEB";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockInfo {
    pub name: String,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    blocks: Vec<BlockInfo>,
    meta: Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub meta: Value,
    pub blocks: Vec<(String, Vec<f64>)>,
}

impl Container {
    pub fn block(&self, name: &str) -> Result<&[f64]> {
        self.blocks
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
            .ok_or_else(|| Error::Container(format!("missing block `{name}`")))
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let header = Header {
            blocks: self.blocks.iter().map(|(name, v)| BlockInfo { name: name.clone(), len: v.len() }).collect(),
            meta: self.meta.clone(),
        };
        let json = serde_json::to_vec(&header).map_err(|e| Error::Container(e.to_string()))?;
        let io = |e: std::io::Error| Error::Container(e.to_string());
        w.write_all(MAGIC).map_err(io)?;
        w.write_all(&VERSION.to_le_bytes()).map_err(io)?;
        w.write_all(&(json.len() as u32).to_le_bytes()).map_err(io)?;
        w.write_all(&json).map_err(io)?;
        for (name, values) in &self.blocks {
            if values.len() > u32::MAX as usize {
                return Err(Error::Container(format!("block `{name}` too long")));
            }
            let nz: Vec<(u32, f64)> = values.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(i, &v)| (i as u32, v)).collect();
            w.write_all(&(nz.len() as u32).to_le_bytes()).map_err(io)?;
            for (i, v) in nz {
                w.write_all(&i.to_le_bytes()).map_err(io)?;
                w.write_all(&v.to_le_bytes()).map_err(io)?;
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        Ok(buf)
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let truncated = |_: std::io::Error| Error::Container("truncated container".into());
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(truncated)?;
        if &magic != MAGIC {
            return Err(Error::Container("not a model container (bad magic)".into()));
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word).map_err(truncated)?;
        let version = u32::from_le_bytes(word);
        if version != VERSION {
            return Err(Error::Container(format!("unsupported container version {version}")));
        }
        r.read_exact(&mut word).map_err(truncated)?;
        let mut json = vec![0u8; u32::from_le_bytes(word) as usize];
        r.read_exact(&mut json).map_err(truncated)?;
        let header: Header = serde_json::from_slice(&json).map_err(|e| Error::Container(format!("bad header: {e}")))?;
        let mut blocks = Vec::with_capacity(header.blocks.len());
        for info in header.blocks {
            r.read_exact(&mut word).map_err(truncated)?;
            let nnz = u32::from_le_bytes(word) as usize;
            if nnz > info.len {
                return Err(Error::Container(format!("block `{}` has {nnz} entries for length {}", info.name, info.len)));
            }
            let mut values = vec![0.0; info.len];
            let mut entry = [0u8; 12];
            for _ in 0..nnz {
                r.read_exact(&mut entry).map_err(truncated)?;
                let i = u32::from_le_bytes(entry[..4].try_into().unwrap()) as usize;
                let v = f64::from_le_bytes(entry[4..].try_into().unwrap());
                *values
                    .get_mut(i)
                    .ok_or_else(|| Error::Container(format!("block `{}` index {i} out of range", info.name)))? = v;
            }
            blocks.push((info.name, values));
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest).map_err(truncated)? != 0 {
            return Err(Error::Container("trailing bytes after last block".into()));
        }
        Ok(Container { meta: header.meta, blocks })
    }
}
