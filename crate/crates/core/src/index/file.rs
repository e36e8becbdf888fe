//! Binary vector-file format.
//!
//! Layout, little-endian: `AMVD`, version u16, dim u16, count u32, strategy
//! tag (u16 length + UTF-8), weight flag u8 followed by 5 f64 when set, mask
//! u8, then `count` records of (id u64, dim f32). A CRC32 of everything before
//! it closes the file.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::{IndexError, StrategyTag, VectorDb};
use crate::embedding::{SentenceMask, WeightVector};
use crate::model::EntityId;

const MAGIC: &[u8; 4] = b"AMVD";
const VERSION: u16 = 1;

pub fn vd_to_bytes(db: &VectorDb) -> Vec<u8> {
    let mut b = Vec::new();
    b.extend_from_slice(MAGIC);
    b.extend_from_slice(&VERSION.to_le_bytes());
    b.extend_from_slice(&(db.dim() as u16).to_le_bytes());
    b.extend_from_slice(&(db.len() as u32).to_le_bytes());
    let tag = db.strategy_tag.as_str().as_bytes();
    b.extend_from_slice(&(tag.len() as u16).to_le_bytes());
    b.extend_from_slice(tag);
    match db.weights {
        Some(w) => {
            b.push(1);
            for x in w.values() {
                b.extend_from_slice(&x.to_le_bytes());
            }
        }
        None => b.push(0),
    }
    b.push(db.mask.bits());
    for (id, v) in db.raw_records() {
        b.extend_from_slice(&id.0.to_le_bytes());
        for x in v {
            b.extend_from_slice(&x.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&b);
    b.extend_from_slice(&crc.to_le_bytes());
    b
}

pub fn write_vd<W: Write>(db: &VectorDb, mut w: W) -> Result<(), IndexError> {
    w.write_all(&vd_to_bytes(db))?;
    w.flush()?;
    Ok(())
}

pub fn save_vd(db: &VectorDb, path: impl AsRef<Path>) -> Result<(), IndexError> {
    write_vd(db, BufWriter::new(File::create(path)?))
}

pub fn load_vd(path: impl AsRef<Path>) -> Result<VectorDb, IndexError> {
    read_vd(File::open(path)?)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], IndexError> {
        if self.buf.len() - self.pos < n {
            return Err(IndexError::MalformedFile(format!("truncated while reading {what}")));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8, IndexError> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16, IndexError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32, IndexError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64, IndexError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

pub fn read_vd<R: Read>(mut r: R) -> Result<VectorDb, IndexError> {
    let mut all = Vec::new();
    r.read_to_end(&mut all)?;
    if all.len() < 4 + 4 {
        return Err(IndexError::MalformedFile("file too short".into()));
    }
    let (payload, crc_bytes) = all.split_at(all.len() - 4);
    let mut c = Cursor { buf: payload, pos: 0 };
    if c.take(4, "magic")? != MAGIC {
        return Err(IndexError::MalformedFile("bad magic bytes".into()));
    }
    let version = c.u16("version")?;
    if version != VERSION {
        return Err(IndexError::MalformedFile(format!("unsupported version {version}")));
    }
    let dim = c.u16("dim")? as usize;
    let count = c.u32("count")? as usize;
    let tag_len = c.u16("strategy tag")? as usize;
    let tag = std::str::from_utf8(c.take(tag_len, "strategy tag")?)
        .ok()
        .and_then(StrategyTag::parse)
        .ok_or_else(|| IndexError::MalformedFile("unknown strategy tag".into()))?;
    let weights = match c.u8("weight flag")? {
        0 => None,
        1 => {
            let mut w = [0.0; 5];
            for x in &mut w {
                *x = f64::from_bits(c.u64("weights")?);
            }
            Some(WeightVector::new(w).map_err(|e| IndexError::MalformedFile(e.to_string()))?)
        }
        f => return Err(IndexError::MalformedFile(format!("bad weight flag {f}"))),
    };
    let mask = SentenceMask::from_bits(c.u8("mask")?).map_err(|e| IndexError::MalformedFile(e.to_string()))?;
    let record_len = 8 + 4 * dim;
    let expected = c.pos + count * record_len;
    if payload.len() != expected {
        return Err(IndexError::MalformedFile(format!(
            "payload is {} bytes, header implies {expected}",
            payload.len()
        )));
    }
    let stored = u32::from_le_bytes(crc_bytes.try_into().unwrap());
    let computed = crc32fast::hash(payload);
    if stored != computed {
        return Err(IndexError::ChecksumMismatch { stored, computed });
    }
    if dim != crate::embedding::DIM {
        return Err(IndexError::MalformedFile(format!("dimension {dim} is not supported")));
    }
    let mut db = VectorDb::new(tag, weights, mask);
    for _ in 0..count {
        let id = EntityId(c.u64("record id")?);
        let raw = c.take(4 * dim, "record vector")?;
        let v: Vec<f32> = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        if db.contains(id) {
            return Err(IndexError::MalformedFile(format!("duplicate record {id}")));
        }
        db.insert_stored(id, v);
    }
    Ok(db)
}
