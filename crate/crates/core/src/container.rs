//! Binary container shared by checkpoints and training state:
//!
//! ```text
//! magic[4] | version u32 | header_len u32 | header (UTF-8)
//! | blob_count u32 | blob*
//! blob = name_len u16 | name | ndim u8 | dims u32* | values f32*
//! ```
//!
//! All integers and floats are little-endian.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Blob {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Container {
    pub header: String,
    pub blobs: Vec<Blob>,
}

pub(crate) fn encode(magic: &[u8; 4], version: u32, c: &Container) -> Vec<u8> {
    let payload: usize = c.blobs.iter().map(|b| b.data.len() * 4 + 64).sum();
    let mut out = Vec::with_capacity(16 + c.header.len() + payload);
    out.extend_from_slice(magic);
    out.extend_from_slice(&version.to_le_bytes());
    out.extend_from_slice(&(c.header.len() as u32).to_le_bytes());
    out.extend_from_slice(c.header.as_bytes());
    out.extend_from_slice(&(c.blobs.len() as u32).to_le_bytes());
    for blob in &c.blobs {
        out.extend_from_slice(&(blob.name.len() as u16).to_le_bytes());
        out.extend_from_slice(blob.name.as_bytes());
        out.push(blob.shape.len() as u8);
        for &d in &blob.shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in &blob.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| {
            Error::CorruptCheckpoint(format!("truncated at byte {} (wanted {n} more)", self.pos))
        })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn string(&mut self, n: usize) -> Result<String> {
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::CorruptCheckpoint("invalid UTF-8 text".into()))
    }
}

pub(crate) fn decode(bytes: &[u8], magic: &[u8; 4], version: u32) -> Result<Container> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != magic {
        return Err(Error::CorruptCheckpoint(format!(
            "bad magic bytes (expected {:?})",
            String::from_utf8_lossy(magic)
        )));
    }
    let found = r.u32()?;
    if found != version {
        return Err(Error::VersionMismatch {
            found,
            expected: version,
        });
    }
    let header_len = r.u32()? as usize;
    let header = r.string(header_len)?;
    let count = r.u32()? as usize;
    let mut blobs = Vec::with_capacity(count.min(4096));
    for _ in 0..count {
        let name_len = r.u16()? as usize;
        let name = r.string(name_len)?;
        let ndim = r.u8()? as usize;
        let shape = (0..ndim)
            .map(|_| r.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let numel = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::CorruptCheckpoint(format!("blob {name}: shape overflows")))?;
        let raw = r.take(numel.checked_mul(4).ok_or_else(|| {
            Error::CorruptCheckpoint(format!("blob {name}: size overflows"))
        })?)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        blobs.push(Blob { name, shape, data });
    }
    if r.pos != bytes.len() {
        return Err(Error::CorruptCheckpoint(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    Ok(Container { header, blobs })
}
