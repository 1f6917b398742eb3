//! Binary vector file.
//!
//! ```text
//! "TXVE"            4 bytes magic
//! version    u16    little-endian, currently 1
//! dim        u32
//! count      u64
//! count × {
//!   id_len   u16
//!   id       id_len bytes of UTF-8
//!   values   dim × f32 (IEEE-754, little-endian)
//! }
//! ```
//!
//! No padding, no trailing data. Identical input always encodes to identical
//! bytes.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::vector::Embedding;

pub const MAGIC: &[u8; 4] = b"TXVE";
pub const FORMAT_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 + 8;

#[derive(Debug, Clone, PartialEq)]
pub struct VectorFile {
    pub dim: usize,
    pub records: Vec<(String, Embedding)>,
}

pub fn encode<I, S, V>(dim: usize, records: I) -> Result<Vec<u8>>
where
    I: IntoIterator<Item = (S, V)>,
    S: AsRef<str>,
    V: AsRef<[f32]>,
{
    if dim == 0 || dim > u32::MAX as usize {
        return Err(Error::InvalidInput(format!("unsupported dimension {dim}")));
    }
    let mut body = Vec::new();
    let mut count: u64 = 0;
    for (id, values) in records {
        let (id, values) = (id.as_ref(), values.as_ref());
        if values.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: values.len(),
            });
        }
        let id_len = u16::try_from(id.len())
            .map_err(|_| Error::InvalidInput(format!("id longer than 65535 bytes: {id:.32}…")))?;
        body.extend_from_slice(&id_len.to_le_bytes());
        body.extend_from_slice(id.as_bytes());
        for v in values {
            body.extend_from_slice(&v.to_le_bytes());
        }
        count += 1;
    }
    let mut out = Vec::with_capacity(HEADER_LEN + body.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    out.extend_from_slice(&body);
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<VectorFile> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::CorruptHeader(format!(
            "{} bytes is shorter than the {HEADER_LEN}-byte header",
            bytes.len()
        )));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::CorruptHeader("bad magic".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FORMAT_VERSION {
        return Err(Error::CorruptHeader(format!("unsupported version {version}")));
    }
    let dim = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    if dim == 0 {
        return Err(Error::CorruptHeader("dimension is zero".into()));
    }
    let count = u64::from_le_bytes(bytes[10..18].try_into().unwrap());

    let mut cursor = Cursor { bytes, pos: HEADER_LEN };
    let mut records = Vec::new();
    for n in 0..count {
        let truncated = || Error::CountMismatch {
            expected: count,
            actual: n,
        };
        let id_len = cursor.take(2).ok_or_else(truncated)?;
        let id_len = u16::from_le_bytes([id_len[0], id_len[1]]) as usize;
        let id = cursor.take(id_len).ok_or_else(truncated)?;
        let id = std::str::from_utf8(id)
            .map_err(|_| Error::InvalidInput(format!("record {n}: id is not UTF-8")))?
            .to_owned();
        let raw = cursor.take(dim * 4).ok_or_else(truncated)?;
        let values: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        records.push((id, Embedding::new(values)?));
    }
    if cursor.pos != bytes.len() {
        // Trailing bytes mean the header undercounts the records.
        return Err(Error::CountMismatch {
            expected: count,
            actual: count + 1,
        });
    }
    Ok(VectorFile { dim, records })
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let s = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(s)
    }
}

/// Writes atomically: the file is either the old content or the new content.
pub fn write_vector_file<I, S, V>(path: impl AsRef<Path>, dim: usize, records: I) -> Result<()>
where
    I: IntoIterator<Item = (S, V)>,
    S: AsRef<str>,
    V: AsRef<[f32]>,
{
    let bytes = encode(dim, records)?;
    write_atomic(path.as_ref(), &bytes)
}

pub fn load_vector_file(path: impl AsRef<Path>) -> Result<VectorFile> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

/// Writes `bytes` through a sibling temporary file and a rename, so readers
/// see either the old content or the new content.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    static SEQ: std::sync::atomic::AtomicU64 = std::sync::atomic::AtomicU64::new(0);
    let n = SEQ.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
    tmp.push(format!(".tmp{}-{n}", std::process::id()));
    let tmp = std::path::PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
