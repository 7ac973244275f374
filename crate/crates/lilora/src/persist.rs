//! Binary persistence: the tensor container shared by all checkpoints,
//! plus the byte-level reader/writer helpers used by the suite format.
//!
//! Layout rules common to every artifact: little-endian integers and IEEE-754
//! f64 values, row-major matrix data, and a trailing CRC32 (IEEE) computed
//! over every preceding byte including the magic. Files are written to a
//! sibling temporary path and renamed into place, so an interrupted run
//! never leaves a partial artifact at the final path.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use std::io::Write;
use std::path::Path;

/// Magic bytes of the tensor container.
pub const TENSOR_MAGIC: &[u8; 4] = b"LLTC";
/// Container format version.
pub const TENSOR_VERSION: u16 = 1;

/// Incremental byte writer.
#[derive(Default)]
pub struct ByteWriter {
    buf: Vec<u8>,
}

impl ByteWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bytes(&self) -> &[u8] {
        &self.buf
    }

    pub fn put_bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn put_u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn put_u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn put_u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn put_f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    /// Append the CRC32 of everything written so far and return the buffer.
    pub fn finish_with_crc(mut self) -> Vec<u8> {
        let crc = crc32fast::hash(&self.buf);
        self.buf.extend_from_slice(&crc.to_le_bytes());
        self.buf
    }
}

/// Byte reader tracking its offset for parse errors.
pub struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        ByteReader { buf, pos: 0 }
    }

    pub fn offset(&self) -> u64 {
        self.pos as u64
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Parse {
                offset: self.pos as u64,
                msg: format!(
                    "unexpected end of file reading {what} ({n} bytes needed, {} left)",
                    self.buf.len() - self.pos
                ),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn get_bytes(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        self.take(n, what)
    }

    pub fn get_u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    pub fn get_u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    pub fn get_u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    pub fn get_f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

/// Verify the trailing CRC32 of `bytes` and return the payload without it.
pub fn check_crc<'a>(bytes: &'a [u8], what: &str) -> Result<&'a [u8]> {
    if bytes.len() < 4 {
        return Err(Error::Parse {
            offset: 0,
            msg: format!("{what}: file shorter than its checksum"),
        });
    }
    let (payload, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    let actual = crc32fast::hash(payload);
    if stored != actual {
        return Err(Error::Integrity(format!(
            "{what}: CRC32 mismatch (stored {stored:#010x}, computed {actual:#010x})"
        )));
    }
    Ok(payload)
}

/// Write `bytes` atomically: a sibling temp file is written, flushed, and
/// renamed over the destination.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("invalid output path {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", file_name.to_string_lossy()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Ordered collection of named matrices, serialized as an `LLTC` container:
/// magic, version u16, entry count u32, then per entry a u16 name length,
/// the UTF-8 name, rows u32, cols u32, and the row-major f64 data; a CRC32
/// closes the file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TensorContainer {
    entries: Vec<(String, Matrix)>,
}

impl TensorContainer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries(entries: Vec<(String, Matrix)>) -> Self {
        TensorContainer { entries }
    }

    pub fn push(&mut self, name: impl Into<String>, m: Matrix) {
        self.entries.push((name.into(), m));
    }

    pub fn entries(&self) -> &[(String, Matrix)] {
        &self.entries
    }

    pub fn get(&self, name: &str) -> Result<&Matrix> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, m)| m)
            .ok_or_else(|| Error::Lookup(format!("container entry '{name}' not found")))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.put_bytes(TENSOR_MAGIC);
        w.put_u16(TENSOR_VERSION);
        w.put_u32(self.entries.len() as u32);
        for (name, m) in &self.entries {
            let name_bytes = name.as_bytes();
            w.put_u16(name_bytes.len() as u16);
            w.put_bytes(name_bytes);
            w.put_u32(m.rows() as u32);
            w.put_u32(m.cols() as u32);
            for &v in m.data() {
                w.put_f64(v);
            }
        }
        w.finish_with_crc()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let payload = check_crc(bytes, "tensor container")?;
        let mut r = ByteReader::new(payload);
        let magic = r.get_bytes(4, "magic")?;
        if magic != TENSOR_MAGIC {
            return Err(Error::Parse {
                offset: 0,
                msg: format!("bad magic {magic:?}, expected {TENSOR_MAGIC:?}"),
            });
        }
        let version = r.get_u16("version")?;
        if version != TENSOR_VERSION {
            return Err(Error::Parse {
                offset: r.offset() - 2,
                msg: format!("unsupported container version {version}"),
            });
        }
        let count = r.get_u32("entry count")?;
        let mut entries = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let name_len = r.get_u16("name length")? as usize;
            let name_off = r.offset();
            let name = std::str::from_utf8(r.get_bytes(name_len, "entry name")?)
                .map_err(|e| Error::Parse {
                    offset: name_off,
                    msg: format!("entry name is not UTF-8: {e}"),
                })?
                .to_string();
            let rows = r.get_u32("rows")? as usize;
            let cols = r.get_u32("cols")? as usize;
            if rows == 0 || cols == 0 {
                return Err(Error::Parse {
                    offset: r.offset() - 8,
                    msg: format!("entry '{name}' has zero dimension {rows}x{cols}"),
                });
            }
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows * cols {
                data.push(r.get_f64("matrix data")?);
            }
            entries.push((name, Matrix::from_vec(rows, cols, data)?));
        }
        if r.remaining() != 0 {
            return Err(Error::Parse {
                offset: r.offset(),
                msg: format!("{} trailing bytes after last entry", r.remaining()),
            });
        }
        Ok(TensorContainer { entries })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        atomic_write(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{gaussian_matrix, Rng};

    fn sample() -> TensorContainer {
        let mut rng = Rng::from_seed(8);
        let mut c = TensorContainer::new();
        c.push("layer0/W", gaussian_matrix(&mut rng, 3, 4, 1.0).unwrap());
        c.push("layer0/b", gaussian_matrix(&mut rng, 3, 1, 1.0).unwrap());
        c.push("meta/count", Matrix::scalar(2.0));
        c
    }

    #[test]
    fn roundtrip_is_bit_identical() {
        let c = sample();
        let bytes = c.to_bytes();
        let back = TensorContainer::from_bytes(&bytes).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn truncated_file_is_parse_error() {
        let bytes = sample().to_bytes();
        // Any truncation either breaks the CRC (integrity) or, with the CRC
        // stripped first, yields a parse error carrying a byte offset.
        let payload = &bytes[..bytes.len() - 4];
        let cut = &payload[..payload.len() / 2];
        let mut with_crc = cut.to_vec();
        with_crc.extend_from_slice(&crc32fast::hash(cut).to_le_bytes());
        let err = TensorContainer::from_bytes(&with_crc).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
    }

    #[test]
    fn corrupted_byte_is_integrity_error() {
        let mut bytes = sample().to_bytes();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0xff;
        let err = TensorContainer::from_bytes(&bytes).unwrap_err();
        assert!(matches!(err, Error::Integrity(_)), "{err}");
    }

    #[test]
    fn lookup_missing_entry() {
        let c = sample();
        assert!(matches!(c.get("nope").unwrap_err(), Error::Lookup(_)));
    }

    #[test]
    fn atomic_write_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.lltc");
        sample().save(&path).unwrap();
        let names: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        assert_eq!(names, vec!["x.lltc".to_string()]);
        TensorContainer::load(&path).unwrap();
    }
}
