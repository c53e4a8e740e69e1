//! Tensor blob files.
//!
//! Value blob (`.vw4c`), all integers little-endian:
//!
//! ```text
//! offset        size    field
//! 0             4       magic  b"VW4C"
//! 4             4       u32    format version (1)
//! 8             4       u32    number of dimensions d
//! 12            8*d     u64    extents, outermost first
//! 12+8d         4*n     f32    values, row-major, n = product of extents
//! 12+8d+4n      4       u32    CRC32 (IEEE) of every preceding byte
//! ```
//!
//! Mask blob (`.vw4m`): same layout with magic `b"VW4M"` and the payload
//! replaced by `ceil(n / 8)` bytes of packed bits; element `i` is bit
//! `i % 8` (least significant first) of byte `i / 8`, 1 meaning valid.
//! Unused trailing bits are zero.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const BLOB_VERSION: u32 = 1;
pub const VALUE_MAGIC: &[u8; 4] = b"VW4C";
pub const MASK_MAGIC: &[u8; 4] = b"VW4M";

fn header(magic: &[u8; 4], shape: &[usize], payload: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 8 * shape.len() + payload + 4);
    out.extend_from_slice(magic);
    out.extend_from_slice(&BLOB_VERSION.to_le_bytes());
    out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
    for &e in shape {
        out.extend_from_slice(&(e as u64).to_le_bytes());
    }
    out
}

fn finish(mut bytes: Vec<u8>) -> Vec<u8> {
    let crc = crc32fast::hash(&bytes);
    bytes.extend_from_slice(&crc.to_le_bytes());
    bytes
}

pub fn encode_values(shape: &[usize], values: &[f32]) -> Vec<u8> {
    assert_eq!(shape.iter().product::<usize>(), values.len(), "blob shape does not match data");
    let mut out = header(VALUE_MAGIC, shape, 4 * values.len());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    finish(out)
}

pub fn encode_mask(shape: &[usize], mask: &[bool]) -> Vec<u8> {
    assert_eq!(shape.iter().product::<usize>(), mask.len(), "blob shape does not match data");
    let mut packed = vec![0u8; mask.len().div_ceil(8)];
    for (i, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
        packed[i / 8] |= 1 << (i % 8);
    }
    let mut out = header(MASK_MAGIC, shape, packed.len());
    out.extend_from_slice(&packed);
    finish(out)
}

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

/// Verifies checksum, magic and version; returns the shape and payload.
fn parse<'a>(path: &Path, magic: &[u8; 4], bytes: &'a [u8]) -> Result<(Vec<usize>, &'a [u8])> {
    if bytes.len() < 16 {
        return Err(format_err(path, format!("file of {} bytes is too short for a blob", bytes.len())));
    }
    let body = &bytes[..bytes.len() - 4];
    let expected = u32_at(bytes, bytes.len() - 4);
    let found = crc32fast::hash(body);
    if expected != found {
        return Err(Error::Checksum {
            path: path.to_path_buf(),
            expected,
            found,
        });
    }
    if &body[..4] != magic {
        return Err(format_err(
            path,
            format!("magic {:?} where {:?} was expected", String::from_utf8_lossy(&body[..4]), String::from_utf8_lossy(magic)),
        ));
    }
    let version = u32_at(body, 4);
    if version != BLOB_VERSION {
        return Err(Error::Version {
            path: path.to_path_buf(),
            expected: BLOB_VERSION,
            found: version,
        });
    }
    let dims = u32_at(body, 8) as usize;
    let data_at = 12 + 8 * dims;
    if body.len() < data_at {
        return Err(format_err(path, "header truncated"));
    }
    let shape: Vec<usize> = (0..dims)
        .map(|i| u64::from_le_bytes(body[12 + 8 * i..20 + 8 * i].try_into().expect("8 bytes")) as usize)
        .collect();
    Ok((shape, &body[data_at..]))
}

pub fn decode_values(path: &Path, bytes: &[u8]) -> Result<(Vec<usize>, Vec<f32>)> {
    let (shape, payload) = parse(path, VALUE_MAGIC, bytes)?;
    let n: usize = shape.iter().product();
    if payload.len() != 4 * n {
        return Err(format_err(
            path,
            format!("shape {shape:?} needs {} payload bytes, found {}", 4 * n, payload.len()),
        ));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    Ok((shape, values))
}

pub fn decode_mask(path: &Path, bytes: &[u8]) -> Result<(Vec<usize>, Vec<bool>)> {
    let (shape, payload) = parse(path, MASK_MAGIC, bytes)?;
    let n: usize = shape.iter().product();
    if payload.len() != n.div_ceil(8) {
        return Err(format_err(
            path,
            format!("shape {shape:?} needs {} mask bytes, found {}", n.div_ceil(8), payload.len()),
        ));
    }
    Ok((shape, (0..n).map(|i| payload[i / 8] >> (i % 8) & 1 == 1).collect()))
}

/// Writes a value blob and returns the file's trailing CRC32.
pub fn write_values(path: &Path, shape: &[usize], values: &[f32]) -> Result<u32> {
    write_bytes(path, encode_values(shape, values))
}

pub fn write_mask(path: &Path, shape: &[usize], mask: &[bool]) -> Result<u32> {
    write_bytes(path, encode_mask(shape, mask))
}

fn write_bytes(path: &Path, bytes: Vec<u8>) -> Result<u32> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let crc = u32_at(&bytes, bytes.len() - 4);
    fs::write(path, &bytes).map_err(|e| Error::io(path, e))?;
    Ok(crc)
}

pub fn read_values(path: &Path) -> Result<(Vec<usize>, Vec<f32>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_values(path, &bytes)
}

pub fn read_mask(path: &Path) -> Result<(Vec<usize>, Vec<bool>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_mask(path, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_layout_is_exact() {
        let bytes = encode_values(&[2], &[1.0, -2.5]);
        assert_eq!(&bytes[..4], b"VW4C");
        assert_eq!(u32_at(&bytes, 4), 1);
        assert_eq!(u32_at(&bytes, 8), 1);
        assert_eq!(u64::from_le_bytes(bytes[12..20].try_into().unwrap()), 2);
        assert_eq!(&bytes[20..24], &1.0f32.to_le_bytes());
        assert_eq!(&bytes[24..28], &(-2.5f32).to_le_bytes());
        assert_eq!(bytes.len(), 32);
        assert_eq!(u32_at(&bytes, 28), crc32fast::hash(&bytes[..28]));
    }

    #[test]
    fn mask_bits_are_lsb_first() {
        let mask = [true, false, false, true, false, false, false, false, true];
        let bytes = encode_mask(&[9], &mask);
        assert_eq!(&bytes[20..22], &[0b0000_1001, 0b0000_0001]);
        let (shape, back) = decode_mask(Path::new("m"), &bytes).unwrap();
        assert_eq!(shape, vec![9]);
        assert_eq!(back, mask);
    }

    #[test]
    fn round_trip_and_errors() {
        let p = Path::new("x.vw4c");
        let values = [0.5f32, f32::MAX, -0.0, 1e-30, 7.0, 8.0];
        let bytes = encode_values(&[1, 2, 3], &values);
        let (shape, back) = decode_values(p, &bytes).unwrap();
        assert_eq!(shape, vec![1, 2, 3]);
        assert_eq!(back.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), values.map(f32::to_bits).to_vec());

        let mut bad = bytes.clone();
        bad[22] ^= 0x10;
        assert!(matches!(decode_values(p, &bad), Err(Error::Checksum { .. })));
        assert!(matches!(decode_values(p, &bytes[..10]), Err(Error::Format { .. })));
        assert!(matches!(decode_mask(p, &bytes), Err(Error::Format { .. })));

        let mut future = bytes[..bytes.len() - 4].to_vec();
        future[4] = 2;
        let future = finish(future);
        assert!(matches!(decode_values(p, &future), Err(Error::Version { found: 2, .. })));
    }
}
