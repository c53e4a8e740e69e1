//! 8-bit binary PGM (P5) images.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Writes `values` (row-major, `height × width`) scaled linearly from
/// `[lo, hi]` to `[0, 255]`; values outside the range saturate.
pub fn write_pgm(path: &Path, width: usize, height: usize, values: &[f64], lo: f64, hi: f64) -> Result<()> {
    if values.len() != width * height {
        return Err(Error::Config(format!(
            "image {} needs {} values, got {}",
            path.display(),
            width * height,
            values.len()
        )));
    }
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut bytes = format!("P5\n{width} {height}\n255\n").into_bytes();
    bytes.extend(values.iter().map(|&v| {
        let g = ((v - lo) / span * 255.0).round();
        if g.is_nan() { 0 } else { g.clamp(0.0, 255.0) as u8 }
    }));
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Reads a P5 image written by [`write_pgm`]: `(width, height, pixels)`.
pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |reason: &str| Error::Format {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    if fields[0] != "P5" || fields[3] != "255" {
        return Err(bad("not an 8-bit P5 image"));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| bad("bad dimensions"));
    let (w, h) = (parse(&fields[1])?, parse(&fields[2])?);
    let pixels = bytes.get(pos..).unwrap_or_default().to_vec();
    if pixels.len() != w * h {
        return Err(bad("pixel count does not match the header"));
    }
    Ok((w, h, pixels))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_saturation() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.pgm");
        write_pgm(&p, 3, 2, &[0.0, 5.0, 10.0, -1.0, 20.0, f64::NAN], 0.0, 10.0).unwrap();
        let (w, h, px) = read_pgm(&p).unwrap();
        assert_eq!((w, h), (3, 2));
        assert_eq!(px, vec![0, 128, 255, 0, 255, 0]);
    }
}
