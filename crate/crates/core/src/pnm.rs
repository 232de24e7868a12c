//! Minimal PGM/PPM reader and writer.
//!
//! Supports the P2/P5 grayscale and P3/P6 color formats with maxval up to
//! 255. Masks are written as binary PGM with 0 = background and
//! 255 = foreground so golden files stay bit-exact across platforms.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mask::SegMask;
use crate::raster::Raster;

/// A decoded PNM file: either grayscale or interleaved RGB.
#[derive(Debug, Clone)]
pub enum PnmImage {
    Gray(Raster),
    Rgb {
        width: usize,
        height: usize,
        data: Vec<u8>,
    },
}

impl PnmImage {
    /// Grayscale view of the image; RGB converts through BT.601 luma.
    pub fn to_luma(&self) -> Result<Raster> {
        match self {
            PnmImage::Gray(r) => Ok(r.clone()),
            PnmImage::Rgb { width, height, data } => Raster::from_rgb(*width, *height, data),
        }
    }
}

pub fn read_pnm(path: &Path) -> Result<PnmImage> {
    let bytes = fs::read(path)?;
    decode(&bytes)
}

pub fn decode(bytes: &[u8]) -> Result<PnmImage> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.token()?;
    let (color, ascii) = match magic.as_slice() {
        b"P2" => (false, true),
        b"P5" => (false, false),
        b"P3" => (true, true),
        b"P6" => (true, false),
        other => {
            return Err(Error::Pnm(format!(
                "unsupported magic {:?}",
                String::from_utf8_lossy(other)
            )))
        }
    };
    let width = cur.number()? as usize;
    let height = cur.number()? as usize;
    let maxval = cur.number()?;
    if width == 0 || height == 0 {
        return Err(Error::Pnm("zero image dimension".into()));
    }
    if maxval == 0 || maxval > 255 {
        return Err(Error::Pnm(format!("unsupported maxval {maxval} (need 1..=255)")));
    }
    let samples = width * height * if color { 3 } else { 1 };
    let mut data = Vec::with_capacity(samples);
    if ascii {
        for _ in 0..samples {
            let v = cur.number()?;
            if v > maxval {
                return Err(Error::Pnm(format!("sample {v} exceeds maxval {maxval}")));
            }
            data.push(rescale(v, maxval));
        }
    } else {
        // Binary payload starts after exactly one whitespace byte.
        cur.expect_single_whitespace()?;
        let raw = cur.rest();
        if raw.len() < samples {
            return Err(Error::Pnm(format!(
                "truncated payload: need {samples} bytes, got {}",
                raw.len()
            )));
        }
        data.extend(raw[..samples].iter().map(|&v| rescale(u32::from(v), maxval)));
    }
    if color {
        Ok(PnmImage::Rgb { width, height, data })
    } else {
        Ok(PnmImage::Gray(Raster::new(width, height, data)?))
    }
}

fn rescale(v: u32, maxval: u32) -> u8 {
    if maxval == 255 {
        v as u8
    } else {
        ((v * 255 + maxval / 2) / maxval) as u8
    }
}

pub fn write_pgm(path: &Path, raster: &Raster) -> Result<()> {
    let mut out = Vec::with_capacity(raster.data().len() + 32);
    write!(out, "P5\n{} {}\n255\n", raster.width(), raster.height())?;
    out.extend_from_slice(raster.data());
    fs::write(path, out)?;
    Ok(())
}

pub fn write_ppm(path: &Path, width: usize, height: usize, rgb: &[u8]) -> Result<()> {
    if rgb.len() != width * height * 3 {
        return Err(Error::DimensionMismatch(format!(
            "ppm payload needs {} bytes, got {}",
            width * height * 3,
            rgb.len()
        )));
    }
    let mut out = Vec::with_capacity(rgb.len() + 32);
    write!(out, "P6\n{width} {height}\n255\n")?;
    out.extend_from_slice(rgb);
    fs::write(path, out)?;
    Ok(())
}

/// Writes a foreground mask as binary PGM (0 = background, 255 = foreground).
pub fn write_mask(path: &Path, mask: &SegMask) -> Result<()> {
    let raster = Raster::new(
        mask.width(),
        mask.height(),
        mask.bits().iter().map(|&fg| if fg { 255 } else { 0 }).collect(),
    )?;
    write_pgm(path, &raster)
}

/// Reads a mask back from PGM; any nonzero sample counts as foreground.
pub fn read_mask(path: &Path) -> Result<SegMask> {
    match read_pnm(path)? {
        PnmImage::Gray(r) => Ok(SegMask::from_bits(
            r.width(),
            r.height(),
            r.data().iter().map(|&v| v != 0).collect(),
        )),
        PnmImage::Rgb { .. } => Err(Error::Pnm("mask must be grayscale".into())),
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_ws_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<Vec<u8>> {
        self.skip_ws_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Pnm("unexpected end of header".into()));
        }
        Ok(self.bytes[start..self.pos].to_vec())
    }

    fn number(&mut self) -> Result<u32> {
        let tok = self.token()?;
        std::str::from_utf8(&tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| {
                Error::Pnm(format!(
                    "expected integer, got {:?}",
                    String::from_utf8_lossy(&tok)
                ))
            })
    }

    fn expect_single_whitespace(&mut self) -> Result<()> {
        if self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::Pnm("missing whitespace before binary payload".into()))
        }
    }

    fn rest(&self) -> &[u8] {
        &self.bytes[self.pos..]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ascii_pgm_with_comments() {
        let src = b"P2\n# a comment\n3 2\n# another\n255\n0 10 20\n30 40 50\n";
        let img = decode(src).unwrap();
        let PnmImage::Gray(r) = img else { panic!("expected gray") };
        assert_eq!((r.width(), r.height()), (3, 2));
        assert_eq!(r.data(), &[0, 10, 20, 30, 40, 50]);
    }

    #[test]
    fn binary_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.pgm");
        let r = Raster::from_fn(5, 4, |row, col| (row * 37 + col * 11) as f64).unwrap();
        write_pgm(&path, &r).unwrap();
        let back = read_pnm(&path).unwrap().to_luma().unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn maxval_rescales() {
        let src = b"P2 2 1 7\n0 7\n";
        let PnmImage::Gray(r) = decode(src).unwrap() else { panic!() };
        assert_eq!(r.data(), &[0, 255]);
    }

    #[test]
    fn rejects_16_bit_and_bad_magic() {
        assert!(decode(b"P5 2 2 65535\n").is_err());
        assert!(decode(b"P7 2 2 255\n").is_err());
        assert!(decode(b"P5 2 2 255\n\x00\x01").is_err()); // truncated
    }

    #[test]
    fn ppm_to_luma() {
        let src = b"P3 1 1 255\n255 0 0\n";
        let img = decode(src).unwrap();
        assert_eq!(img.to_luma().unwrap().data(), &[76]);
    }
}
