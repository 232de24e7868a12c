//! Grayscale rasters and the block windows cut from them.

use crate::error::{Error, Result};

/// An 8-bit grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl Raster {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Parameter("raster dimensions must be nonzero".into()));
        }
        if data.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "raster {}x{} needs {} samples, got {}",
                width,
                height,
                width * height,
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    /// Builds a raster by evaluating `f(row, col)`; values are clamped to `[0, 255]`.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                data.push(clamp_u8(f(r, c)));
            }
        }
        Self::new(width, height, data)
    }

    /// Converts interleaved RGB samples to luma with ITU-R BT.601 weights.
    pub fn from_rgb(width: usize, height: usize, rgb: &[u8]) -> Result<Self> {
        if rgb.len() != width * height * 3 {
            return Err(Error::DimensionMismatch(format!(
                "rgb raster {}x{} needs {} samples, got {}",
                width,
                height,
                width * height * 3,
                rgb.len()
            )));
        }
        let data = rgb
            .chunks_exact(3)
            .map(|p| luma601(p[0], p[1], p[2]))
            .collect();
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        debug_assert!(row < self.height && col < self.width);
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: u8) {
        debug_assert!(row < self.height && col < self.width);
        self.data[row * self.width + col] = value;
    }

    /// Cuts the window at `(row0, col0)` with the given extent, clipped to
    /// the image. Returns `None` when the window lies entirely outside.
    pub fn block(&self, row0: usize, col0: usize, height: usize, width: usize) -> Option<Block> {
        if row0 >= self.height || col0 >= self.width {
            return None;
        }
        let h = height.min(self.height - row0);
        let w = width.min(self.width - col0);
        if h == 0 || w == 0 {
            return None;
        }
        let mut pixels = Vec::with_capacity(h * w);
        for r in 0..h {
            let base = (row0 + r) * self.width + col0;
            pixels.extend(self.data[base..base + w].iter().map(|&v| f64::from(v)));
        }
        Some(Block {
            width: w,
            height: h,
            origin: (row0, col0),
            pixels,
        })
    }
}

/// BT.601 luma, rounded to nearest integer.
#[inline]
pub fn luma601(r: u8, g: u8, b: u8) -> u8 {
    let y = 0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b);
    clamp_u8(y)
}

#[inline]
pub fn clamp_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// A rectangular window of intensities with its position in the source
/// image. Pixels are stored row-major as reals so fractional thresholds
/// and residuals never round.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    width: usize,
    height: usize,
    /// (row, col) of the top-left pixel in the source image.
    origin: (usize, usize),
    pixels: Vec<f64>,
}

impl Block {
    pub fn new(width: usize, height: usize, origin: (usize, usize), pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Parameter("block dimensions must be nonzero".into()));
        }
        if pixels.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "block {}x{} needs {} pixels, got {}",
                width,
                height,
                width * height,
                pixels.len()
            )));
        }
        if let Some(bad) = pixels.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 255.0) {
            return Err(Error::Parameter(format!("intensity {bad} outside [0, 255]")));
        }
        Ok(Self {
            width,
            height,
            origin,
            pixels,
        })
    }

    /// Square block at origin (0, 0); the common case in tests.
    pub fn square(n: usize, pixels: Vec<f64>) -> Result<Self> {
        Self::new(n, n, (0, 0), pixels)
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, (0, 0), vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn origin(&self) -> (usize, usize) {
        self.origin
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    /// (min, max) intensity.
    pub fn min_max(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in &self.pixels {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    /// Intensity range `max - min`.
    pub fn range(&self) -> f64 {
        let (lo, hi) = self.min_max();
        hi - lo
    }

    pub fn is_constant(&self) -> bool {
        self.pixels.windows(2).all(|w| w[0] == w[1])
    }

    /// Histogram over the 256 integer gray levels. Intensities coming from
    /// rasters are integral; synthetic values are binned by rounding.
    pub fn gray_histogram(&self) -> [u32; 256] {
        let mut hist = [0u32; 256];
        for &v in &self.pixels {
            hist[clamp_u8(v) as usize] += 1;
        }
        hist
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_extraction_clips_to_image() {
        let r = Raster::from_fn(10, 6, |row, col| (row * 10 + col) as f64).unwrap();
        let b = r.block(4, 8, 4, 4).unwrap();
        assert_eq!(b.height(), 2);
        assert_eq!(b.width(), 2);
        assert_eq!(b.origin(), (4, 8));
        assert_eq!(b.pixels(), &[48.0, 49.0, 58.0, 59.0]);
        assert!(r.block(6, 0, 4, 4).is_none());
    }

    #[test]
    fn block_rejects_out_of_gamut_pixels() {
        assert!(Block::square(2, vec![0.0, 1.0, 2.0, 256.0]).is_err());
        assert!(Block::square(2, vec![0.0, 1.0, 2.0, -0.5]).is_err());
        assert!(Block::square(2, vec![0.0, 1.0, 2.0, 3.0]).is_ok());
    }

    #[test]
    fn luma_conversion_is_bt601() {
        assert_eq!(luma601(255, 255, 255), 255);
        assert_eq!(luma601(0, 0, 0), 0);
        // 0.299*255 = 76.245 -> 76
        assert_eq!(luma601(255, 0, 0), 76);
        assert_eq!(luma601(0, 255, 0), 150);
        assert_eq!(luma601(0, 0, 255), 29);
    }

    #[test]
    fn constant_detection() {
        let b = Block::constant(3, 2, 17.0).unwrap();
        assert!(b.is_constant());
        assert_eq!(b.range(), 0.0);
        let mut px = vec![17.0; 6];
        px[5] = 18.0;
        assert!(!Block::new(3, 2, (0, 0), px).unwrap().is_constant());
    }
}
