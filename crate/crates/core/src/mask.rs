//! Binary foreground maps and connected-component post-processing.

use crate::error::{Error, Result};

/// One boolean per image pixel; `true` marks foreground.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl SegMask {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Self {
        assert_eq!(bits.len(), width * height, "mask bits must cover the image");
        Self { width, height, bits }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, fg: bool) {
        self.bits[row * self.width + col] = fg;
    }

    /// Copies a window of bits into this mask at `(row0, col0)`.
    pub fn blit(&mut self, row0: usize, col0: usize, height: usize, width: usize, bits: &[bool]) {
        debug_assert_eq!(bits.len(), width * height);
        for r in 0..height {
            let dst = (row0 + r) * self.width + col0;
            self.bits[dst..dst + width].copy_from_slice(&bits[r * width..(r + 1) * width]);
        }
    }

    pub fn foreground_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn foreground_fraction(&self) -> f64 {
        self.foreground_count() as f64 / self.bits.len() as f64
    }

    /// Pixels on which the two masks disagree.
    pub fn hamming(&self, other: &SegMask) -> Result<usize> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch(format!(
                "mask {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(self
            .bits
            .iter()
            .zip(&other.bits)
            .filter(|(a, b)| a != b)
            .count())
    }
}

/// One 8-connected foreground component.
#[derive(Debug, Clone)]
struct Component {
    /// Raster-order index of the first pixel encountered; stable tie-breaker.
    anchor: usize,
    pixels: Vec<usize>,
}

/// Keeps only the `keep` largest 8-connected foreground components
/// (ties broken by earlier raster-order anchor); all other foreground
/// pixels are cleared.
pub fn postprocess_largest_components(mask: &SegMask, keep: usize) -> Result<SegMask> {
    if keep == 0 {
        return Err(Error::Parameter("keep must be >= 1".into()));
    }
    let mut components = label_components(mask);
    components.sort_by(|a, b| b.pixels.len().cmp(&a.pixels.len()).then(a.anchor.cmp(&b.anchor)));
    let mut out = SegMask::empty(mask.width(), mask.height());
    for comp in components.iter().take(keep) {
        for &idx in &comp.pixels {
            out.bits[idx] = true;
        }
    }
    Ok(out)
}

fn label_components(mask: &SegMask) -> Vec<Component> {
    let (w, h) = (mask.width(), mask.height());
    let mut seen = vec![false; w * h];
    let mut components = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !mask.bits[start] || seen[start] {
            continue;
        }
        let mut pixels = Vec::new();
        seen[start] = true;
        stack.push(start);
        while let Some(idx) = stack.pop() {
            pixels.push(idx);
            let (r, c) = (idx / w, idx % w);
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    if dr == 0 && dc == 0 {
                        continue;
                    }
                    let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                    if nr < 0 || nc < 0 || nr >= h as i64 || nc >= w as i64 {
                        continue;
                    }
                    let nidx = nr as usize * w + nc as usize;
                    if mask.bits[nidx] && !seen[nidx] {
                        seen[nidx] = true;
                        stack.push(nidx);
                    }
                }
            }
        }
        components.push(Component { anchor: start, pixels });
    }
    components
}

/// Number of 8-connected foreground components.
pub fn component_count(mask: &SegMask) -> usize {
    label_components(mask).len()
}
