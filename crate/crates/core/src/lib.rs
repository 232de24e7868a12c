//! Background/foreground segmentation of raster images by robust regression.
//!
//! The background of a screen-content or document image block is usually a
//! smoothly varying surface, while text and line graphics create sharp
//! discontinuities. This crate models the background of each block as a
//! linear combination of a few low-frequency basis functions (2-D DCT or
//! orthonormal polynomials) and classifies as foreground every pixel the
//! fitted model cannot predict within an adaptive threshold.
//!
//! Pipeline stages:
//!
//! 1. **basis** – orthonormal 2-D DCT / polynomial design matrices in
//!    zigzag frequency order.
//! 2. **fitting** – least-squares projection of block pixels onto a basis,
//!    full-block or restricted to a pixel subset.
//! 3. **ransac** – robust fit by random minimal sample sets; the largest
//!    consensus set becomes the background.
//! 4. **segmenter** – per-block mode dispatch (flat / smooth /
//!    text-over-constant / RANSAC / quad-tree split) over a whole image
//!    with neighbor-aware background-color decisions.
//! 5. **sparse** – alternative detector: L1 sparse decomposition of a
//!    block into a smooth part plus a sparse outlier component.
//! 6. **baseline** – hierarchical 2-means clustering segmenter used for
//!    comparison.
//!
//! Block-level work is data parallel. With the default `parallel` feature
//! the hot loops run on rayon; disabling it yields a dependency-free
//! sequential build that produces bit-identical results.

pub mod baseline;
pub mod basis;
pub mod error;
pub mod fitting;
pub mod mask;
pub mod metrics;
mod par;
pub mod pnm;
pub mod ransac;
pub mod raster;
pub mod report;
pub mod segmenter;
pub mod sparse;
pub mod synthgen;

pub use error::{Error, Result};
pub use mask::SegMask;
pub use raster::{Block, Raster};
