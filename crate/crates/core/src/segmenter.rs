//! Whole-image segmentation by per-block mode dispatch.
//!
//! Every `block_size` x `block_size` tile runs an ordered cascade of
//! tests, falling through to the next only when the current one does not
//! apply:
//!
//! 1. **Flat** – all pixels equal; background iff some causal neighbor's
//!    background color is within `flat_tolerance`.
//! 2. **Smooth** – full least-squares fit predicts every pixel with error
//!    below `epsilon2`; the whole block is background.
//! 3. **Text over constant** – few distinct colors over a wide range;
//!    the dominant color consistent with a neighbor becomes background.
//! 4. **RANSAC** – robust fit; inliers become background when they cover
//!    more than `epsilon3` of the block, or unconditionally at the
//!    smallest block size.
//! 5. **Split** – otherwise the block divides into four quadrants and
//!    recurses until `min_block`.
//!
//! Causality: top-level blocks depend on their {left, top-left, top,
//! top-right} neighbors, so raster order is correct and the wavefront
//! `2*row + col` schedules independent blocks of one diagonal in
//! parallel. Sub-blocks consult only records finished before their
//! top-level block started, which keeps quadrants independent of their
//! siblings and the whole pass deterministic under any thread count.

use crate::basis::{cached_basis, BasisKind};
use crate::error::{Error, Result};
use crate::fitting::fit_least_squares;
use crate::mask::SegMask;
use crate::par;
use crate::ransac::{derive_seed, ransac_segment, RansacParams};
use crate::raster::{clamp_u8, Block, Raster};

/// Which of the five dispatch modes resolved a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Flat,
    Smooth,
    TextOverConstant,
    Ransac,
    Split,
}

impl Mode {
    pub const ALL: [Mode; 5] = [
        Mode::Flat,
        Mode::Smooth,
        Mode::TextOverConstant,
        Mode::Ransac,
        Mode::Split,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Flat => "flat",
            Mode::Smooth => "smooth",
            Mode::TextOverConstant => "text_over_constant",
            Mode::Ransac => "ransac",
            Mode::Split => "split",
        }
    }
}

/// Segmentation parameters. Defaults are the reference values for screen
/// content: 64-pixel blocks split down to 8, a 10-function DCT model,
/// smooth tolerance 3, RANSAC acceptance above half the block.
#[derive(Debug, Clone)]
pub struct SegConfig {
    pub block_size: usize,
    pub min_block: usize,
    /// Basis functions in the background model.
    pub k: usize,
    pub basis_kind: BasisKind,
    /// Max per-pixel residual for the smooth-block test.
    pub epsilon2: f64,
    /// Min inlier fraction for accepting a RANSAC segmentation.
    pub epsilon3: f64,
    /// Neighbor background-color tolerance for flat and
    /// text-over-constant decisions.
    pub flat_tolerance: f64,
    /// Max distinct colors for the text-over-constant mode.
    pub color_count_max: usize,
    /// Min intensity range for the text-over-constant mode.
    pub range_min: f64,
    /// Classification of a flat block with no processed neighbor
    /// (the top-left margin case).
    pub lonely_flat_is_background: bool,
    pub ransac: RansacParams,
}

impl Default for SegConfig {
    fn default() -> Self {
        Self {
            block_size: 64,
            min_block: 8,
            k: 10,
            basis_kind: BasisKind::Dct,
            epsilon2: 3.0,
            epsilon3: 0.5,
            flat_tolerance: 10.0,
            color_count_max: 10,
            range_min: 50.0,
            lonely_flat_is_background: true,
            ransac: RansacParams::default(),
        }
    }
}

impl SegConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_block == 0 || self.block_size < self.min_block {
            return Err(Error::Parameter(
                "block_size must be >= min_block >= 1".into(),
            ));
        }
        let ratio = self.block_size / self.min_block;
        if ratio * self.min_block != self.block_size || !ratio.is_power_of_two() {
            return Err(Error::Parameter(format!(
                "block_size {} must be min_block {} times a power of two",
                self.block_size, self.min_block
            )));
        }
        if self.k == 0 {
            return Err(Error::Parameter("k must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.epsilon3) {
            return Err(Error::Parameter(format!(
                "epsilon3 {} outside [0, 1]",
                self.epsilon3
            )));
        }
        self.ransac.validate()
    }
}

/// Per-block segmentation outcome, kept for neighbor decisions and for
/// the run report.
#[derive(Debug, Clone)]
pub struct BlockRecord {
    /// (row, col) of the block's top-left pixel.
    pub origin: (usize, usize),
    /// Actual (height, width) after clipping to the image.
    pub size: (usize, usize),
    /// Quad-tree cell size before clipping.
    pub nominal: usize,
    pub mode: Mode,
    /// Mean intensity of the block's background pixels, rounded; absent
    /// for all-foreground blocks.
    pub background_color: Option<f64>,
}

/// Append-only store of finished block records with a min-block-granular
/// index for neighbor lookups. Quad-tree cells are always unions of
/// min-block cells, so the index is exact.
pub struct RecordStore {
    min_block: usize,
    grid_w: usize,
    grid_h: usize,
    grid: Vec<Option<u32>>,
    records: Vec<BlockRecord>,
}

/// What the causal border of a block can see: whether any neighbor
/// finished at all, and the background colors of those that had one.
#[derive(Debug, Clone, Default)]
pub struct NeighborContext {
    pub any_processed: bool,
    pub colors: Vec<f64>,
}

impl RecordStore {
    pub fn new(image_width: usize, image_height: usize, min_block: usize) -> Self {
        let grid_w = image_width.div_ceil(min_block);
        let grid_h = image_height.div_ceil(min_block);
        Self {
            min_block,
            grid_w,
            grid_h,
            grid: vec![None; grid_w * grid_h],
            records: Vec::new(),
        }
    }

    pub fn records(&self) -> &[BlockRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<BlockRecord> {
        self.records
    }

    /// Inserts a finished record. Leaf records stamp the cells of their
    /// nominal extent; split parents do not (their children already did).
    pub fn insert(&mut self, rec: BlockRecord) {
        let idx = self.records.len() as u32;
        if rec.mode != Mode::Split {
            let (r0, c0) = rec.origin;
            let cell_r0 = r0 / self.min_block;
            let cell_c0 = c0 / self.min_block;
            let cell_r1 = (r0 + rec.nominal).div_ceil(self.min_block).min(self.grid_h);
            let cell_c1 = (c0 + rec.nominal).div_ceil(self.min_block).min(self.grid_w);
            for gr in cell_r0..cell_r1 {
                for gc in cell_c0..cell_c1 {
                    self.grid[gr * self.grid_w + gc] = Some(idx);
                }
            }
        }
        self.records.push(rec);
    }

    /// Background colors of finished blocks touching the query rect on
    /// its left, top-left, top, or top-right — the raster-causal sides.
    pub fn neighbor_backgrounds(&self, origin: (usize, usize), size: (usize, usize)) -> Vec<f64> {
        self.neighbor_context(origin, size).colors
    }

    pub fn neighbor_context(&self, origin: (usize, usize), size: (usize, usize)) -> NeighborContext {
        let (row0, col0) = origin;
        let (h, w) = size;
        let mut ctx = NeighborContext::default();
        let mut seen: Vec<u32> = Vec::new();
        let mut visit = |grid_idx: usize, ctx: &mut NeighborContext, seen: &mut Vec<u32>| {
            if let Some(idx) = self.grid[grid_idx] {
                ctx.any_processed = true;
                if !seen.contains(&idx) {
                    seen.push(idx);
                    if let Some(color) = self.records[idx as usize].background_color {
                        ctx.colors.push(color);
                    }
                }
            }
        };
        // Left border, including the top-left corner cell.
        if col0 > 0 {
            let gc = (col0 - 1) / self.min_block;
            let r_start = row0.saturating_sub(1);
            let r_end = (row0 + h - 1).min(self.grid_h * self.min_block - 1);
            for gr in (r_start / self.min_block)..=(r_end / self.min_block) {
                visit(gr * self.grid_w + gc, &mut ctx, &mut seen);
            }
        }
        // Top border, including the top-right corner cell.
        if row0 > 0 {
            let gr = (row0 - 1) / self.min_block;
            let c_end = (col0 + w).min(self.grid_w * self.min_block - 1);
            for gc in (col0 / self.min_block)..=(c_end / self.min_block) {
                visit(gr * self.grid_w + gc, &mut ctx, &mut seen);
            }
        }
        ctx
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlatDecision {
    AllBackground,
    AllForeground,
    NotFlat,
}

/// Mode-1 test. A flat block joins the background when some neighbor's
/// background color is within `tolerance`; with processed neighbors but no
/// close color it is foreground. A flat block with no processed neighbor
/// at all (first block of the image) defaults per `lonely_is_background`.
pub fn flat_check(
    block: &Block,
    neighbors: &NeighborContext,
    tolerance: f64,
    lonely_is_background: bool,
) -> FlatDecision {
    if !block.is_constant() {
        return FlatDecision::NotFlat;
    }
    if !neighbors.any_processed {
        return if lonely_is_background {
            FlatDecision::AllBackground
        } else {
            FlatDecision::AllForeground
        };
    }
    let value = block.pixels()[0];
    if neighbors.colors.iter().any(|c| (c - value).abs() < tolerance) {
        FlatDecision::AllBackground
    } else {
        FlatDecision::AllForeground
    }
}

#[derive(Debug, Clone)]
pub enum TextOverConstantDecision {
    Segmented {
        /// Foreground bits, row-major over the block.
        mask: Vec<bool>,
        background_color: f64,
    },
    NotApplicable,
}

/// Mode-3 test: applies only to blocks with at most `color_count_max`
/// distinct gray levels spanning more than `range_min`. Colors are ranked
/// by pixel share; the best one consistent with a neighbor background
/// becomes background, falling back to the top share when none is.
pub fn text_over_constant_check(
    block: &Block,
    neighbors: &NeighborContext,
    config: &SegConfig,
) -> TextOverConstantDecision {
    let hist = block.gray_histogram();
    let distinct = hist.iter().filter(|&&c| c > 0).count();
    if distinct > config.color_count_max || block.range() <= config.range_min {
        return TextOverConstantDecision::NotApplicable;
    }
    // (count desc, intensity asc) so ties resolve deterministically.
    let mut colors: Vec<(u32, u8)> = hist
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(v, &c)| (c, v as u8))
        .collect();
    colors.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let chosen = colors
        .iter()
        .find(|(_, v)| {
            let v = f64::from(*v);
            neighbors
                .colors
                .iter()
                .any(|c| (c - v).abs() < config.flat_tolerance)
        })
        .unwrap_or(&colors[0])
        .1;
    let mask = block
        .pixels()
        .iter()
        .map(|&p| clamp_u8(p) != chosen)
        .collect();
    TextOverConstantDecision::Segmented {
        mask,
        background_color: f64::from(chosen),
    }
}

/// Mean of the selected pixels, rounded to the nearest integer; `None`
/// when the selection is empty.
fn mean_color<'a>(values: impl Iterator<Item = &'a f64>) -> Option<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for v in values {
        sum += v;
        count += 1;
    }
    (count > 0).then(|| (sum / count as f64).round())
}

/// Output of one (sub-)block: foreground bits over its clipped rect plus
/// the records produced under it (children first, parent last).
pub struct BlockOutcome {
    pub fg: Vec<bool>,
    pub records: Vec<BlockRecord>,
}

/// Runs the mode cascade on the quad-tree cell at `(row0, col0)` with the
/// given nominal size, recursing on splits. The store is the snapshot of
/// blocks finished before this cell's top-level block started.
pub fn segment_block(
    raster: &Raster,
    row0: usize,
    col0: usize,
    nominal: usize,
    store: &RecordStore,
    config: &SegConfig,
) -> Result<BlockOutcome> {
    let block = raster
        .block(row0, col0, nominal, nominal)
        .ok_or_else(|| Error::Parameter(format!("cell ({row0},{col0}) outside image")))?;
    let (h, w) = (block.height(), block.width());
    let n_px = h * w;
    let neighbors = store.neighbor_context((row0, col0), (h, w));

    // 1: completely flat block.
    match flat_check(&block, &neighbors, config.flat_tolerance, config.lonely_flat_is_background) {
        FlatDecision::AllBackground => {
            let value = block.pixels()[0];
            return Ok(leaf(&block, vec![false; n_px], Mode::Flat, nominal, Some(value)));
        }
        FlatDecision::AllForeground => {
            return Ok(leaf(&block, vec![true; n_px], Mode::Flat, nominal, None));
        }
        FlatDecision::NotFlat => {}
    }

    // 2: smoothly varying background only. Tiny slivers get a complete
    // basis (k_eff = pixel count) and land here with zero residual.
    let k_eff = config.k.min(n_px);
    let basis = cached_basis(config.basis_kind, w, h, k_eff)?;
    let fit = fit_least_squares(&block, &basis)?;
    if fit.max_residual() < config.epsilon2 {
        let bg = mean_color(block.pixels().iter());
        return Ok(leaf(&block, vec![false; n_px], Mode::Smooth, nominal, bg));
    }

    // 3: text or graphics over constant background.
    if let TextOverConstantDecision::Segmented { mask, background_color } =
        text_over_constant_check(&block, &neighbors, config)
    {
        return Ok(leaf(&block, mask, Mode::TextOverConstant, nominal, Some(background_color)));
    }

    // 4: RANSAC. Accept above the inlier-fraction threshold, or always at
    // the smallest block size where splitting is no longer possible.
    let terminal = nominal <= config.min_block;
    let params = RansacParams {
        seed: block_seed(config.ransac.seed, row0, col0, nominal),
        ..config.ransac.clone()
    };
    match ransac_segment(&block, &basis, &params) {
        Ok(res) => {
            let fraction = res.consensus_size as f64 / n_px as f64;
            if fraction > config.epsilon3 || terminal {
                let fg: Vec<bool> = res.inlier_mask.iter().map(|&inl| !inl).collect();
                let bg = mean_color(
                    block
                        .pixels()
                        .iter()
                        .zip(&res.inlier_mask)
                        .filter_map(|(p, &inl)| inl.then_some(p)),
                );
                return Ok(leaf(&block, fg, Mode::Ransac, nominal, bg));
            }
        }
        Err(Error::NoModel) => {
            if terminal {
                // Unsegmentable at the smallest size: conservatively all
                // foreground.
                return Ok(leaf(&block, vec![true; n_px], Mode::Ransac, nominal, None));
            }
        }
        Err(e) => return Err(e),
    }

    // 5: quad-tree split.
    let half = nominal / 2;
    let mut fg = vec![false; n_px];
    let mut records = Vec::new();
    for (dr, dc) in [(0, 0), (0, half), (half, 0), (half, half)] {
        let (cr, cc) = (row0 + dr, col0 + dc);
        if cr >= row0 + h || cc >= col0 + w {
            continue; // quadrant entirely clipped away
        }
        let child = segment_block(raster, cr, cc, half, store, config)?;
        let ch = h.min(dr + half) - dr;
        let cw = w.min(dc + half) - dc;
        for r in 0..ch {
            fg[(dr + r) * w + dc..(dr + r) * w + dc + cw]
                .copy_from_slice(&child.fg[r * cw..(r + 1) * cw]);
        }
        records.extend(child.records);
    }
    let bg = mean_color(
        block
            .pixels()
            .iter()
            .zip(&fg)
            .filter_map(|(p, &f)| (!f).then_some(p)),
    );
    records.push(BlockRecord {
        origin: (row0, col0),
        size: (h, w),
        nominal,
        mode: Mode::Split,
        background_color: bg,
    });
    Ok(BlockOutcome { fg, records })
}

fn leaf(
    block: &Block,
    fg: Vec<bool>,
    mode: Mode,
    nominal: usize,
    background_color: Option<f64>,
) -> BlockOutcome {
    BlockOutcome {
        fg,
        records: vec![BlockRecord {
            origin: block.origin(),
            size: (block.height(), block.width()),
            nominal,
            mode,
            background_color,
        }],
    }
}

/// Stable per-block RANSAC seed: chained SplitMix64 over origin and size
/// so every quad-tree cell draws an independent, reproducible stream.
fn block_seed(seed: u64, row0: usize, col0: usize, nominal: usize) -> u64 {
    let s = derive_seed(seed, row0 as u64);
    let s = derive_seed(s, col0 as u64);
    derive_seed(s, nominal as u64)
}

/// Segments a whole image: tiles it into `block_size` cells, runs the
/// mode cascade per cell along the causal wavefront, and unions the
/// per-block masks. Returns the mask and one record per processed
/// (sub-)block.
pub fn segment_image(raster: &Raster, config: &SegConfig) -> Result<(SegMask, Vec<BlockRecord>)> {
    config.validate()?;
    let (width, height) = (raster.width(), raster.height());
    let bs = config.block_size;
    let cols = width.div_ceil(bs);
    let rows = height.div_ceil(bs);
    let mut store = RecordStore::new(width, height, config.min_block);
    let mut mask = SegMask::empty(width, height);

    // Blocks on one wavefront diagonal d = 2*row + col have all causal
    // neighbors on earlier diagonals, so they run in parallel against the
    // same store snapshot.
    let last_diag = 2 * (rows - 1) + (cols - 1);
    for d in 0..=last_diag {
        let group: Vec<(usize, usize)> = (0..rows)
            .filter_map(|br| {
                let rem = d.checked_sub(2 * br)?;
                (rem < cols).then_some((br, rem))
            })
            .collect();
        if group.is_empty() {
            continue;
        }
        let outcomes = par::map_slice(&group, |&(br, bc)| {
            segment_block(raster, br * bs, bc * bs, bs, &store, config)
        });
        for (&(br, bc), outcome) in group.iter().zip(outcomes) {
            let outcome = outcome?;
            let (row0, col0) = (br * bs, bc * bs);
            let h = bs.min(height - row0);
            let w = bs.min(width - col0);
            mask.blit(row0, col0, h, w, &outcome.fg);
            for rec in outcome.records {
                store.insert(rec);
            }
        }
    }
    Ok((mask, store.into_records()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::make_dct_basis;
    use crate::fitting::evaluate_model;
    use nalgebra::DVector;

    fn quick_config() -> SegConfig {
        SegConfig {
            block_size: 16,
            min_block: 4,
            k: 4,
            ransac: RansacParams {
                max_iters: 200,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn constant_image_is_all_background_flat() {
        let raster = Raster::filled(40, 24, 137).unwrap();
        let (mask, records) = segment_image(&raster, &quick_config()).unwrap();
        assert_eq!(mask.foreground_count(), 0);
        assert!(records.iter().all(|r| r.mode == Mode::Flat));
        assert!(records.iter().all(|r| r.background_color == Some(137.0)));
    }

    #[test]
    fn flat_neighbor_tolerance_decides_background() {
        // Two flat 16-blocks: 140 then 137 -> both background (|137-140| < 10).
        let mut data = vec![140u8; 16 * 32];
        for r in 0..16 {
            for c in 16..32 {
                data[r * 32 + c] = 137;
            }
        }
        let raster = Raster::new(32, 16, data).unwrap();
        let (mask, records) = segment_image(&raster, &quick_config()).unwrap();
        assert_eq!(mask.foreground_count(), 0);
        assert_eq!(records.len(), 2);

        // 140 then 20 -> the second flat block is far from every neighbor
        // background: foreground.
        let mut data = vec![140u8; 16 * 32];
        for r in 0..16 {
            for c in 16..32 {
                data[r * 32 + c] = 20;
            }
        }
        let raster = Raster::new(32, 16, data).unwrap();
        let (mask, records) = segment_image(&raster, &quick_config()).unwrap();
        assert_eq!(mask.foreground_count(), 16 * 16);
        assert_eq!(records[1].mode, Mode::Flat);
        assert_eq!(records[1].background_color, None);
    }

    #[test]
    fn all_foreground_neighbor_contributes_no_color() {
        let mut store = RecordStore::new(32, 32, 4);
        store.insert(BlockRecord {
            origin: (0, 0),
            size: (16, 16),
            nominal: 16,
            mode: Mode::Flat,
            background_color: None,
        });
        let ctx = store.neighbor_context((0, 16), (16, 16));
        assert!(ctx.any_processed);
        assert!(ctx.colors.is_empty());
        // A store with no records sees nothing at all.
        let fresh = RecordStore::new(32, 32, 4);
        let ctx = fresh.neighbor_context((0, 0), (16, 16));
        assert!(!ctx.any_processed && ctx.colors.is_empty());
    }

    #[test]
    fn smooth_gradient_goes_mode_two_without_ransac() {
        // Gentle diagonal gradient; the low per-block swing keeps the
        // model residual under epsilon2 even after quantization.
        let raster = Raster::from_fn(64, 64, |r, c| (r + c) as f64 * 200.0 / 126.0).unwrap();
        let config = SegConfig {
            block_size: 32,
            min_block: 8,
            k: 10,
            ..Default::default()
        };
        let (mask, records) = segment_image(&raster, &config).unwrap();
        assert_eq!(mask.foreground_count(), 0);
        assert!(records.iter().all(|r| r.mode == Mode::Smooth));
    }

    #[test]
    fn text_over_constant_example_percentages() {
        // 3 colors: 0 at 70%, 255 at 25%, 128 at 5%; neighbor background 2.
        let n = 16 * 16;
        let mut px = vec![0.0; n];
        for (i, p) in px.iter_mut().enumerate() {
            if i < n / 20 {
                *p = 128.0;
            } else if i < n / 20 + n / 4 {
                *p = 255.0;
            }
        }
        let block = Block::new(16, 16, (16, 16), px).unwrap();
        let neighbors = NeighborContext {
            any_processed: true,
            colors: vec![2.0],
        };
        let config = quick_config();
        let TextOverConstantDecision::Segmented { mask, background_color } =
            text_over_constant_check(&block, &neighbors, &config)
        else {
            panic!("expected segmentation");
        };
        assert_eq!(background_color, 0.0);
        let fg = mask.iter().filter(|&&b| b).count();
        assert_eq!(fg, n / 4 + n / 20); // 30% of pixels
    }

    #[test]
    fn text_over_constant_gates() {
        let config = quick_config();
        let no_neighbors = NeighborContext::default();
        // 40 distinct colors -> not applicable.
        let px: Vec<f64> = (0..256).map(|i| f64::from(i % 40) * 6.0).collect();
        let block = Block::new(16, 16, (0, 0), px).unwrap();
        assert!(matches!(
            text_over_constant_check(&block, &no_neighbors, &config),
            TextOverConstantDecision::NotApplicable
        ));
        // Range 30 < 50 -> not applicable.
        let px: Vec<f64> = (0..256)
            .map(|i| if i % 2 == 0 { 100.0 } else { 130.0 })
            .collect();
        let block = Block::new(16, 16, (0, 0), px).unwrap();
        assert!(matches!(
            text_over_constant_check(&block, &no_neighbors, &config),
            TextOverConstantDecision::NotApplicable
        ));
    }

    #[test]
    fn text_over_constant_falls_back_to_top_share() {
        // No neighbor is consistent with any color: highest share wins.
        let mut px = vec![200.0; 64];
        for p in px.iter_mut().take(20) {
            *p = 30.0;
        }
        let block = Block::new(8, 8, (0, 0), px).unwrap();
        let neighbors = NeighborContext {
            any_processed: true,
            colors: vec![100.0],
        };
        let TextOverConstantDecision::Segmented { background_color, mask } =
            text_over_constant_check(&block, &neighbors, &quick_config())
        else {
            panic!("expected segmentation");
        };
        assert_eq!(background_color, 200.0);
        assert_eq!(mask.iter().filter(|&&b| b).count(), 20);
    }

    #[test]
    fn split_resolves_disjoint_half_models() {
        // Left and right halves follow different smooth models far apart;
        // the full block fails RANSAC acceptance and splits into quadrants
        // that each pass the smooth test.
        let basis = make_dct_basis(32, 3).unwrap();
        let mut alpha_left = DVector::zeros(3);
        alpha_left[0] = 60.0 * 32.0;
        alpha_left[1] = 20.0;
        let mut alpha_right = DVector::zeros(3);
        alpha_right[0] = 190.0 * 32.0;
        alpha_right[2] = -20.0;
        let left = evaluate_model(&alpha_left, &basis).unwrap();
        let right = evaluate_model(&alpha_right, &basis).unwrap();
        let raster = Raster::from_fn(64, 32, |r, c| {
            if c < 32 {
                left[r * 32 + c]
            } else {
                right[r * 32 + (c - 32)]
            }
        })
        .unwrap();
        let config = SegConfig {
            block_size: 64,
            min_block: 16,
            k: 10,
            ransac: RansacParams {
                max_iters: 300,
                ..Default::default()
            },
            ..Default::default()
        };
        let (mask, records) = segment_image(&raster, &config).unwrap();
        assert_eq!(mask.foreground_count(), 0, "both halves are background");
        assert_eq!(records.last().unwrap().mode, Mode::Split);
        assert!(records
            .iter()
            .filter(|r| r.mode != Mode::Split)
            .all(|r| r.mode == Mode::Smooth));
    }

    #[test]
    fn leaf_records_tile_the_image_exactly() {
        let raster = Raster::from_fn(50, 38, |r, c| ((r * 7 + c * 13) % 251) as f64).unwrap();
        let config = quick_config();
        let (_, records) = segment_image(&raster, &config).unwrap();
        let mut paint = vec![0u8; 50 * 38];
        for rec in records.iter().filter(|r| r.mode != Mode::Split) {
            for r in 0..rec.size.0 {
                for c in 0..rec.size.1 {
                    paint[(rec.origin.0 + r) * 50 + rec.origin.1 + c] += 1;
                }
            }
        }
        assert!(paint.iter().all(|&p| p == 1), "every pixel assigned exactly once");
    }

    #[test]
    fn mode_precedence_guards_hold() {
        let raster = Raster::from_fn(48, 32, |r, c| {
            if (r / 5 + c / 7) % 3 == 0 {
                ((r * 11 + c * 17) % 256) as f64
            } else {
                ((r + c) % 200) as f64
            }
        })
        .unwrap();
        let config = quick_config();
        let (_, records) = segment_image(&raster, &config).unwrap();
        for rec in &records {
            let block = raster
                .block(rec.origin.0, rec.origin.1, rec.nominal, rec.nominal)
                .unwrap();
            let k_eff = config.k.min(block.len());
            let basis =
                cached_basis(config.basis_kind, block.width(), block.height(), k_eff).unwrap();
            let smooth =
                fit_least_squares(&block, &basis).unwrap().max_residual() < config.epsilon2;
            match rec.mode {
                Mode::Flat => assert!(block.is_constant()),
                Mode::Smooth => {
                    assert!(!block.is_constant());
                    assert!(smooth);
                }
                Mode::TextOverConstant | Mode::Ransac | Mode::Split => {
                    assert!(!block.is_constant());
                    assert!(!smooth, "earlier mode guard satisfied but skipped");
                }
            }
        }
    }

    #[test]
    fn record_background_colors_match_masks() {
        let raster = Raster::from_fn(32, 32, |r, c| {
            if r < 16 {
                50.0
            } else {
                ((c * 8) % 256) as f64
            }
        })
        .unwrap();
        let (mask, records) = segment_image(&raster, &quick_config()).unwrap();
        for rec in records.iter().filter(|r| r.mode != Mode::Split) {
            let mut bg_any = false;
            for r in 0..rec.size.0 {
                for c in 0..rec.size.1 {
                    if !mask.get(rec.origin.0 + r, rec.origin.1 + c) {
                        bg_any = true;
                    }
                }
            }
            assert_eq!(
                rec.background_color.is_some(),
                bg_any,
                "record at {:?}: color presence vs mask",
                rec.origin
            );
        }
    }

    #[test]
    fn pipeline_is_deterministic() {
        let raster = Raster::from_fn(48, 48, |r, c| ((r * r + c * 3) % 255) as f64).unwrap();
        let config = quick_config();
        let (m1, r1) = segment_image(&raster, &config).unwrap();
        let (m2, r2) = segment_image(&raster, &config).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(r1.len(), r2.len());
        for (a, b) in r1.iter().zip(&r2) {
            assert_eq!(a.origin, b.origin);
            assert_eq!(a.mode, b.mode);
            assert_eq!(a.background_color, b.background_color);
        }
    }
}
