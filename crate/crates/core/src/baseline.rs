//! Hierarchical 2-means clustering segmenter, the comparison baseline.
//!
//! Clustering runs on raw intensities, so it works well when foreground
//! and background are well separated but splits any background with a
//! large dynamic range into spurious clusters — the failure mode the
//! regression approach is built to avoid.
//!
//! The hierarchy follows the multi-resolution scheme of document codecs:
//! 2-means on coarse blocks first, centroids passed down as the initial
//! colors of the nested finer blocks, each stage keeping a weighted
//! average of its own estimate and its parent's. The darker centroid is
//! labeled foreground.

use crate::error::{Error, Result};
use crate::mask::SegMask;
use crate::par;
use crate::raster::{Block, Raster};

/// Foreground/background intensity centroids of one block at one level.
#[derive(Debug, Clone, Copy)]
pub struct ClusterState {
    pub fg_color: f64,
    pub bg_color: f64,
    pub level: usize,
}

#[derive(Debug, Clone)]
pub struct Kmeans2Result {
    pub fg_color: f64,
    pub bg_color: f64,
    /// `true` where the pixel sits closer to the foreground centroid.
    pub fg_mask: Vec<bool>,
    /// Single-cluster outcome (fewer than two distinct values, no init).
    pub degenerate: bool,
    /// Within-cluster sum of squares after each Lloyd iteration.
    pub sse_trace: Vec<f64>,
}

/// Lloyd's algorithm with k=2 on 1-D intensities, run until assignments
/// stabilize or the budget runs out. Without an initial pair the extreme
/// values seed the clusters; the darker cluster is foreground. A constant
/// block without init degenerates to a single all-background cluster.
pub fn kmeans2(block: &Block, init: Option<(f64, f64)>, max_iters: usize) -> Kmeans2Result {
    let px = block.pixels();
    let (lo, hi) = block.min_max();
    let (mut fg, mut bg) = match init {
        Some(pair) => pair,
        None => {
            if lo == hi {
                return Kmeans2Result {
                    fg_color: lo,
                    bg_color: lo,
                    fg_mask: vec![false; px.len()],
                    degenerate: true,
                    sse_trace: Vec::new(),
                };
            }
            (lo, hi)
        }
    };
    let mut assign = vec![false; px.len()];
    let mut trace = Vec::new();
    for _ in 0..max_iters {
        // Assign to the nearer centroid; ties go to the background.
        let mut changed = false;
        let mut sums = [0.0f64; 2];
        let mut counts = [0usize; 2];
        let mut sse = 0.0;
        for (i, &p) in px.iter().enumerate() {
            let df = (p - fg).abs();
            let db = (p - bg).abs();
            let is_fg = df < db;
            if assign[i] != is_fg {
                changed = true;
                assign[i] = is_fg;
            }
            let cluster = usize::from(is_fg);
            sums[cluster] += p;
            counts[cluster] += 1;
            let d = if is_fg { df } else { db };
            sse += d * d;
        }
        trace.push(sse);
        // Empty clusters keep their color.
        if counts[1] > 0 {
            fg = sums[1] / counts[1] as f64;
        }
        if counts[0] > 0 {
            bg = sums[0] / counts[0] as f64;
        }
        if !changed && trace.len() > 1 {
            break;
        }
    }
    Kmeans2Result {
        fg_color: fg,
        bg_color: bg,
        fg_mask: assign,
        degenerate: false,
        sse_trace: trace,
    }
}

/// Within-cluster sum of squares of a finished result.
pub fn within_cluster_sse(block: &Block, result: &Kmeans2Result) -> f64 {
    block
        .pixels()
        .iter()
        .zip(&result.fg_mask)
        .map(|(&p, &is_fg)| {
            let c = if is_fg { result.fg_color } else { result.bg_color };
            (p - c) * (p - c)
        })
        .sum()
}

const LLOYD_BUDGET: usize = 100;

/// Multi-resolution 2-means over descending block sizes. Each finer level
/// starts from its parent's colors and stores
/// `blend * current + (1 - blend) * parent`; the mask comes from the
/// finest level's assignments.
pub fn hierarchical_segment(raster: &Raster, levels: &[usize], blend: f64) -> Result<SegMask> {
    if levels.is_empty() {
        return Err(Error::Parameter("levels must be nonempty".into()));
    }
    if levels.iter().any(|&l| l == 0) {
        return Err(Error::Parameter("level sizes must be nonzero".into()));
    }
    for pair in levels.windows(2) {
        if pair[0] % pair[1] != 0 || pair[1] > pair[0] {
            return Err(Error::Parameter(format!(
                "level {} must divide its predecessor {}",
                pair[1], pair[0]
            )));
        }
    }
    if !(0.0..=1.0).contains(&blend) {
        return Err(Error::Parameter(format!("blend {blend} outside [0, 1]")));
    }

    let (width, height) = (raster.width(), raster.height());
    let mut mask = SegMask::empty(width, height);
    // (cols, states) of the previous level for parent lookups.
    let mut parent: Option<(usize, usize, Vec<ClusterState>)> = None;

    for (level, &bs) in levels.iter().enumerate() {
        let cols = width.div_ceil(bs);
        let rows = height.div_ceil(bs);
        let tiles: Vec<(usize, usize)> = (0..rows)
            .flat_map(|br| (0..cols).map(move |bc| (br, bc)))
            .collect();
        let last = level == levels.len() - 1;
        let results = par::map_slice(&tiles, |&(br, bc)| {
            let block = raster
                .block(br * bs, bc * bs, bs, bs)
                .expect("tile inside image");
            let init = parent.as_ref().map(|(pbs, pcols, states)| {
                let state = states[(br * bs / pbs) * pcols + (bc * bs / pbs)];
                (state.fg_color, state.bg_color)
            });
            let result = kmeans2(&block, init, LLOYD_BUDGET);
            let (fg, bg) = match init {
                Some((pfg, pbg)) if !result.degenerate => (
                    blend * result.fg_color + (1.0 - blend) * pfg,
                    blend * result.bg_color + (1.0 - blend) * pbg,
                ),
                Some((pfg, pbg)) => (pfg, pbg),
                None => (result.fg_color, result.bg_color),
            };
            (
                ClusterState {
                    fg_color: fg,
                    bg_color: bg,
                    level,
                },
                block,
                result,
            )
        });

        let mut states = Vec::with_capacity(results.len());
        for ((br, bc), (state, block, result)) in tiles.iter().zip(results) {
            if last {
                mask.blit(
                    br * bs,
                    bc * bs,
                    block.height(),
                    block.width(),
                    &result.fg_mask,
                );
            }
            states.push(state);
        }
        parent = Some((bs, cols, states));
    }
    Ok(mask)
}

/// Default resolution ladder for the baseline.
pub const DEFAULT_LEVELS: [usize; 4] = [64, 32, 16, 8];
pub const DEFAULT_BLEND: f64 = 0.5;

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bimodal_block_splits_exactly() {
        let px: Vec<f64> = (0..64).map(|i| if i % 3 == 0 { 0.0 } else { 255.0 }).collect();
        let block = Block::square(8, px.clone()).unwrap();
        let res = kmeans2(&block, None, 50);
        assert_eq!(res.fg_color, 0.0);
        assert_eq!(res.bg_color, 255.0);
        for (i, &is_fg) in res.fg_mask.iter().enumerate() {
            assert_eq!(is_fg, px[i] == 0.0);
        }
    }

    #[test]
    fn constant_block_degenerates_to_background() {
        let block = Block::constant(8, 8, 99.0).unwrap();
        let res = kmeans2(&block, None, 50);
        assert!(res.degenerate);
        assert!(res.fg_mask.iter().all(|&b| !b));
        assert_eq!(res.fg_color, 99.0);
        assert_eq!(res.bg_color, 99.0);
    }

    #[test]
    fn sse_matches_exhaustive_threshold_oracle() {
        // Optimal 1-D 2-means is a threshold partition, so scanning every
        // cut of the sorted values gives the global optimum.
        for seed in 0..50u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let px: Vec<f64> = (0..64).map(|_| rng.gen_range(0..=255) as f64).collect();
            let block = Block::square(8, px.clone()).unwrap();
            let res = kmeans2(&block, None, 200);
            let sse = within_cluster_sse(&block, &res);

            let mut sorted = px.clone();
            sorted.sort_by(f64::total_cmp);
            let mut best = f64::INFINITY;
            for cut in 1..sorted.len() {
                if sorted[cut] == sorted[cut - 1] {
                    continue;
                }
                let (a, b) = sorted.split_at(cut);
                best = best.min(group_sse(a) + group_sse(b));
            }
            assert!(
                sse <= best + 1e-6,
                "seed {seed}: lloyd {sse} vs oracle {best}"
            );
        }
    }

    fn group_sse(vals: &[f64]) -> f64 {
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        vals.iter().map(|v| (v - mean) * (v - mean)).sum()
    }

    #[test]
    fn sse_non_increasing_across_iterations() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let px: Vec<f64> = (0..256).map(|_| rng.gen_range(0..=255) as f64).collect();
        let block = Block::new(16, 16, (0, 0), px).unwrap();
        let res = kmeans2(&block, None, 200);
        for w in res.sse_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "lloyd objective increased");
        }
    }

    #[test]
    fn pixel_order_does_not_change_the_mask() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let px: Vec<f64> = (0..64).map(|_| rng.gen_range(0..=255) as f64).collect();
        let block = Block::square(8, px.clone()).unwrap();
        let res = kmeans2(&block, None, 200);

        // Reverse the pixel order, cluster, and map the mask back.
        let reversed: Vec<f64> = px.iter().rev().cloned().collect();
        let rev_block = Block::square(8, reversed).unwrap();
        let rev = kmeans2(&rev_block, None, 200);
        let mapped: Vec<bool> = rev.fg_mask.iter().rev().cloned().collect();
        assert_eq!(res.fg_mask, mapped);
    }

    #[test]
    fn hierarchical_constant_image_is_background() {
        let raster = Raster::filled(80, 48, 200).unwrap();
        let mask = hierarchical_segment(&raster, &[16, 8, 4], 0.5).unwrap();
        assert_eq!(mask.foreground_count(), 0);
    }

    #[test]
    fn hierarchical_finds_high_contrast_text() {
        // Dark strokes on a flat bright background.
        let mut raster = Raster::filled(64, 64, 220).unwrap();
        let mut truth = SegMask::empty(64, 64);
        for r in (8..56).step_by(12) {
            for c in 10..54 {
                raster.set(r, c, 15);
                truth.set(r, c, true);
            }
        }
        let mask = hierarchical_segment(&raster, &[16, 8], 0.5).unwrap();
        let m = crate::metrics::compute_metrics(&mask, &truth).unwrap();
        assert!(m.f1 >= 0.9, "baseline should handle the easy case, f1={}", m.f1);
    }

    #[test]
    fn level_validation() {
        let raster = Raster::filled(16, 16, 10).unwrap();
        assert!(hierarchical_segment(&raster, &[], 0.5).is_err());
        assert!(hierarchical_segment(&raster, &[16, 6], 0.5).is_err());
        assert!(hierarchical_segment(&raster, &[16, 8], 1.5).is_err());
    }
}
