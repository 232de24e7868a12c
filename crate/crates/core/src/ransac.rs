//! RANSAC robust fit of a smooth model to one block.
//!
//! Each iteration draws a minimal sample set of `k` distinct pixels
//! (`k` = basis count), interpolates the model through them, and counts
//! the pixels predicted within an adaptive threshold. The largest
//! consensus set wins; its pixels are background, the rest foreground.
//!
//! Reproducibility contract: iteration `i` derives its generator as
//! `ChaCha8Rng::seed_from_u64(derive_seed(params.seed, i))` and draws its
//! sample with Floyd's algorithm using multiply-shift bounding
//! (`(x * n) >> 64`). The mapping from `(seed, iteration)` to a sample
//! depends on nothing else, so iterations can be evaluated in parallel
//! and masks are stable for a given crate version.

use nalgebra::DVector;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::basis::BasisSet;
use crate::error::{Error, Result};
use crate::fitting::solve_subset;
use crate::par;
use crate::raster::Block;

/// Chunk width used when an early-exit threshold is set; the stop check
/// runs on chunk boundaries so results stay schedule-independent.
const EARLY_EXIT_CHUNK: usize = 128;

#[derive(Debug, Clone)]
pub struct RansacParams {
    /// Iteration budget M.
    pub max_iters: usize,
    /// Base inlier threshold in intensity units.
    pub epsilon_intercept: f64,
    /// Coefficient on the block intensity range.
    pub epsilon_slope: f64,
    pub seed: u64,
    /// Re-estimate the model over all inliers of the winning set and
    /// recompute the mask against the refit model.
    pub refit: bool,
    /// Stop after a chunk of iterations once the consensus covers this
    /// fraction of the block. Off by default: the reference behavior runs
    /// the fixed budget.
    pub early_exit_fraction: Option<f64>,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            epsilon_intercept: 1.0,
            epsilon_slope: 0.22,
            seed: 0,
            refit: true,
            early_exit_fraction: None,
        }
    }
}

impl RansacParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::Parameter("max_iters must be >= 1".into()));
        }
        if self.epsilon_intercept < 0.0 || self.epsilon_slope < 0.0 {
            return Err(Error::Parameter("epsilon terms must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RansacResult {
    pub alpha: DVector<f64>,
    /// `true` marks background (inlier) pixels, row-major over the block.
    pub inlier_mask: Vec<bool>,
    pub consensus_size: usize,
    pub iterations_run: usize,
    pub epsilon_used: f64,
}

/// Adaptive inlier threshold `intercept + slope * R` where `R` is the
/// intensity range of the block.
pub fn adaptive_epsilon(block: &Block, params: &RansacParams) -> f64 {
    params.epsilon_intercept + params.epsilon_slope * block.range()
}

/// Smallest iteration count M with `(1 - w^k)^M <= failure_prob`, for
/// inlier ratio `w` and minimal sample size `k`.
pub fn required_iterations(
    inlier_ratio: f64,
    model_size: usize,
    failure_prob: f64,
) -> Result<usize> {
    if !(inlier_ratio > 0.0 && inlier_ratio < 1.0) {
        return Err(Error::Parameter(format!(
            "inlier ratio {inlier_ratio} outside (0, 1)"
        )));
    }
    if !(failure_prob > 0.0 && failure_prob < 1.0) {
        return Err(Error::Parameter(format!(
            "failure probability {failure_prob} outside (0, 1)"
        )));
    }
    if model_size == 0 {
        return Err(Error::Parameter("model size must be >= 1".into()));
    }
    let wk = inlier_ratio.powi(model_size.try_into().unwrap_or(i32::MAX));
    if wk <= 0.0 {
        return Err(Error::UnreachableConfidence);
    }
    let m = (failure_prob.ln() / (-wk).ln_1p()).ceil();
    if !m.is_finite() || m > 1e18 {
        return Err(Error::UnreachableConfidence);
    }
    Ok((m as usize).max(1))
}

/// SplitMix64 finalizer; the documented mixer for all derived seeds.
pub(crate) fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable seed derivation for a salted stream.
pub(crate) fn derive_seed(seed: u64, salt: u64) -> u64 {
    splitmix64(seed ^ splitmix64(salt))
}

#[inline]
fn bounded(x: u64, n: u64) -> u64 {
    ((u128::from(x) * u128::from(n)) >> 64) as u64
}

/// Floyd's algorithm: `k` distinct indices in `0..n`, order-sensitive in
/// the RNG stream.
fn floyd_sample(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    debug_assert!(k <= n);
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    for j in (n - k)..n {
        let t = bounded(rng.next_u64(), j as u64 + 1) as usize;
        if chosen.contains(&t) {
            chosen.push(j);
        } else {
            chosen.push(t);
        }
    }
    chosen
}

/// Pixels whose residual under `alpha` is within `epsilon`.
pub fn inlier_mask(block: &Block, basis: &BasisSet, alpha: &DVector<f64>, epsilon: f64) -> Vec<bool> {
    let model = basis.design() * alpha;
    block
        .pixels()
        .iter()
        .zip(model.iter())
        .map(|(&f, &m)| (f - m).abs() <= epsilon)
        .collect()
}

fn consensus_count(block: &Block, basis: &BasisSet, alpha: &DVector<f64>, epsilon: f64) -> usize {
    let model = basis.design() * alpha;
    block
        .pixels()
        .iter()
        .zip(model.iter())
        .filter(|(&f, &m)| (f - m).abs() <= epsilon)
        .count()
}

/// One candidate evaluation: sample, exact fit, count. `None` when the
/// sampled subsystem is degenerate.
fn evaluate_iteration(
    block: &Block,
    basis: &BasisSet,
    seed: u64,
    iteration: usize,
    epsilon: f64,
) -> Option<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, iteration as u64));
    let sample = floyd_sample(&mut rng, block.len(), basis.k());
    let alpha = solve_subset(block, basis, &sample).ok()?;
    Some(consensus_count(block, basis, &alpha, epsilon))
}

fn rebuild_iteration(
    block: &Block,
    basis: &BasisSet,
    seed: u64,
    iteration: usize,
) -> Result<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, iteration as u64));
    let sample = floyd_sample(&mut rng, block.len(), basis.k());
    solve_subset(block, basis, &sample)
}

/// Robust segmentation of one block: runs the iteration budget, keeps the
/// largest consensus set (ties go to the earlier iteration), optionally
/// refits over the winning inliers, and reports the final mask.
pub fn ransac_segment(block: &Block, basis: &BasisSet, params: &RansacParams) -> Result<RansacResult> {
    params.validate()?;
    if block.width() != basis.width() || block.height() != basis.height() {
        return Err(Error::DimensionMismatch(format!(
            "block {}x{} vs basis grid {}x{}",
            block.width(),
            block.height(),
            basis.width(),
            basis.height()
        )));
    }
    if block.len() < basis.k() {
        return Err(Error::Parameter(format!(
            "block of {} pixels cannot seat a minimal sample of {}",
            block.len(),
            basis.k()
        )));
    }
    let epsilon = adaptive_epsilon(block, params);
    let m = params.max_iters;

    let mut best: Option<(usize, usize)> = None; // (consensus, iteration)
    let mut iterations_run = 0;
    let target = params
        .early_exit_fraction
        .map(|f| ((f * block.len() as f64).ceil() as usize).min(block.len()));
    let chunk = if target.is_some() { EARLY_EXIT_CHUNK } else { m };
    while iterations_run < m {
        let start = iterations_run;
        let len = chunk.min(m - start);
        let counts = par::map_indexed(len, |i| {
            evaluate_iteration(block, basis, params.seed, start + i, epsilon)
        });
        for (i, count) in counts.into_iter().enumerate() {
            if let Some(count) = count {
                let candidate = (count, start + i);
                best = Some(match best {
                    Some(b) if b.0 >= count => b,
                    _ => candidate,
                });
            }
        }
        iterations_run += len;
        if let (Some(t), Some((c, _))) = (target, best) {
            if c >= t {
                break;
            }
        }
    }

    let (_, winner) = best.ok_or(Error::NoModel)?;
    let mut alpha = rebuild_iteration(block, basis, params.seed, winner)?;
    if params.refit {
        let inliers: Vec<usize> = inlier_mask(block, basis, &alpha, epsilon)
            .iter()
            .enumerate()
            .filter_map(|(i, &inl)| inl.then_some(i))
            .collect();
        // The sampled pixels are exact-fit inliers, so there are always
        // at least k of them; a degenerate refit keeps the sample model.
        if let Ok(refit) = solve_subset(block, basis, &inliers) {
            alpha = refit;
        }
    }
    let mask = inlier_mask(block, basis, &alpha, epsilon);
    let consensus_size = mask.iter().filter(|&&b| b).count();
    Ok(RansacResult {
        alpha,
        inlier_mask: mask,
        consensus_size,
        iterations_run,
        epsilon_used: epsilon,
    })
}

/// Evaluates every minimal sample set instead of a random budget.
/// Only practical on small blocks; the mode-dispatch pipeline never calls
/// this, but it pins down the attainable consensus for validation.
pub fn exhaustive_consensus(
    block: &Block,
    basis: &BasisSet,
    params: &RansacParams,
) -> Result<RansacResult> {
    let k = basis.k();
    let n = block.len();
    if n < k {
        return Err(Error::Parameter(format!(
            "block of {n} pixels cannot seat a minimal sample of {k}"
        )));
    }
    let epsilon = adaptive_epsilon(block, params);
    let mut combo: Vec<usize> = (0..k).collect();
    let mut best: Option<(usize, DVector<f64>)> = None;
    let mut evaluated = 0usize;
    loop {
        evaluated += 1;
        if let Ok(alpha) = solve_subset(block, basis, &combo) {
            let count = consensus_count(block, basis, &alpha, epsilon);
            if best.as_ref().map_or(true, |(c, _)| count > *c) {
                best = Some((count, alpha));
            }
        }
        if !next_combination(&mut combo, n) {
            break;
        }
    }
    let (_, mut alpha) = best.ok_or(Error::NoModel)?;
    if params.refit {
        let inliers: Vec<usize> = inlier_mask(block, basis, &alpha, epsilon)
            .iter()
            .enumerate()
            .filter_map(|(i, &inl)| inl.then_some(i))
            .collect();
        if let Ok(refit) = solve_subset(block, basis, &inliers) {
            alpha = refit;
        }
    }
    let mask = inlier_mask(block, basis, &alpha, epsilon);
    let consensus_size = mask.iter().filter(|&&b| b).count();
    Ok(RansacResult {
        alpha,
        inlier_mask: mask,
        consensus_size,
        iterations_run: evaluated,
        epsilon_used: epsilon,
    })
}

/// Advances `combo` to the next k-combination of `0..n` in lexicographic
/// order; returns false after the last one.
fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if combo[i] != i + n - k {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}
