//! Sparse-decomposition detector: split a block into a smooth part plus a
//! sparse outlier component.
//!
//! The block is modeled as `F = P*alpha + S` and the decomposition solves
//!
//! ```text
//! minimize ||S||_1   subject to   ||F - P*alpha - S||_2 <= epsilon
//! ```
//!
//! Pixels with large `|S|` are foreground. With orthonormal `P` the free
//! weights are eliminated exactly — the optimal `alpha` for any `S` is
//! `P^T (F - S)` — leaving a problem in `S` alone whose constraint set is
//! a cylinder: a ball of radius epsilon in the subspace orthogonal to the
//! model span, unconstrained along the span. Both proximal maps are then
//! closed-form (soft threshold; radial clip of the orthogonal component),
//! so an ADMM splitting between them converges without inner solves.
//!
//! The returned iterate is the best feasible point seen, which makes the
//! reported objective non-increasing over iterations.

use nalgebra::DVector;

use crate::basis::{cached_basis, BasisSet};
use crate::error::{Error, Result};
use crate::mask::SegMask;
use crate::par;
use crate::ransac::adaptive_epsilon;
use crate::raster::{Block, Raster};
use crate::segmenter::SegConfig;

#[derive(Debug, Clone)]
pub struct SparseParams {
    /// Constraint radius epsilon.
    pub epsilon: f64,
    /// Relative/absolute tolerance for the ADMM stop test.
    pub solver_tol: f64,
    pub max_iters: usize,
    /// Initial ADMM penalty; adapted by residual balancing.
    pub rho: f64,
}

impl Default for SparseParams {
    fn default() -> Self {
        Self {
            epsilon: 1.0,
            solver_tol: 1e-6,
            max_iters: 5000,
            rho: 1.0,
        }
    }
}

/// Total-budget reading of the per-pixel smooth tolerance: the default
/// constraint radius for a block of `n_pixels`.
pub fn default_epsilon(n_pixels: usize, epsilon2: f64) -> f64 {
    (n_pixels as f64).sqrt() * epsilon2
}

#[derive(Debug, Clone)]
pub struct SparseResult {
    pub alpha: DVector<f64>,
    /// Sparse outlier component, row-major over the block.
    pub s: Vec<f64>,
    /// Final `||S||_1`.
    pub objective: f64,
    /// Whether the constraint held at termination (up to solver tolerance).
    pub feasible: bool,
    pub iterations: usize,
    /// Best objective after each iteration; non-increasing.
    pub objective_trace: Vec<f64>,
}

/// Applies `v - P P^T v` (projection onto the orthogonal complement of
/// the model span).
fn complement_project(basis: &BasisSet, v: &DVector<f64>) -> DVector<f64> {
    let coeffs = basis.design().tr_mul(v);
    v - basis.design() * coeffs
}

fn soft_threshold(v: &DVector<f64>, t: f64) -> DVector<f64> {
    v.map(|x| {
        if x > t {
            x - t
        } else if x < -t {
            x + t
        } else {
            0.0
        }
    })
}

/// Projection onto `{z : ||Q(F - z)|| <= eps}`: the orthogonal-complement
/// part of `F - z` is radially clipped to the epsilon ball, the span part
/// is untouched.
fn cylinder_project(basis: &BasisSet, f: &DVector<f64>, y: &DVector<f64>, eps: f64) -> DVector<f64> {
    let g = complement_project(basis, &(f - y));
    let norm = g.norm();
    if norm <= eps {
        y.clone()
    } else {
        y + g * (1.0 - eps / norm)
    }
}

/// Solves the L1 decomposition for one block. Deterministic; returns the
/// best feasible iterate with its objective trace.
pub fn sparse_decompose(block: &Block, basis: &BasisSet, params: &SparseParams) -> Result<SparseResult> {
    if block.width() != basis.width() || block.height() != basis.height() {
        return Err(Error::DimensionMismatch(format!(
            "block {}x{} vs basis grid {}x{}",
            block.width(),
            block.height(),
            basis.width(),
            basis.height()
        )));
    }
    if params.epsilon < 0.0 {
        return Err(Error::Parameter("epsilon must be nonnegative".into()));
    }
    if params.max_iters == 0 {
        return Err(Error::Parameter("max_iters must be >= 1".into()));
    }
    let n = block.len();
    let f = DVector::from_column_slice(block.pixels());
    let eps = params.epsilon;
    let mut rho = params.rho;

    let mut s = DVector::zeros(n);
    let mut z = cylinder_project(basis, &f, &s, eps);
    let mut u: DVector<f64> = DVector::zeros(n);

    let mut best_s = z.clone();
    let mut best_obj = z.abs().sum();
    let mut trace = Vec::new();
    let mut iterations = 0;

    for iter in 0..params.max_iters {
        iterations = iter + 1;
        s = soft_threshold(&(&z - &u), 1.0 / rho);
        let z_prev = z;
        z = cylinder_project(basis, &f, &(&s + &u), eps);
        u += &s - &z;

        // z is always feasible; track the best one seen.
        let obj = z.abs().sum();
        if obj < best_obj {
            best_obj = obj;
            best_s = z.clone();
        }
        trace.push(best_obj);

        let primal = (&s - &z).norm();
        let dual = rho * (&z - &z_prev).norm();
        let scale = s.norm().max(z.norm()).max(1.0);
        if primal <= params.solver_tol * scale && dual <= params.solver_tol * scale {
            break;
        }
        // Residual balancing keeps the penalty useful across intensity
        // scales.
        if primal > 10.0 * dual {
            rho *= 2.0;
            u /= 2.0;
        } else if dual > 10.0 * primal {
            rho /= 2.0;
            u *= 2.0;
        }
    }

    let alpha = basis.design().tr_mul(&(&f - &best_s));
    let residual = (&f - basis.design() * &alpha - &best_s).norm();
    let feasible = residual <= eps + params.solver_tol * eps.max(1.0);
    Ok(SparseResult {
        alpha,
        s: best_s.as_slice().to_vec(),
        objective: best_obj,
        feasible,
        iterations,
        objective_trace: trace,
    })
}

/// Flags as foreground every pixel whose sparse component exceeds the
/// threshold in magnitude.
pub fn mask_from_sparse(result: &SparseResult, threshold: f64) -> Result<Vec<bool>> {
    if !(threshold > 0.0) {
        return Err(Error::Parameter(format!("threshold {threshold} must be > 0")));
    }
    Ok(result.s.iter().map(|&v| v.abs() > threshold).collect())
}

/// Whole-block sparse segmentation of an image: every `block_size` tile
/// is decomposed independently (no mode dispatch, no splitting) and
/// thresholded at the block's adaptive epsilon.
pub fn sparse_segment_image(raster: &Raster, config: &SegConfig) -> Result<SegMask> {
    config.validate()?;
    let (width, height) = (raster.width(), raster.height());
    let bs = config.block_size;
    let mut tiles = Vec::new();
    for row0 in (0..height).step_by(bs) {
        for col0 in (0..width).step_by(bs) {
            tiles.push((row0, col0));
        }
    }
    let results = par::map_slice(&tiles, |&(row0, col0)| -> Result<(usize, usize, Vec<bool>)> {
        let block = raster.block(row0, col0, bs, bs).expect("tile inside image");
        let (h, w) = (block.height(), block.width());
        let k_eff = config.k.min(h * w);
        let basis = cached_basis(config.basis_kind, w, h, k_eff)?;
        let params = SparseParams {
            epsilon: default_epsilon(h * w, config.epsilon2),
            ..Default::default()
        };
        let result = sparse_decompose(&block, &basis, &params)?;
        let threshold = adaptive_epsilon(&block, &config.ransac);
        let bits = mask_from_sparse(&result, threshold.max(f64::MIN_POSITIVE))?;
        Ok((h, w, bits))
    });
    let mut mask = SegMask::empty(width, height);
    for (&(row0, col0), res) in tiles.iter().zip(results) {
        let (h, w, bits) = res?;
        mask.blit(row0, col0, h, w, &bits);
    }
    Ok(mask)
}
