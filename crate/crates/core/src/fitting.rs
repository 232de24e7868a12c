//! Least-squares fitting of a basis model to block pixels.

use nalgebra::{DMatrix, DVector};

use crate::basis::BasisSet;
use crate::error::{Error, Result};
use crate::raster::Block;

/// Relative singular-value cutoff below which a sampled subsystem counts
/// as rank deficient. Random minimal samples of smooth bases can be
/// near-collinear.
const SINGULARITY_RTOL: f64 = 1e-8;

/// Model weights plus per-pixel absolute residuals for one block.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub alpha: DVector<f64>,
    /// `|F - P*alpha|` at every block pixel, row-major.
    pub residuals: Vec<f64>,
    pub rmse: f64,
}

impl FitResult {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().cloned().fold(0.0, f64::max)
    }
}

fn check_shapes(block: &Block, basis: &BasisSet) -> Result<()> {
    if block.width() != basis.width() || block.height() != basis.height() {
        return Err(Error::DimensionMismatch(format!(
            "block {}x{} vs basis grid {}x{}",
            block.width(),
            block.height(),
            basis.width(),
            basis.height()
        )));
    }
    Ok(())
}

/// Ordinary least squares over every pixel of the block. Basis columns are
/// orthonormal, so the normal equations collapse to `alpha = P^T F`.
pub fn fit_least_squares(block: &Block, basis: &BasisSet) -> Result<FitResult> {
    check_shapes(block, basis)?;
    let f = DVector::from_column_slice(block.pixels());
    let alpha = basis.design().tr_mul(&f);
    Ok(finish(block, basis, alpha))
}

/// Least squares restricted to the selected pixels; residuals are still
/// reported for the whole block. With exactly `k` pixels the fit
/// interpolates them. A rank-deficient subsystem is a degenerate-sample
/// error so the caller can draw again.
pub fn fit_subset(block: &Block, basis: &BasisSet, pixel_indices: &[usize]) -> Result<FitResult> {
    check_shapes(block, basis)?;
    let k = basis.k();
    if pixel_indices.len() < k {
        return Err(Error::Parameter(format!(
            "subset of {} pixels cannot determine {k} weights",
            pixel_indices.len()
        )));
    }
    let n_px = block.len();
    let mut seen = vec![false; n_px];
    for &idx in pixel_indices {
        if idx >= n_px {
            return Err(Error::Parameter(format!("pixel index {idx} out of range")));
        }
        if seen[idx] {
            return Err(Error::Parameter(format!("pixel index {idx} repeated")));
        }
        seen[idx] = true;
    }
    let alpha = solve_subset(block, basis, pixel_indices)?;
    Ok(finish(block, basis, alpha))
}

/// SVD solve of the row-sampled system; shared with the RANSAC hot loop.
pub(crate) fn solve_subset(
    block: &Block,
    basis: &BasisSet,
    pixel_indices: &[usize],
) -> Result<DVector<f64>> {
    let k = basis.k();
    let m = pixel_indices.len();
    let design = basis.design();
    let mut a = DMatrix::zeros(m, k);
    let mut b = DVector::zeros(m);
    for (row, &idx) in pixel_indices.iter().enumerate() {
        for j in 0..k {
            a[(row, j)] = design[(idx, j)];
        }
        b[row] = block.pixels()[idx];
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > SINGULARITY_RTOL * smax) {
        return Err(Error::DegenerateSample(format!(
            "singular values span {smin:.3e}..{smax:.3e}"
        )));
    }
    svd.solve(&b, 0.0)
        .map_err(|e| Error::DegenerateSample(e.to_string()))
}

/// Reconstructed surface `P * alpha` at every grid pixel, row-major.
/// Values are left unclamped; gamut clamping belongs to the output stage,
/// never to residual computation.
pub fn evaluate_model(alpha: &DVector<f64>, basis: &BasisSet) -> Result<Vec<f64>> {
    if alpha.len() != basis.k() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights vs basis k={}",
            alpha.len(),
            basis.k()
        )));
    }
    let surface = basis.design() * alpha;
    Ok(surface.as_slice().to_vec())
}

fn finish(block: &Block, basis: &BasisSet, alpha: DVector<f64>) -> FitResult {
    let model = basis.design() * &alpha;
    let mut sq_sum = 0.0;
    let residuals: Vec<f64> = block
        .pixels()
        .iter()
        .zip(model.iter())
        .map(|(&f, &m)| {
            let r = (f - m).abs();
            sq_sum += r * r;
            r
        })
        .collect();
    let rmse = (sq_sum / residuals.len() as f64).sqrt();
    FitResult { alpha, residuals, rmse }
}
