//! Orthonormal smooth basis functions for background modeling.
//!
//! A [`BasisSet`] holds the first `k` basis functions of a family (2-D DCT
//! or orthonormal polynomials) evaluated on a block grid, stored as an
//! `N_pixels x k` design matrix. Functions are enumerated in zigzag order
//! over their frequency (or degree) pair so that prefixes of one set are
//! nested subspaces: the least-squares error of any fixed block is
//! non-increasing in `k`.
//!
//! The DCT functions are separable products
//! `beta_u * cos((2r+1)*pi*u / 2H) * beta_v * cos((2c+1)*pi*v / 2W)` with
//! the orthonormal scaling `beta_0 = sqrt(1/N)`, `beta_{u>=1} = sqrt(2/N)`
//! per axis. Polynomial bases start from the monomials `x^m` sampled at
//! `x = 1..=N`, orthonormalized by modified Gram-Schmidt with one
//! reorthogonalization pass, and combined as outer products of the two
//! 1-D families.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock, RwLock};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Family a [`BasisSet`] was generated from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisKind {
    Dct,
    OrthoPoly,
}

/// `k` orthonormal basis functions evaluated on a `width x height` grid.
#[derive(Debug, Clone)]
pub struct BasisSet {
    width: usize,
    height: usize,
    k: usize,
    kind: BasisKind,
    /// `(width*height) x k`; column `j` is basis `j` at all pixels in
    /// row-major order.
    design: DMatrix<f64>,
}

impl BasisSet {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Pixel count of the grid (number of design-matrix rows).
    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    /// Basis value of column `j` at pixel `(row, col)`.
    #[inline]
    pub fn value(&self, j: usize, row: usize, col: usize) -> f64 {
        self.design[(row * self.width + col, j)]
    }

    /// Largest deviation of the Gram matrix from the identity.
    pub fn gram_deviation(&self) -> f64 {
        let gram = self.design.tr_mul(&self.design);
        let mut worst = 0.0f64;
        for i in 0..self.k {
            for j in 0..self.k {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - target).abs());
            }
        }
        worst
    }
}

/// Anti-diagonal traversal of index pairs starting
/// `(0,0), (0,1), (1,0), (2,0), (1,1), (0,2), ...`; odd diagonals walk
/// `u` upward, even diagonals downward.
pub fn zigzag_order(count: usize) -> Vec<(u32, u32)> {
    let mut out = Vec::with_capacity(count);
    let mut d = 0u32;
    while out.len() < count {
        if d % 2 == 1 {
            for u in 0..=d {
                out.push((u, d - u));
                if out.len() == count {
                    break;
                }
            }
        } else {
            for u in (0..=d).rev() {
                out.push((u, d - u));
                if out.len() == count {
                    break;
                }
            }
        }
        d += 1;
    }
    out
}

/// Zigzag restricted to `u < u_max`, `v < v_max`; pairs falling outside the
/// grid are skipped, as in block transforms on bounded grids.
fn zigzag_order_bounded(u_max: usize, v_max: usize, count: usize) -> Vec<(u32, u32)> {
    let mut out = Vec::with_capacity(count);
    let last = (u_max - 1 + v_max - 1) as u32;
    'diag: for d in 0..=last {
        let range: Box<dyn Iterator<Item = u32>> = if d % 2 == 1 {
            Box::new(0..=d)
        } else {
            Box::new((0..=d).rev())
        };
        for u in range {
            let v = d - u;
            if (u as usize) < u_max && (v as usize) < v_max {
                out.push((u, v));
                if out.len() == count {
                    break 'diag;
                }
            }
        }
    }
    out
}

/// First `k` 2-D DCT basis functions on an `n x n` block, zigzag order.
pub fn make_dct_basis(n: usize, k: usize) -> Result<BasisSet> {
    make_dct_basis_rect(n, n, k)
}

/// DCT basis on a general `width x height` grid; used for partial edge
/// blocks where one dimension falls short of the block size.
pub fn make_dct_basis_rect(width: usize, height: usize, k: usize) -> Result<BasisSet> {
    validate_dims(width, height, k)?;
    let rows = dct_axis_table(height);
    let cols = dct_axis_table(width);
    Ok(build_outer_product(width, height, k, BasisKind::Dct, &rows, &cols))
}

/// First `k` 2-D orthonormal polynomial functions on an `n x n` block.
pub fn make_poly_basis(n: usize, k: usize) -> Result<BasisSet> {
    make_poly_basis_rect(n, n, k)
}

pub fn make_poly_basis_rect(width: usize, height: usize, k: usize) -> Result<BasisSet> {
    validate_dims(width, height, k)?;
    // Only degrees reachable by the first k zigzag pairs are needed.
    let pairs = zigzag_order_bounded(height, width, k);
    let max_du = pairs.iter().map(|p| p.0).max().unwrap() as usize;
    let max_dv = pairs.iter().map(|p| p.1).max().unwrap() as usize;
    let rows = poly_axis_table(height, max_du + 1)?;
    let cols = poly_axis_table(width, max_dv + 1)?;
    let set = build_outer_product(width, height, k, BasisKind::OrthoPoly, &rows, &cols);
    let dev = set.gram_deviation();
    if dev > 1e-8 {
        return Err(Error::NumericalDegeneracy { max_deviation: dev });
    }
    Ok(set)
}

fn validate_dims(width: usize, height: usize, k: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::Parameter("basis grid must be nonempty".into()));
    }
    if k == 0 || k > width * height {
        return Err(Error::Parameter(format!(
            "basis count {k} outside 1..={} for a {width}x{height} grid",
            width * height
        )));
    }
    Ok(())
}

/// 1-D orthonormal DCT-II table: entry `(x, u)` is
/// `beta_u * cos((2x+1)*pi*u / 2N)`.
fn dct_axis_table(n: usize) -> DMatrix<f64> {
    let mut t = DMatrix::zeros(n, n);
    for u in 0..n {
        let beta = if u == 0 {
            (1.0 / n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
        };
        for x in 0..n {
            t[(x, u)] = beta * ((2.0 * x as f64 + 1.0) * PI * u as f64 / (2.0 * n as f64)).cos();
        }
    }
    t
}

/// 1-D orthonormal polynomial table up to `degrees` columns: monomials
/// `x^m` sampled at `x = 1..=n`, modified Gram-Schmidt with one
/// reorthogonalization pass. Raw monomials are severely ill-conditioned at
/// high degree, so a column whose norm collapses below `1e-8` of its
/// original is reported as degenerate.
fn poly_axis_table(n: usize, degrees: usize) -> Result<DMatrix<f64>> {
    let mut q = DMatrix::zeros(n, degrees);
    for m in 0..degrees {
        let mut v = DVector::from_fn(n, |x, _| ((x + 1) as f64).powi(m as i32));
        let original_norm = v.norm();
        for _pass in 0..2 {
            for i in 0..m {
                let qi = q.column(i);
                let proj = qi.dot(&v);
                v.axpy(-proj, &qi.clone_owned(), 1.0);
            }
        }
        let norm = v.norm();
        if !(norm > 1e-8 * original_norm) {
            return Err(Error::NumericalDegeneracy {
                max_deviation: if original_norm == 0.0 { 1.0 } else { norm / original_norm },
            });
        }
        q.set_column(m, &(v / norm));
    }
    Ok(q)
}

/// Assembles the 2-D design matrix: column for `(u, v)` is the outer
/// product of 1-D row function `u` and column function `v`, flattened
/// row-major.
fn build_outer_product(
    width: usize,
    height: usize,
    k: usize,
    kind: BasisKind,
    row_table: &DMatrix<f64>,
    col_table: &DMatrix<f64>,
) -> BasisSet {
    let pairs = zigzag_order_bounded(height, width, k);
    debug_assert_eq!(pairs.len(), k);
    let mut design = DMatrix::zeros(width * height, k);
    for (j, &(u, v)) in pairs.iter().enumerate() {
        for r in 0..height {
            let fu = row_table[(r, u as usize)];
            for c in 0..width {
                design[(r * width + c, j)] = fu * col_table[(c, v as usize)];
            }
        }
    }
    BasisSet {
        width,
        height,
        k,
        kind,
        design,
    }
}

type CacheKey = (BasisKind, usize, usize, usize);

static CACHE: OnceLock<RwLock<HashMap<CacheKey, Arc<BasisSet>>>> = OnceLock::new();

/// Memoized basis lookup; block workers share one immutable set per
/// `(kind, width, height, k)`.
pub fn cached_basis(kind: BasisKind, width: usize, height: usize, k: usize) -> Result<Arc<BasisSet>> {
    let cache = CACHE.get_or_init(|| RwLock::new(HashMap::new()));
    let key = (kind, width, height, k);
    if let Some(hit) = cache.read().expect("basis cache poisoned").get(&key) {
        return Ok(hit.clone());
    }
    let set = match kind {
        BasisKind::Dct => make_dct_basis_rect(width, height, k)?,
        BasisKind::OrthoPoly => make_poly_basis_rect(width, height, k)?,
    };
    let arc = Arc::new(set);
    cache
        .write()
        .expect("basis cache poisoned")
        .entry(key)
        .or_insert_with(|| arc.clone());
    Ok(arc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zigzag_prefix_matches_stated_order() {
        assert_eq!(zigzag_order(1), vec![(0, 0)]);
        assert_eq!(zigzag_order(3), vec![(0, 0), (0, 1), (1, 0)]);
        // Ten lowest-frequency pairs cover the full anti-diagonals 0..=3.
        let ten = zigzag_order(10);
        assert_eq!(
            ten,
            vec![
                (0, 0),
                (0, 1),
                (1, 0),
                (2, 0),
                (1, 1),
                (0, 2),
                (0, 3),
                (1, 2),
                (2, 1),
                (3, 0)
            ]
        );
        for (i, &(u, v)) in ten.iter().enumerate() {
            assert!(u + v <= 3, "pair {i} on a later diagonal");
        }
    }

    #[test]
    fn zigzag_enumerates_diagonals_in_order() {
        // Independent oracle: diagonals d = u+v ascend, direction alternates,
        // and a prefix is always a prefix of a longer enumeration.
        let long = zigzag_order(60);
        for w in long.windows(2) {
            let (d0, d1) = (w[0].0 + w[0].1, w[1].0 + w[1].1);
            assert!(d1 == d0 || d1 == d0 + 1);
        }
        for count in 1..60 {
            assert_eq!(zigzag_order(count), long[..count]);
        }
    }

    #[test]
    fn dct_dc_column_is_constant() {
        let b = make_dct_basis(8, 1).unwrap();
        for p in 0..64 {
            assert!((b.design()[(p, 0)] - 0.125).abs() < 1e-14);
        }
    }

    #[test]
    fn poly_dc_column_is_constant() {
        let b = make_poly_basis(8, 1).unwrap();
        for p in 0..64 {
            assert!((b.design()[(p, 0)] - 0.125).abs() < 1e-12);
        }
    }

    #[test]
    fn full_dct_square_matrix_is_orthogonal() {
        let b = make_dct_basis(4, 16).unwrap();
        assert_eq!(b.design().nrows(), 16);
        assert_eq!(b.design().ncols(), 16);
        assert!(b.gram_deviation() <= 1e-10, "gram deviation {}", b.gram_deviation());
    }

    #[test]
    fn gram_identity_over_supported_envelope() {
        for &(n, k) in &[(8usize, 10usize), (16, 16), (64, 10), (64, 32), (32, 14)] {
            let dct = make_dct_basis(n, k).unwrap();
            assert!(dct.gram_deviation() <= 1e-10, "dct n={n} k={k}: {}", dct.gram_deviation());
            let poly = make_poly_basis(n, k).unwrap();
            assert!(poly.gram_deviation() <= 1e-10, "poly n={n} k={k}: {}", poly.gram_deviation());
        }
    }

    #[test]
    fn rect_basis_is_orthonormal() {
        for &(w, h) in &[(36usize, 64usize), (64, 4), (5, 3)] {
            let k = 10.min(w * h);
            let b = make_dct_basis_rect(w, h, k).unwrap();
            assert!(b.gram_deviation() <= 1e-10);
            let p = make_poly_basis_rect(w, h, k).unwrap();
            assert!(p.gram_deviation() <= 1e-10);
        }
    }

    #[test]
    fn poly_span_matches_qr_oracle() {
        // First three zigzag degrees on a 4x4 grid span {1, x, y}. Compare
        // the projector onto the span with a QR factorization of the raw
        // Vandermonde columns.
        let n = 4;
        let b = make_poly_basis(n, 3).unwrap();
        let mut raw = DMatrix::zeros(n * n, 3);
        for r in 0..n {
            for c in 0..n {
                let p = r * n + c;
                raw[(p, 0)] = 1.0;
                raw[(p, 1)] = (c + 1) as f64; // degree (0,1): varies along x
                raw[(p, 2)] = (r + 1) as f64; // degree (1,0): varies along y
            }
        }
        let qr = raw.qr();
        let q = qr.q();
        let oracle_projector = &q * q.transpose();
        let projector = b.design() * b.design().transpose();
        let diff = (&projector - &oracle_projector).abs().max();
        assert!(diff < 1e-10, "projector mismatch {diff}");
    }

    #[test]
    fn invalid_k_is_a_parameter_error() {
        assert!(make_dct_basis(8, 0).is_err());
        assert!(make_dct_basis(8, 65).is_err());
        assert!(make_poly_basis(4, 17).is_err());
    }

    #[test]
    fn cache_returns_shared_instances() {
        let a = cached_basis(BasisKind::Dct, 64, 64, 10).unwrap();
        let b = cached_basis(BasisKind::Dct, 64, 64, 10).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        assert_eq!(a.k(), 10);
    }
}
