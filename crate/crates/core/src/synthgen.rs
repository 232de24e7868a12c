//! Synthetic ground-truth fixtures for property tests and acceptance
//! checks: smooth backgrounds with planted foreground shapes whose exact
//! pixel set is retained as the oracle mask.
//!
//! Recipes are plain serializable values so fixture families can be
//! versioned and regenerated bit-identically on any machine.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::cached_basis;
use crate::basis::BasisKind;
use crate::error::{Error, Result};
use crate::mask::SegMask;
use crate::ransac::derive_seed;
use crate::raster::{clamp_u8, Raster};

/// How the smooth background of a fixture is produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BackgroundSpec {
    /// Independent random combination of the first `k` DCT modes per
    /// `block`-sized tile.
    PerBlockDct { block: usize, k: usize, alpha_scale: f64 },
    /// One random low-order DCT model across the whole image.
    GlobalDct { k: usize, alpha_scale: f64 },
    /// Linear ramp; horizontal when `diagonal` is false.
    Ramp { from: f64, to: f64, diagonal: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Glyphs,
    Strokes,
    Speckle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForegroundSpec {
    /// Fraction of pixels to cover, in (0, 0.5).
    pub coverage: f64,
    /// Requested intensity offset of planted pixels.
    pub contrast: f64,
    pub shape: ShapeKind,
}

/// Complete generation parameters of one fixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recipe {
    pub version: u32,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
    pub background: BackgroundSpec,
    #[serde(default)]
    pub foreground: Option<ForegroundSpec>,
    #[serde(default)]
    pub noise_sigma: f64,
}

/// Image, planted-foreground oracle mask, and the recipe that made them.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub image: Raster,
    pub truth: SegMask,
    pub recipe: Recipe,
}

#[inline]
fn unit_open(rng: &mut ChaCha8Rng) -> f64 {
    // (0, 1]: safe for logarithms.
    (rng.next_u64() as f64 + 1.0) / (u64::MAX as f64 + 1.0)
}

#[inline]
fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * (rng.next_u64() as f64) / (u64::MAX as f64)
}

#[inline]
fn below(rng: &mut ChaCha8Rng, n: usize) -> usize {
    ((u128::from(rng.next_u64()) * n as u128) >> 64) as usize
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1 = unit_open(rng);
    let u2 = unit_open(rng);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Random combination of the first `k` DCT modes on a `width x height`
/// grid, affinely remapped into a seeded target range. The remap keeps the
/// surface inside the model span (the DC term absorbs it).
fn dct_field(width: usize, height: usize, k: usize, alpha_scale: f64, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let basis = cached_basis(BasisKind::Dct, width, height, k.min(width * height))?;
    let lo = uniform(rng, 10.0, 80.0);
    let hi = uniform(rng, 170.0, 245.0);
    let mut field = vec![0.0; width * height];
    // DC fixed mid-range; the remap below sets the final window.
    let mut coeffs = Vec::with_capacity(basis.k());
    coeffs.push(128.0 / basis.design()[(0, 0)]);
    for _ in 1..basis.k() {
        coeffs.push(uniform(rng, -alpha_scale, alpha_scale));
    }
    for (p, v) in field.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, &a) in coeffs.iter().enumerate() {
            acc += a * basis.design()[(p, j)];
        }
        *v = acc;
    }
    let (mut vmin, mut vmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in &field {
        vmin = vmin.min(v);
        vmax = vmax.max(v);
    }
    if vmax > vmin {
        let scale = (hi - lo) / (vmax - vmin);
        for v in &mut field {
            *v = lo + (*v - vmin) * scale;
        }
    } else {
        let mid = 0.5 * (lo + hi);
        field.iter_mut().for_each(|v| *v = mid);
    }
    Ok(field)
}

/// Per-tile random smooth background: each `block`-sized tile carries an
/// independent combination of the first `k` DCT modes, scaled into the
/// 8-bit range.
pub fn gen_smooth_background(
    width: usize,
    height: usize,
    k: usize,
    alpha_scale: f64,
    seed: u64,
) -> Result<Raster> {
    gen_smooth_background_tiled(width, height, 64, k, alpha_scale, seed)
}

pub fn gen_smooth_background_tiled(
    width: usize,
    height: usize,
    block: usize,
    k: usize,
    alpha_scale: f64,
    seed: u64,
) -> Result<Raster> {
    if k == 0 || k > 10 {
        return Err(Error::Parameter(format!("background model order {k} outside 1..=10")));
    }
    if block == 0 {
        return Err(Error::Parameter("tile size must be nonzero".into()));
    }
    let mut data = vec![0u8; width * height];
    let mut tile_index = 0u64;
    for row0 in (0..height).step_by(block) {
        for col0 in (0..width).step_by(block) {
            let h = block.min(height - row0);
            let w = block.min(width - col0);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, tile_index));
            tile_index += 1;
            let field = dct_field(w, h, k, alpha_scale, &mut rng)?;
            for r in 0..h {
                for c in 0..w {
                    data[(row0 + r) * width + col0 + c] = clamp_u8(field[r * w + c]);
                }
            }
        }
    }
    Raster::new(width, height, data)
}

/// Single smooth model across the whole image.
pub fn gen_global_background(
    width: usize,
    height: usize,
    k: usize,
    alpha_scale: f64,
    seed: u64,
) -> Result<Raster> {
    if k == 0 || k > 10 {
        return Err(Error::Parameter(format!("background model order {k} outside 1..=10")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0));
    let field = dct_field(width, height, k, alpha_scale, &mut rng)?;
    Raster::from_fn(width, height, |r, c| field[r * width + c])
}

/// Linear ramp from `from` to `to`, horizontal or diagonal.
pub fn gen_ramp(width: usize, height: usize, from: f64, to: f64, diagonal: bool) -> Result<Raster> {
    let span = if diagonal {
        (width + height - 2).max(1) as f64
    } else {
        (width - 1).max(1) as f64
    };
    Raster::from_fn(width, height, |r, c| {
        let t = if diagonal { (r + c) as f64 } else { c as f64 } / span;
        from + (to - from) * t
    })
}

/// Plants foreground shapes on a background. Every planted pixel moves by
/// `contrast` toward the farther gamut bound (so clamping can never cost
/// more than half the request); the truth mask records exactly the planted
/// pixels.
pub fn plant_foreground(
    background: &Raster,
    coverage: f64,
    contrast: f64,
    shape: ShapeKind,
    seed: u64,
) -> Result<Fixture> {
    if !(coverage > 0.0 && coverage < 0.5) {
        return Err(Error::Parameter(format!("coverage {coverage} outside (0, 0.5)")));
    }
    if contrast <= 0.0 || contrast > 255.0 {
        return Err(Error::Parameter(format!("contrast {contrast} outside (0, 255]")));
    }
    let (width, height) = (background.width(), background.height());
    let n = width * height;
    let target = ((coverage * n as f64).round() as usize).max(1);
    let mut truth = SegMask::empty(width, height);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
    let mut planted = 0usize;

    match shape {
        ShapeKind::Speckle => {
            while planted < target {
                let idx = below(&mut rng, n);
                let (r, c) = (idx / width, idx % width);
                if !truth.get(r, c) {
                    truth.set(r, c, true);
                    planted += 1;
                }
            }
        }
        ShapeKind::Glyphs => {
            // 5x7 dot-matrix patterns at random positions and scales.
            while planted < target {
                let scale = 1 + below(&mut rng, 2);
                let gh = 7 * scale;
                let gw = 5 * scale;
                if height <= gh || width <= gw {
                    return Err(Error::Parameter("image too small for glyph shapes".into()));
                }
                let r0 = below(&mut rng, height - gh);
                let c0 = below(&mut rng, width - gw);
                let pattern: Vec<bool> = (0..35).map(|_| unit_open(&mut rng) < 0.6).collect();
                for gr in 0..7 {
                    for gc in 0..5 {
                        if !pattern[gr * 5 + gc] {
                            continue;
                        }
                        for sr in 0..scale {
                            for sc in 0..scale {
                                let (r, c) = (r0 + gr * scale + sr, c0 + gc * scale + sc);
                                if !truth.get(r, c) {
                                    truth.set(r, c, true);
                                    planted += 1;
                                }
                            }
                        }
                    }
                }
            }
        }
        ShapeKind::Strokes => {
            // Random-walk polylines of thickness 1-2.
            while planted < target {
                let mut r = below(&mut rng, height) as f64;
                let mut c = below(&mut rng, width) as f64;
                let mut angle = uniform(&mut rng, 0.0, std::f64::consts::TAU);
                let len = 10 + below(&mut rng, 3 * width.max(height) / 2);
                let thick = 1 + below(&mut rng, 2);
                for _ in 0..len {
                    for dr in 0..thick {
                        for dc in 0..thick {
                            let (pr, pc) = (r as isize + dr as isize, c as isize + dc as isize);
                            if pr >= 0 && pc >= 0 && (pr as usize) < height && (pc as usize) < width
                            {
                                let (pr, pc) = (pr as usize, pc as usize);
                                if !truth.get(pr, pc) {
                                    truth.set(pr, pc, true);
                                    planted += 1;
                                }
                            }
                        }
                    }
                    angle += uniform(&mut rng, -0.25, 0.25);
                    r += angle.sin();
                    c += angle.cos();
                    if r < 0.0 || c < 0.0 || r >= height as f64 || c >= width as f64 {
                        break;
                    }
                }
            }
        }
    }

    let image = apply_contrast(background, &truth, contrast)?;
    Ok(Fixture {
        image,
        truth,
        recipe: Recipe {
            version: 1,
            width,
            height,
            seed,
            background: BackgroundSpec::Ramp { from: 0.0, to: 0.0, diagonal: false },
            foreground: Some(ForegroundSpec { coverage, contrast, shape }),
            noise_sigma: 0.0,
        },
    })
}

/// Exactly `count` separated curves, one per horizontal band, for
/// line-extraction fixtures. Curves never touch across bands, so the
/// truth mask has exactly `count` 8-connected components.
pub fn plant_curves(background: &Raster, count: usize, thickness: usize, seed: u64) -> Result<Fixture> {
    if count == 0 || thickness == 0 {
        return Err(Error::Parameter("count and thickness must be >= 1".into()));
    }
    let (width, height) = (background.width(), background.height());
    let band = height / count;
    if band < thickness + 6 {
        return Err(Error::Parameter(format!(
            "{count} bands of {band}px cannot hold curves of thickness {thickness}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 2));
    let mut truth = SegMask::empty(width, height);
    for i in 0..count {
        let center = (i * band + band / 2) as f64;
        let amplitude = uniform(&mut rng, 1.0, (band / 2 - thickness - 1).max(1) as f64);
        let cycles = uniform(&mut rng, 0.5, 2.0);
        let phase = uniform(&mut rng, 0.0, std::f64::consts::TAU);
        for c in 2..width.saturating_sub(2) {
            let t = c as f64 / width as f64;
            let r0 = center + amplitude * (std::f64::consts::TAU * cycles * t + phase).sin();
            for dt in 0..thickness {
                let r = r0 as usize + dt;
                if r < height {
                    truth.set(r, c, true);
                }
            }
        }
    }
    let image = apply_contrast(background, &truth, 60.0)?;
    Ok(Fixture {
        image,
        truth,
        recipe: Recipe {
            version: 1,
            width,
            height,
            seed,
            background: BackgroundSpec::Ramp { from: 0.0, to: 0.0, diagonal: false },
            foreground: Some(ForegroundSpec {
                coverage: 0.0,
                contrast: 60.0,
                shape: ShapeKind::Strokes,
            }),
            noise_sigma: 0.0,
        },
    })
}

/// Offsets every truth pixel by `contrast` toward the farther gamut bound
/// and verifies clamping kept at least half the request.
fn apply_contrast(background: &Raster, truth: &SegMask, contrast: f64) -> Result<Raster> {
    let (width, height) = (background.width(), background.height());
    let mut image = background.clone();
    let mut worst = f64::INFINITY;
    for r in 0..height {
        for c in 0..width {
            if !truth.get(r, c) {
                continue;
            }
            let bg = f64::from(background.get(r, c));
            let raw = if bg < 128.0 { bg + contrast } else { bg - contrast };
            let v = raw.clamp(0.0, 255.0);
            worst = worst.min((v - bg).abs());
            image.set(r, c, clamp_u8(v));
        }
    }
    if worst < contrast / 2.0 {
        return Err(Error::Parameter(format!(
            "clamping reduced contrast to {worst:.1} (< half of {contrast})"
        )));
    }
    Ok(image)
}

/// Adds rounded Gaussian noise to every pixel.
pub fn add_noise(raster: &Raster, sigma: f64, seed: u64) -> Raster {
    if sigma <= 0.0 {
        return raster.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 3));
    let mut out = raster.clone();
    for r in 0..raster.height() {
        for c in 0..raster.width() {
            let v = f64::from(raster.get(r, c)) + sigma * gaussian(&mut rng);
            out.set(r, c, clamp_u8(v));
        }
    }
    out
}

/// Materializes a recipe into an image + truth pair.
pub fn generate(recipe: &Recipe) -> Result<Fixture> {
    let background = match recipe.background {
        BackgroundSpec::PerBlockDct { block, k, alpha_scale } => {
            gen_smooth_background_tiled(recipe.width, recipe.height, block, k, alpha_scale, recipe.seed)?
        }
        BackgroundSpec::GlobalDct { k, alpha_scale } => {
            gen_global_background(recipe.width, recipe.height, k, alpha_scale, recipe.seed)?
        }
        BackgroundSpec::Ramp { from, to, diagonal } => {
            gen_ramp(recipe.width, recipe.height, from, to, diagonal)?
        }
    };
    let (mut image, truth) = match &recipe.foreground {
        Some(fg) => {
            let fixture =
                plant_foreground(&background, fg.coverage, fg.contrast, fg.shape, recipe.seed)?;
            (fixture.image, fixture.truth)
        }
        None => {
            let truth = SegMask::empty(recipe.width, recipe.height);
            (background, truth)
        }
    };
    if recipe.noise_sigma > 0.0 {
        image = add_noise(&image, recipe.noise_sigma, recipe.seed);
    }
    Ok(Fixture {
        image,
        truth,
        recipe: recipe.clone(),
    })
}
