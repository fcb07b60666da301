//! Geometric augmentation: seeded affine transforms with bilinear
//! resampling, plus square resizing.
//!
//! Pixel centers sit at integer coordinates; `x` indexes columns and `y`
//! rows. Transforms pivot on the image center `((w-1)/2, (h-1)/2)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

/// Sampling envelope for [`AffineParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AffineRanges {
    pub max_rotation_deg: f64,
    pub max_scale_frac: f64,
    pub max_shear_frac: f64,
    pub max_translate_frac: f64,
    pub allow_hflip: bool,
    pub allow_vflip: bool,
}

impl Default for AffineRanges {
    /// ±15°, ±30 % scale, ±30 % shear, up to 100 % translation, both flips.
    fn default() -> Self {
        Self {
            max_rotation_deg: 15.0,
            max_scale_frac: 0.30,
            max_shear_frac: 0.30,
            max_translate_frac: 1.0,
            allow_hflip: true,
            allow_vflip: true,
        }
    }
}

impl AffineRanges {
    /// No augmentation at all.
    pub fn none() -> Self {
        Self {
            max_rotation_deg: 0.0,
            max_scale_frac: 0.0,
            max_shear_frac: 0.0,
            max_translate_frac: 0.0,
            allow_hflip: false,
            allow_vflip: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.max_rotation_deg >= 0.0
            && self.max_rotation_deg.is_finite()
            && (0.0..1.0).contains(&self.max_scale_frac)
            && self.max_shear_frac >= 0.0
            && self.max_shear_frac.is_finite()
            && (0.0..=1.0).contains(&self.max_translate_frac);
        if ok {
            Ok(())
        } else {
            Err(Error::validation(format!(
                "invalid augmentation ranges {self:?}"
            )))
        }
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineParams {
    pub rotation_deg: f64,
    pub scale: f64,
    pub shear_frac: f64,
    pub translate_x_frac: f64,
    pub translate_y_frac: f64,
    pub hflip: bool,
    pub vflip: bool,
}

impl AffineParams {
    pub fn identity() -> Self {
        Self {
            rotation_deg: 0.0,
            scale: 1.0,
            shear_frac: 0.0,
            translate_x_frac: 0.0,
            translate_y_frac: 0.0,
            hflip: false,
            vflip: false,
        }
    }
}

fn symmetric<R: Rng + ?Sized>(rng: &mut R, half_width: f64) -> f64 {
    if half_width == 0.0 {
        0.0
    } else {
        rng.random_range(-half_width..=half_width)
    }
}

pub fn sample_affine_params<R: Rng + ?Sized>(ranges: &AffineRanges, rng: &mut R) -> AffineParams {
    let rotation_deg = symmetric(rng, ranges.max_rotation_deg);
    let scale = 1.0 + symmetric(rng, ranges.max_scale_frac);
    let shear_frac = symmetric(rng, ranges.max_shear_frac);
    let translate_x_frac = symmetric(rng, ranges.max_translate_frac);
    let translate_y_frac = symmetric(rng, ranges.max_translate_frac);
    let hflip = ranges.allow_hflip && rng.random_bool(0.5);
    let vflip = ranges.allow_vflip && rng.random_bool(0.5);
    AffineParams {
        rotation_deg,
        scale,
        shear_frac,
        translate_x_frac,
        translate_y_frac,
        hflip,
        vflip,
    }
}

/// 2×3 matrix mapping output pixel coordinates to source coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMatrix(pub [[f64; 3]; 2]);

impl AffineMatrix {
    pub const IDENTITY: AffineMatrix = AffineMatrix([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);

    pub fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let m = &self.0;
        (
            m[0][0] * x + m[0][1] * y + m[0][2],
            m[1][0] * x + m[1][1] * y + m[1][2],
        )
    }
}

/// Inverse mapping for the forward transform
/// `flip ∘ translate ∘ rotate ∘ scale ∘ shear` about the image center.
pub fn affine_matrix(p: &AffineParams, width: usize, height: usize) -> Result<AffineMatrix> {
    if width == 0 || height == 0 {
        return Err(Error::validation("image dimensions must be positive"));
    }
    if p.scale == 0.0 {
        return Err(Error::validation("scale 0 makes the transform singular"));
    }
    let (cx, cy) = ((width - 1) as f64 / 2.0, (height - 1) as f64 / 2.0);
    let (sin, cos) = p.rotation_deg.to_radians().sin_cos();
    let inv_s = 1.0 / p.scale;
    let h = p.shear_frac;

    // (R·S·Sh)^-1 = Sh^-1 · S^-1 · R^-1
    let r_inv = [[cos, sin], [-sin, cos]];
    let sh_inv = [[1.0, -h], [0.0, 1.0]];
    let mut l_inv = [[0.0; 2]; 2];
    for (i, row) in l_inv.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = inv_s * (sh_inv[i][0] * r_inv[0][j] + sh_inv[i][1] * r_inv[1][j]);
        }
    }
    let fx = if p.hflip { -1.0 } else { 1.0 };
    let fy = if p.vflip { -1.0 } else { 1.0 };
    // Centered: u = L^-1 (F u' - t).
    let a = [
        [l_inv[0][0] * fx, l_inv[0][1] * fy],
        [l_inv[1][0] * fx, l_inv[1][1] * fy],
    ];
    let (tx, ty) = (
        p.translate_x_frac * width as f64,
        p.translate_y_frac * height as f64,
    );
    let b = [
        -(l_inv[0][0] * tx + l_inv[0][1] * ty),
        -(l_inv[1][0] * tx + l_inv[1][1] * ty),
    ];
    let m = [
        [a[0][0], a[0][1], cx - (a[0][0] * cx + a[0][1] * cy) + b[0]],
        [a[1][0], a[1][1], cy - (a[1][0] * cx + a[1][1] * cy) + b[1]],
    ];
    if m.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::validation(
            "affine parameters produce a non-finite matrix",
        ));
    }
    Ok(AffineMatrix(m))
}

/// Bilinear sample at `(x, y)`; neighbours outside the image read as `outside(ix, iy)`.
#[inline]
fn bilinear(img: &Image, x: f64, y: f64, outside: impl Fn(isize, isize) -> f64) -> f64 {
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let (x0, y0) = (x0 as isize, y0 as isize);
    let (w, h) = (img.width() as isize, img.height() as isize);
    let at = |ix: isize, iy: isize| {
        if (0..w).contains(&ix) && (0..h).contains(&iy) {
            img.get(ix as usize, iy as usize)
        } else {
            outside(ix, iy)
        }
    };
    let (p00, p10, p01, p11) = (
        at(x0, y0),
        at(x0 + 1, y0),
        at(x0, y0 + 1),
        at(x0 + 1, y0 + 1),
    );
    let v = (1.0 - fx) * (1.0 - fy) * p00
        + fx * (1.0 - fy) * p10
        + (1.0 - fx) * fy * p01
        + fx * fy * p11;
    let lo = p00.min(p10).min(p01).min(p11);
    let hi = p00.max(p10).max(p01).max(p11);
    v.clamp(lo, hi)
}

/// Resamples `img` through `m`, filling out-of-bounds samples with 0.
pub fn apply_affine(img: &Image, m: &AffineMatrix) -> Result<Image> {
    if m.0.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::validation("affine matrix must be finite"));
    }
    let (w, h) = (img.width(), img.height());
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = m.map(x as f64, y as f64);
            out.push(bilinear(img, sx, sy, |_, _| 0.0));
        }
    }
    Ok(Image::from_raw(w, h, out))
}

/// Samples parameters and applies them in one step.
pub fn augment<R: Rng + ?Sized>(img: &Image, ranges: &AffineRanges, rng: &mut R) -> Result<Image> {
    let p = sample_affine_params(ranges, rng);
    apply_affine(img, &affine_matrix(&p, img.width(), img.height())?)
}

/// Resizes to `side`×`side` by corner-aligned bilinear interpolation.
pub fn resize_to(img: &Image, side: usize) -> Result<Image> {
    if side < 1 {
        return Err(Error::validation("resize side must be at least 1"));
    }
    let (w, h) = (img.width(), img.height());
    let coord = |i: usize, n_in: usize| {
        if side == 1 {
            (n_in - 1) as f64 / 2.0
        } else {
            (i * (n_in - 1)) as f64 / (side - 1) as f64
        }
    };
    let clamp_edge = |ix: isize, iy: isize| {
        img.get(
            ix.clamp(0, w as isize - 1) as usize,
            iy.clamp(0, h as isize - 1) as usize,
        )
    };
    let mut out = Vec::with_capacity(side * side);
    for y in 0..side {
        let sy = coord(y, h);
        for x in 0..side {
            out.push(bilinear(img, coord(x, w), sy, clamp_edge));
        }
    }
    Ok(Image::from_raw(side, side, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn img2x2() -> Image {
        Image::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap()
    }

    #[test]
    fn zero_ranges_sample_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(
            sample_affine_params(&AffineRanges::none(), &mut rng),
            AffineParams::identity()
        );
    }

    #[test]
    fn same_seed_same_params() {
        let r = AffineRanges::default();
        let a = sample_affine_params(&r, &mut ChaCha8Rng::seed_from_u64(4));
        let b = sample_affine_params(&r, &mut ChaCha8Rng::seed_from_u64(4));
        assert_eq!(a, b);
    }

    #[test]
    fn identity_matrix_and_image() {
        let m = affine_matrix(&AffineParams::identity(), 5, 3).unwrap();
        assert_eq!(m, AffineMatrix::IDENTITY);
        let img = img2x2();
        assert_eq!(apply_affine(&img, &m).unwrap(), img);
    }

    #[test]
    fn hflip_swaps_columns() {
        let p = AffineParams {
            hflip: true,
            ..AffineParams::identity()
        };
        let m = affine_matrix(&p, 2, 2).unwrap();
        assert_eq!(m.map(0.0, 0.0), (1.0, 0.0));
        assert_eq!(m.map(1.0, 0.0), (0.0, 0.0));
        let out = apply_affine(&img2x2(), &m).unwrap();
        assert_eq!(out.pixels(), &[2.0, 1.0, 4.0, 3.0]);
    }

    #[test]
    fn full_translation_blanks_image() {
        let img = Image::filled(8, 6, 0.7).unwrap();
        let p = AffineParams {
            translate_x_frac: 1.0,
            ..AffineParams::identity()
        };
        let out = apply_affine(&img, &affine_matrix(&p, 8, 6).unwrap()).unwrap();
        assert!(out.pixels().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_scale_is_singular() {
        let p = AffineParams {
            scale: 0.0,
            ..AffineParams::identity()
        };
        assert!(affine_matrix(&p, 4, 4).is_err());
        let bad = AffineMatrix([[f64::NAN, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        assert!(apply_affine(&img2x2(), &bad).is_err());
    }

    #[test]
    fn resize_identity_constant_and_checker() {
        let img = Image::from_fn(224, 224, |x, y| ((x * 7 + y * 3) % 11) as f64 / 10.0).unwrap();
        assert_eq!(resize_to(&img, 224).unwrap(), img);

        let c = Image::filled(5, 9, 0.25).unwrap();
        assert!(resize_to(&c, 7)
            .unwrap()
            .pixels()
            .iter()
            .all(|&v| v == 0.25));

        let checker = Image::new(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let out = resize_to(&checker, 4).unwrap();
        let t = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];
        for (y, ty) in t.iter().enumerate() {
            for (x, tx) in t.iter().enumerate() {
                let expected = tx * (1.0 - ty) + (1.0 - tx) * ty;
                assert!((out.get(x, y) - expected).abs() < 1e-15, "({x},{y})");
            }
        }
        assert!(resize_to(&checker, 0).is_err());
    }

    #[test]
    fn range_validation() {
        assert!(AffineRanges::default().validate().is_ok());
        let bad = AffineRanges {
            max_scale_frac: 1.0,
            ..AffineRanges::default()
        };
        assert!(bad.validate().is_err());
    }
}
