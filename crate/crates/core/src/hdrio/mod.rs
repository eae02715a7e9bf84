//! HDR raster I/O: Radiance RGBE and PFM codecs plus calibrated luminance access.

mod pfm;
mod rgbe;

pub use pfm::{read_pfm, read_pfm_gray, write_pfm, write_pfm_gray};
pub use rgbe::{read_hdr, write_hdr};

use crate::raster::Raster;
use crate::scalar::Real;

/// Single-channel luminance plane in the same units as its source image.
pub type LumaMap<T> = Raster<T>;

/// Rec. 709 luma weights; the standard choice for HD content.
pub const LUMA_WEIGHTS: [f64; 3] = [0.2126, 0.7152, 0.0722];

/// Linear-radiance RGB raster with optional absolute-luminance calibration.
///
/// `nits_per_unit` maps stored values to cd/m²: calibrated content stores
/// 1.0 (values already are cd/m²); decoded files default to 1.0 and are
/// rescaled by the display module before simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct HdrImage<T = f64> {
    width: usize,
    height: usize,
    /// Interleaved RGB, row-major, top-left origin.
    data: Vec<T>,
    nits_per_unit: T,
}

impl<T: Real> HdrImage<T> {
    pub fn new(width: usize, height: usize) -> Self {
        assert!(width >= 1 && height >= 1, "image dimensions must be >= 1");
        Self {
            width,
            height,
            data: vec![T::zero(); width * height * 3],
            nits_per_unit: T::one(),
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), width * height * 3, "image data length mismatch");
        Self {
            width,
            height,
            data,
            nits_per_unit: T::one(),
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [T; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
            nits_per_unit: T::one(),
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [T; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [T; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// Interleaved RGB values.
    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn nits_per_unit(&self) -> T {
        self.nits_per_unit
    }

    pub fn with_nits_per_unit(mut self, nits: T) -> Self {
        self.nits_per_unit = nits;
        self
    }

    /// True when all channel values are finite and non-negative.
    pub fn is_valid(&self) -> bool {
        self.data.iter().all(|v| v.is_finite() && *v >= T::zero())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
            nits_per_unit: self.nits_per_unit,
        }
    }

    pub fn scale(&self, factor: T) -> Self {
        self.map(|v| v * factor)
    }

    pub fn max_channel(&self) -> T {
        self.data.iter().fold(T::zero(), |a, &b| a.max(b))
    }

    pub fn same_size(&self, other: &Self) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// Per-pixel Rec. 709 luminance.
pub fn luminance<T: Real>(image: &HdrImage<T>) -> LumaMap<T> {
    let wr = T::of(LUMA_WEIGHTS[0]);
    let wg = T::of(LUMA_WEIGHTS[1]);
    let wb = T::of(LUMA_WEIGHTS[2]);
    let data = image
        .as_slice()
        .chunks_exact(3)
        .map(|px| wr * px[0] + wg * px[1] + wb * px[2])
        .collect();
    Raster::from_vec(image.width(), image.height(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn luminance_weights_sum_to_one() {
        let img = HdrImage::<f64>::from_fn(2, 2, |_, _| [1.0, 1.0, 1.0]);
        let luma = luminance(&img);
        for &v in luma.iter() {
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn luminance_red_weight() {
        let img = HdrImage::<f64>::from_fn(1, 1, |_, _| [1.0, 0.0, 0.0]);
        assert_eq!(luminance(&img).get(0, 0), 0.2126);
    }

    #[test]
    fn luminance_matches_per_pixel_oracle() {
        // brute-force per-pixel oracle over a deterministic pseudo-random image
        let img = HdrImage::<f64>::from_fn(13, 7, |x, y| {
            let t = (x * 31 + y * 17) as f64;
            [(t * 0.11).sin().abs(), (t * 0.07).cos().abs(), (t * 0.05).sin().abs()]
        });
        let luma = luminance(&img);
        for y in 0..7 {
            for x in 0..13 {
                let [r, g, b] = img.pixel(x, y);
                let expect = 0.2126 * r + 0.7152 * g + 0.0722 * b;
                assert_eq!(luma.get(x, y), expect);
            }
        }
    }

    #[test]
    fn luminance_is_linear_in_scale() {
        let img = HdrImage::<f64>::from_fn(5, 5, |x, y| {
            [(x + 1) as f64, (y + 1) as f64, (x + y) as f64]
        });
        // powers of two scale exactly in binary floating point
        let scaled = img.scale(0.25);
        let l1 = luminance(&img);
        let l2 = luminance(&scaled);
        for (a, b) in l1.iter().zip(l2.iter()) {
            assert_eq!(*a * 0.25, *b);
        }
    }
}
