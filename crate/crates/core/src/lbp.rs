//! Rotation-invariant uniform local binary patterns (riu2) and per-image
//! code histograms.
//!
//! Each pixel is compared against `P` neighbors equally spaced on a circle of
//! radius `R`; off-grid neighbors are bilinearly interpolated. Patterns with
//! at most two circular 0/1 transitions map to their bit count (codes
//! `0..=P`), everything else to the single nonuniform bin `P+1`.

use crate::error::{Error, Result};
use crate::grid::GrayImage;
use crate::scalar::Real;

/// Coordinates within this distance of an integer are treated as exact grid
/// nodes, so axis-aligned neighbors are read directly instead of picking up
/// interpolation noise from the trigonometry.
const SNAP_EPS: f64 = 1e-9;

/// Neighborhood specification: `P` sampling points on a circle of radius `R`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbpConfig {
    pub p: usize,
    pub r: f64,
}

impl LbpConfig {
    pub fn new(p: usize, r: f64) -> Result<Self> {
        if p < 4 {
            return Err(Error::InvalidParameter(format!(
                "LBP neighbor count must be >= 4, got {p}"
            )));
        }
        if !(r.is_finite() && r >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "LBP radius must be >= 1, got {r}"
            )));
        }
        Ok(LbpConfig { p, r })
    }

    /// The four neighborhoods used by the shipped descriptor:
    /// (8,1), (16,2), (24,3), (24,4).
    pub fn standard_set() -> Vec<LbpConfig> {
        [(8, 1.0), (16, 2.0), (24, 3.0), (24, 4.0)]
            .into_iter()
            .map(|(p, r)| LbpConfig { p, r })
            .collect()
    }

    /// Number of histogram bins: codes `0..=P` plus the nonuniform bin.
    pub fn bins(&self) -> usize {
        self.p + 2
    }

    /// Border margin inside which pixels lack a full neighborhood.
    pub fn margin(&self) -> usize {
        self.r.ceil() as usize
    }
}

/// Position of neighbor `p` around center `(xc, yc)`:
/// `(xc - R sin(2 pi p / P), yc + R cos(2 pi p / P))`.
pub fn neighbor_coords(xc: f64, yc: f64, p: usize, config: &LbpConfig) -> (f64, f64) {
    debug_assert!(p < config.p);
    let angle = 2.0 * std::f64::consts::PI * p as f64 / config.p as f64;
    (xc - config.r * angle.sin(), yc + config.r * angle.cos())
}

/// Bilinear interpolation at fractional cell coordinates `(x, y)`; exact
/// pixel value at grid nodes.
pub fn sample_bilinear<T: Real>(img: &GrayImage<T>, x: f64, y: f64) -> Result<T> {
    let x = snap(x);
    let y = snap(y);
    let (m, l) = (img.rows() as f64 - 1.0, img.cols() as f64 - 1.0);
    if !(x >= 0.0 && x <= m && y >= 0.0 && y <= l) {
        return Err(Error::OutOfBounds { x, y });
    }
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = T::from_f64_lossy(x - x0);
    let fy = T::from_f64_lossy(y - y0);
    let i = x0 as usize;
    let j = y0 as usize;

    // Lerp form: exact on constants and at grid nodes.
    let v00 = img.get(i, j);
    let top = if x - x0 > 0.0 {
        v00 + fx * (img.get(i + 1, j) - v00)
    } else {
        v00
    };
    if y - y0 > 0.0 {
        let v01 = img.get(i, j + 1);
        let bottom = if x - x0 > 0.0 {
            v01 + fx * (img.get(i + 1, j + 1) - v01)
        } else {
            v01
        };
        Ok(top + fy * (bottom - top))
    } else {
        Ok(top)
    }
}

fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() <= SNAP_EPS {
        r
    } else {
        v
    }
}

/// Number of circular 0/1 transitions in a bit sequence.
pub fn uniformity(bits: &[u8]) -> usize {
    debug_assert!(bits.iter().all(|&b| b <= 1));
    let n = bits.len();
    let mut count = (bits[n - 1] != bits[0]) as usize;
    for p in 1..n {
        count += (bits[p] != bits[p - 1]) as usize;
    }
    count
}

/// riu2 code of a raw bit pattern: bit count if uniform (at most two circular
/// transitions), else the nonuniform code `P+1`.
pub fn riu2_code_from_bits(bits: &[u8]) -> usize {
    if uniformity(bits) <= 2 {
        bits.iter().map(|&b| b as usize).sum()
    } else {
        bits.len() + 1
    }
}

/// riu2 code of the pixel at cell `(xc, yc)`. Ties count as 1: a neighbor
/// equal to the center sets its bit.
pub fn lbp_riu2<T: Real>(
    img: &GrayImage<T>,
    xc: usize,
    yc: usize,
    config: &LbpConfig,
) -> Result<usize> {
    let center = img.get(xc, yc);
    let mut first_bit = 0u8;
    let mut prev_bit = 0u8;
    let mut transitions = 0usize;
    let mut bit_sum = 0usize;
    for p in 0..config.p {
        let (x, y) = neighbor_coords(xc as f64, yc as f64, p, config);
        let bit = (sample_bilinear(img, x, y)? >= center) as u8;
        if p == 0 {
            first_bit = bit;
        } else {
            transitions += (bit != prev_bit) as usize;
        }
        prev_bit = bit;
        bit_sum += bit as usize;
    }
    transitions += (prev_bit != first_bit) as usize;
    Ok(if transitions <= 2 { bit_sum } else { config.p + 1 })
}

/// Histogram of riu2 codes with `P+2` bins.
#[derive(Debug, Clone, PartialEq)]
pub struct LbpHistogram {
    pub config: LbpConfig,
    pub bins: Vec<u64>,
}

impl LbpHistogram {
    pub fn total(&self) -> u64 {
        self.bins.iter().sum()
    }

    /// L1-normalized bin weights; the histogram must be nonempty.
    pub fn normalized<T: Real>(&self) -> Vec<T> {
        let total = T::from_f64_lossy(self.total() as f64);
        self.bins
            .iter()
            .map(|&c| T::from_f64_lossy(c as f64) / total)
            .collect()
    }
}

/// Raw riu2 code counts over the encoding region: all pixels at least
/// `ceil(R)` away from every border. No padding is fabricated.
pub fn lbp_histogram<T: Real>(img: &GrayImage<T>, config: &LbpConfig) -> Result<LbpHistogram> {
    let margin = config.margin();
    let (m, l) = (img.rows(), img.cols());
    if m <= 2 * margin || l <= 2 * margin {
        return Err(Error::EmptyRegion {
            rows: m,
            cols: l,
            radius: config.r,
        });
    }
    let mut bins = vec![0u64; config.bins()];
    for j in margin..l - margin {
        for i in margin..m - margin {
            let code = lbp_riu2(img, i, j, config)?;
            bins[code] += 1;
        }
    }
    Ok(LbpHistogram {
        config: *config,
        bins,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn neighbor_zero_is_straight_along_y() {
        let cfg = LbpConfig::new(8, 1.0).unwrap();
        let (x, y) = neighbor_coords(5.0, 9.0, 0, &cfg);
        assert_eq!((x, y), (5.0, 10.0));
    }

    #[test]
    fn neighbor_quarter_turn() {
        let cfg = LbpConfig::new(8, 1.0).unwrap();
        let (x, y) = neighbor_coords(5.0, 9.0, 2, &cfg);
        assert_abs_diff_eq!(x, 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(y, 9.0, epsilon = 1e-12);
    }

    #[test]
    fn neighbor_eighth_turn() {
        let cfg = LbpConfig::new(8, 1.0).unwrap();
        let (x, y) = neighbor_coords(0.0, 0.0, 1, &cfg);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(x, -h, epsilon = 1e-12);
        assert_abs_diff_eq!(y, h, epsilon = 1e-12);
    }

    #[test]
    fn bilinear_at_nodes_is_exact() {
        let img = GrayImage::from_fn(4, 4, |i, j| (i * 4 + j) as f64 * 1.7).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let v = sample_bilinear(&img, i as f64, j as f64).unwrap();
                assert_eq!(v, img.get(i, j));
            }
        }
    }

    #[test]
    fn bilinear_midpoint_averages() {
        let mut img = GrayImage::<f64>::new(3, 3, 0.0).unwrap();
        img.set(0, 1, 255.0);
        img.set(1, 1, 255.0);
        // Corners (0,0)=(0), (1,0)=(0), (0,1)=255, (1,1)=255.
        let v = sample_bilinear(&img, 0.5, 0.5).unwrap();
        assert_eq!(v, 127.5);
    }

    #[test]
    fn bilinear_preserves_constants_exactly() {
        let img = GrayImage::<f64>::new(5, 5, 13.37).unwrap();
        for &(x, y) in &[(0.25, 3.75), (1.9, 0.1), (3.999, 3.999)] {
            assert_eq!(sample_bilinear(&img, x, y).unwrap(), 13.37);
        }
    }

    #[test]
    fn bilinear_out_of_range_is_an_error() {
        let img = GrayImage::<f64>::new(3, 3, 0.0).unwrap();
        assert!(sample_bilinear(&img, -0.5, 1.0).is_err());
        assert!(sample_bilinear(&img, 1.0, 2.5).is_err());
    }

    #[test]
    fn uniformity_examples() {
        assert_eq!(uniformity(&[1; 8]), 0);
        assert_eq!(uniformity(&[1, 1, 1, 1, 0, 0, 0, 0]), 2);
        assert_eq!(uniformity(&[1, 0, 1, 0, 1, 0, 1, 0]), 8);
    }

    #[test]
    fn riu2_codes_from_bits() {
        assert_eq!(riu2_code_from_bits(&[1; 8]), 8);
        assert_eq!(riu2_code_from_bits(&[0; 8]), 0);
        assert_eq!(riu2_code_from_bits(&[1, 1, 1, 0, 0, 0, 0, 0]), 3);
        assert_eq!(riu2_code_from_bits(&[1, 0, 1, 0, 1, 0, 1, 0]), 9);
    }

    #[test]
    fn riu2_is_rotation_invariant_for_all_byte_patterns() {
        for pattern in 0u32..256 {
            let bits: Vec<u8> = (0..8).map(|b| ((pattern >> b) & 1) as u8).collect();
            let code = riu2_code_from_bits(&bits);
            for shift in 1..8 {
                let mut rotated = bits.clone();
                rotated.rotate_left(shift);
                assert_eq!(riu2_code_from_bits(&rotated), code, "pattern {pattern:#010b}");
            }
        }
    }

    #[test]
    fn constant_patch_codes_as_p() {
        // Ties count as 1, so a flat patch has all bits set.
        let img = GrayImage::<f64>::new(5, 5, 7.0).unwrap();
        let cfg = LbpConfig::new(8, 1.0).unwrap();
        assert_eq!(lbp_riu2(&img, 2, 2, &cfg).unwrap(), 8);
    }

    #[test]
    fn dominant_center_codes_as_zero() {
        let mut img = GrayImage::<f64>::new(5, 5, 10.0).unwrap();
        img.set(2, 2, 200.0);
        let cfg = LbpConfig::new(8, 1.0).unwrap();
        assert_eq!(lbp_riu2(&img, 2, 2, &cfg).unwrap(), 0);
    }

    #[test]
    fn histogram_of_constant_image() {
        let img = GrayImage::<f64>::new(10, 10, 99.0).unwrap();
        let cfg = LbpConfig::new(8, 1.0).unwrap();
        let h = lbp_histogram(&img, &cfg).unwrap();
        assert_eq!(h.bins.len(), 10);
        assert_eq!(h.bins[8], 64);
        assert_eq!(h.total(), 64);

        let cfg = LbpConfig::new(24, 3.0).unwrap();
        let h = lbp_histogram(&img, &cfg).unwrap();
        assert_eq!(h.bins.len(), 26);
        assert_eq!(h.bins[24], 16);
        assert_eq!(h.total(), 16);
    }

    #[test]
    fn histogram_mass_equals_region_size() {
        let img = GrayImage::from_fn(9, 13, |i, j| ((i * 31 + j * 17) % 256) as f64).unwrap();
        for cfg in LbpConfig::standard_set() {
            let margin = cfg.margin();
            if 9 <= 2 * margin || 13 <= 2 * margin {
                continue;
            }
            let h = lbp_histogram(&img, &cfg).unwrap();
            assert_eq!(h.total() as usize, (9 - 2 * margin) * (13 - 2 * margin));
        }
    }

    #[test]
    fn empty_encoding_region_is_an_error() {
        let img = GrayImage::<f64>::new(6, 6, 1.0).unwrap();
        let cfg = LbpConfig::new(24, 3.0).unwrap();
        assert!(matches!(
            lbp_histogram(&img, &cfg),
            Err(Error::EmptyRegion { .. })
        ));
    }

    #[test]
    fn codes_ignore_global_intensity_shift() {
        let img = GrayImage::from_fn(12, 12, |i, j| ((i * 7 + j * 13) % 97) as f64).unwrap();
        let shifted = GrayImage::from_fn(12, 12, |i, j| img.get(i, j) + 41.5).unwrap();
        for cfg in LbpConfig::standard_set() {
            let a = lbp_histogram(&img, &cfg).unwrap();
            let b = lbp_histogram(&shifted, &cfg).unwrap();
            assert_eq!(a.bins, b.bins);
        }
    }

    #[test]
    fn normalized_histogram_sums_to_one() {
        let img = GrayImage::from_fn(10, 10, |i, j| ((i * 5 + j * 3) % 19) as f64).unwrap();
        let cfg = LbpConfig::new(8, 1.0).unwrap();
        let w: Vec<f64> = lbp_histogram(&img, &cfg).unwrap().normalized();
        assert_abs_diff_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert!(w.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn config_validation() {
        assert!(LbpConfig::new(3, 1.0).is_err());
        assert!(LbpConfig::new(8, 0.5).is_err());
        assert!(LbpConfig::new(8, 1.0).is_ok());
        let set = LbpConfig::standard_set();
        assert_eq!(set.len(), 4);
        assert_eq!(set.iter().map(LbpConfig::bins).sum::<usize>(), 80);
    }
}
