//! Independent oracles shared by the integration and acceptance suites.
//! Everything here is written from the mathematical definitions, not by
//! calling back into the library paths under test.

#![allow(dead_code)]

use pptex_core::grid::GrayImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dense Gaussian elimination with partial pivoting on a row-major n x n
/// matrix. The direct-solve oracle for the iterative solver.
pub fn dense_solve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&p, &q| {
                m[p * n + col]
                    .abs()
                    .partial_cmp(&m[q * n + col].abs())
                    .unwrap()
            })
            .unwrap();
        assert!(m[pivot * n + col] != 0.0, "singular matrix");
        if pivot != col {
            for c in 0..n {
                m.swap(col * n + c, pivot * n + c);
            }
            x.swap(col, pivot);
        }
        for row in col + 1..n {
            let f = m[row * n + col] / m[col * n + col];
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                m[row * n + c] -= f * m[col * n + c];
            }
            x[row] -= f * x[col];
        }
    }
    for row in (0..n).rev() {
        let mut acc = x[row];
        for c in row + 1..n {
            acc -= m[row * n + c] * x[c];
        }
        x[row] = acc / m[row * n + row];
    }
    x
}

/// Seeded uniform random image with values in [lo, hi).
pub fn random_image(rows: usize, cols: usize, seed: u64, lo: f64, hi: f64) -> GrayImage<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    GrayImage::from_fn(rows, cols, |_, _| rng.gen_range(lo..hi)).unwrap()
}

/// riu2 code of an 8-neighbor bit pattern through bit tricks: circular
/// transitions are the popcount of `pattern XOR rotate(pattern)`.
pub fn independent_riu2_byte(pattern: u8) -> usize {
    let transitions = (pattern ^ pattern.rotate_left(1)).count_ones();
    if transitions <= 2 {
        pattern.count_ones() as usize
    } else {
        9
    }
}

/// Naive double-loop riu2 histogram recomputation straight from the
/// definitions: per-pixel trigonometry, interpolation, thresholding and
/// transition counting.
pub fn naive_riu2_histogram(img: &GrayImage<f64>, p_count: usize, radius: f64) -> Vec<u64> {
    let margin = radius.ceil() as usize;
    let mut bins = vec![0u64; p_count + 2];
    for j in margin..img.cols() - margin {
        for i in margin..img.rows() - margin {
            let center = img.get(i, j);
            let mut bits = Vec::with_capacity(p_count);
            for p in 0..p_count {
                let theta = 2.0 * std::f64::consts::PI * p as f64 / p_count as f64;
                let x = i as f64 - radius * theta.sin();
                let y = j as f64 + radius * theta.cos();
                let g = naive_bilinear(img, x, y);
                bits.push(u8::from(g >= center));
            }
            let mut transitions = usize::from(bits[p_count - 1] != bits[0]);
            for p in 1..p_count {
                transitions += usize::from(bits[p] != bits[p - 1]);
            }
            let code = if transitions <= 2 {
                bits.iter().map(|&b| b as usize).sum()
            } else {
                p_count + 1
            };
            bins[code] += 1;
        }
    }
    bins
}

fn naive_bilinear(img: &GrayImage<f64>, x: f64, y: f64) -> f64 {
    let x = if (x - x.round()).abs() <= 1e-9 { x.round() } else { x };
    let y = if (y - y.round()).abs() <= 1e-9 { y.round() } else { y };
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let i = x0 as usize;
    let j = y0 as usize;
    let v00 = img.get(i, j);
    let top = if fx > 0.0 {
        v00 + fx * (img.get(i + 1, j) - v00)
    } else {
        v00
    };
    if fy > 0.0 {
        let v01 = img.get(i, j + 1);
        let bottom = if fx > 0.0 {
            v01 + fx * (img.get(i + 1, j + 1) - v01)
        } else {
            v01
        };
        top + fy * (bottom - top)
    } else {
        top
    }
}
