//! Grayscale image loading and saving.
//!
//! Inputs are 8-bit grayscale PGM (binary `P5` and ASCII `P2`) or PNG. Color
//! PNG is converted to luma by integer rounding of `0.299 R + 0.587 G +
//! 0.114 B`. Values map to reals 0.0-255.0 without rescaling. Output is
//! binary PGM with values clamped to [0, 255] and rounded; the in-memory
//! pipeline keeps full precision throughout.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::GrayImage;
use crate::scalar::Real;

/// File extensions recognized by [`load_image`] and the dataset scanner.
pub fn is_supported_image(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()),
        Some(ref e) if e == "pgm" || e == "pnm" || e == "png"
    )
}

/// Loads a grayscale image, dispatching on the file extension.
pub fn load_image<T: Real>(path: &Path) -> Result<GrayImage<T>> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    match ext.as_str() {
        "pgm" | "pnm" => load_pgm(path),
        "png" => load_png(path),
        other => Err(Error::image_format(
            path,
            format!("unsupported image extension '{other}' (expected pgm, pnm or png)"),
        )),
    }
}

/// Loads a binary (`P5`) or ASCII (`P2`) PGM file.
pub fn load_pgm<T: Real>(path: &Path) -> Result<GrayImage<T>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pgm(&bytes, path)
}

fn parse_pgm<T: Real>(bytes: &[u8], path: &Path) -> Result<GrayImage<T>> {
    let mut scan = PgmScanner { bytes, pos: 0 };
    let magic = scan
        .next_token()
        .ok_or_else(|| Error::image_format(path, "missing PGM magic"))?;
    let binary = match magic {
        b"P5" => true,
        b"P2" => false,
        _ => {
            return Err(Error::image_format(
                path,
                format!("unsupported magic {:?}", String::from_utf8_lossy(magic)),
            ))
        }
    };
    let width = scan.next_usize(path, "width")?;
    let height = scan.next_usize(path, "height")?;
    let maxval = scan.next_usize(path, "maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::image_format(
            path,
            format!("maxval {maxval} unsupported (8-bit only)"),
        ));
    }
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::image_format(path, "image dimensions overflow"))?;

    let mut values = Vec::with_capacity(n);
    if binary {
        // Exactly one whitespace byte separates the header from the raster.
        let data_start = scan.pos + 1;
        if scan.pos >= bytes.len() || !bytes[scan.pos].is_ascii_whitespace() {
            return Err(Error::image_format(path, "malformed P5 header terminator"));
        }
        let raster = &bytes[data_start..];
        if raster.len() < n {
            return Err(Error::image_format(
                path,
                format!("raster truncated: expected {n} bytes, got {}", raster.len()),
            ));
        }
        values.extend(raster[..n].iter().map(|&b| b as usize));
    } else {
        for _ in 0..n {
            values.push(scan.next_usize(path, "pixel")?);
        }
    }
    if let Some(&v) = values.iter().find(|&&v| v > maxval) {
        return Err(Error::image_format(
            path,
            format!("pixel value {v} exceeds maxval {maxval}"),
        ));
    }

    // File raster is scanline order: y (row) outer, x (column) inner.
    let mut img = GrayImage::new(height, width, T::zero())?;
    for y in 0..height {
        for x in 0..width {
            img.set(y, x, T::from_f64_lossy(values[y * width + x] as f64));
        }
    }
    Ok(img)
}

struct PgmScanner<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> PgmScanner<'a> {
    fn next_token(&mut self) -> Option<&'a [u8]> {
        loop {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.pos < self.bytes.len() && self.bytes[self.pos] == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
                continue;
            }
            break;
        }
        if self.pos >= self.bytes.len() {
            return None;
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        Some(&self.bytes[start..self.pos])
    }

    fn next_usize(&mut self, path: &Path, what: &str) -> Result<usize> {
        let tok = self
            .next_token()
            .ok_or_else(|| Error::image_format(path, format!("missing {what}")))?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| {
                Error::image_format(
                    path,
                    format!("invalid {what} token {:?}", String::from_utf8_lossy(tok)),
                )
            })
    }
}

/// Loads a PNG, converting color to luma by `round(0.299 R + 0.587 G + 0.114 B)`.
pub fn load_png<T: Real>(path: &Path) -> Result<GrayImage<T>> {
    let dynimg = image::open(path)
        .map_err(|e| Error::image_format(path, format!("PNG decode failed: {e}")))?;
    let rgb = dynimg.to_rgb8();
    let (width, height) = rgb.dimensions();
    let mut img = GrayImage::new(height as usize, width as usize, T::zero())?;
    for (x, y, px) in rgb.enumerate_pixels() {
        let [r, g, b] = px.0;
        let luma = (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64).round();
        img.set(y as usize, x as usize, T::from_f64_lossy(luma));
    }
    Ok(img)
}

/// Writes a binary `P5` PGM with maxval 255. Values are clamped to [0, 255]
/// and rounded for output only.
pub fn save_pgm<T: Real>(img: &GrayImage<T>, path: &Path) -> Result<()> {
    let mut out = Vec::with_capacity(img.len() + 32);
    write!(out, "P5\n{} {}\n255\n", img.cols(), img.rows()).expect("vec write");
    for y in 0..img.rows() {
        for x in 0..img.cols() {
            let v = img.get(y, x).to_f64_lossy().round().clamp(0.0, 255.0);
            out.push(v as u8);
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
