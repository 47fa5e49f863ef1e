//! Core image and mesh types shared by the numeric modules.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Minimum image extent along each axis; below this the interior five-point
/// stencil does not exist.
pub const MIN_EXTENT: usize = 3;

/// Dense 2-D grid of real-valued intensities.
///
/// Cell `(i, j)` with `i < rows`, `j < cols` lives at flat index
/// `j * rows + i`, the 0-based counterpart of `k = (j-1)*m + i`. The same
/// ordering is used for the unknowns of the linear systems assembled from an
/// image, so flattening an image and rewrapping a solution vector are both
/// plain copies.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> GrayImage<T> {
    /// Image of the given shape with every cell set to `fill`.
    pub fn new(rows: usize, cols: usize, fill: T) -> Result<Self> {
        Self::validate_shape(rows, cols)?;
        if !fill.is_finite() {
            return Err(Error::InvalidImage(format!("nonfinite fill value {fill}")));
        }
        Ok(GrayImage {
            rows,
            cols,
            data: vec![fill; rows * cols],
        })
    }

    /// Builds an image from a function of the cell coordinates.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        Self::validate_shape(rows, cols)?;
        let mut data = vec![T::zero(); rows * cols];
        for j in 0..cols {
            for i in 0..rows {
                let v = f(i, j);
                if !v.is_finite() {
                    return Err(Error::InvalidImage(format!(
                        "nonfinite value {v} at cell ({i}, {j})"
                    )));
                }
                data[j * rows + i] = v;
            }
        }
        Ok(GrayImage { rows, cols, data })
    }

    /// Wraps an already-flattened buffer (cell `(i, j)` at index `j*rows + i`).
    pub fn from_flat(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        Self::validate_shape(rows, cols)?;
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidImage(format!("nonfinite value {v}")));
        }
        Ok(GrayImage { rows, cols, data })
    }

    fn validate_shape(rows: usize, cols: usize) -> Result<()> {
        if rows < MIN_EXTENT || cols < MIN_EXTENT {
            return Err(Error::InvalidImage(format!(
                "shape {rows}x{cols} below minimum {MIN_EXTENT}x{MIN_EXTENT}"
            )));
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Flat index of cell `(i, j)`; the unknown ordering of assembled systems.
    #[inline]
    pub fn flat_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.rows && j < self.cols);
        j * self.rows + i
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[self.flat_index(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        let k = self.flat_index(i, j);
        self.data[k] = v;
    }

    /// Flattened cell values in unknown order.
    pub fn as_flat(&self) -> &[T] {
        &self.data
    }

    pub fn into_flat(self) -> Vec<T> {
        self.data
    }

    /// `(i, j) -> (j, i)`: shape swapped, values bit-identical.
    pub fn transpose(&self) -> Self {
        let mut data = vec![T::zero(); self.data.len()];
        for j in 0..self.cols {
            for i in 0..self.rows {
                data[i * self.cols + j] = self.data[j * self.rows + i];
            }
        }
        GrayImage {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    pub fn min_value(&self) -> T {
        self.data.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max_value(&self) -> T {
        self.data.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }
}

/// Mesh geometry and damping coefficient for the implicit diffusion step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshParams<T> {
    pub dx: T,
    pub dy: T,
    pub dt: T,
    pub tau: T,
}

impl<T: Real> MeshParams<T> {
    pub fn new(dx: T, dy: T, dt: T, tau: T) -> Result<Self> {
        if !(dx.is_finite() && dx > T::zero()) {
            return Err(Error::InvalidParameter(format!("dx must be > 0, got {dx}")));
        }
        if !(dy.is_finite() && dy > T::zero()) {
            return Err(Error::InvalidParameter(format!("dy must be > 0, got {dy}")));
        }
        if !(dt.is_finite() && dt > T::zero()) {
            return Err(Error::InvalidParameter(format!("dt must be > 0, got {dt}")));
        }
        if !(tau.is_finite() && tau >= T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "tau must be >= 0, got {tau}"
            )));
        }
        Ok(MeshParams { dx, dy, dt, tau })
    }
}

impl<T: Real> Default for MeshParams<T> {
    /// Unit pixel spacing and time step, damping coefficient 5.
    fn default() -> Self {
        MeshParams {
            dx: T::one(),
            dy: T::one(),
            dt: T::one(),
            tau: T::from_f64_lossy(5.0),
        }
    }
}
