//! One implicit pseudo-parabolic time step and multi-step evolution.
//!
//! Each step assembles a five-point-stencil linear system from the current
//! image and solves it with a Jacobi-preconditioned conjugate gradient. The
//! stencil couples every cell to its four axis neighbors; fluxes across the
//! domain boundary are zero, which drops the corresponding coefficients and
//! makes total intensity conserved. The assembled matrix is symmetric and
//! strictly diagonally dominant with positive diagonal, hence SPD.

use crate::error::{Error, Result};
use crate::grid::{GrayImage, MeshParams};
use crate::scalar::Real;

/// Stopping rule for the conjugate-gradient solver: relative residual
/// `||Ax - b|| <= tol * ||b||` within at most `max_iter` iterations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams<T> {
    pub tol: T,
    pub max_iter: usize,
}

impl<T: Real> SolverParams<T> {
    pub fn new(tol: T, max_iter: usize) -> Result<Self> {
        if !(tol.is_finite() && tol > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "solver tol must be > 0, got {tol}"
            )));
        }
        if max_iter == 0 {
            return Err(Error::InvalidParameter(
                "solver max_iter must be >= 1".into(),
            ));
        }
        Ok(SolverParams { tol, max_iter })
    }
}

impl<T: Real> Default for SolverParams<T> {
    fn default() -> Self {
        SolverParams {
            tol: T::from_f64_lossy(1e-8),
            max_iter: 1000,
        }
    }
}

/// Diffusion coefficients averaged onto cell interfaces.
///
/// `gi` holds the interface between `(i, j)` and `(i+1, j)` at index
/// `j*(rows-1) + i`; `gj` the interface between `(i, j)` and `(i, j+1)` at
/// index `j*rows + i`.
#[derive(Debug, Clone)]
pub struct InterfaceCoefficients<T> {
    rows: usize,
    gi: Vec<T>,
    gj: Vec<T>,
}

impl<T: Real> InterfaceCoefficients<T> {
    #[inline]
    pub fn between_rows(&self, i: usize, j: usize) -> T {
        self.gi[j * (self.rows - 1) + i]
    }

    #[inline]
    pub fn between_cols(&self, i: usize, j: usize) -> T {
        self.gj[j * self.rows + i]
    }
}

/// Arithmetic mean of the coefficient field at every cell interface.
///
/// Fails on any nonpositive coefficient: the assembled system is only
/// guaranteed SPD for strictly positive fields.
pub fn interface_coefficients<T: Real>(g: &GrayImage<T>) -> Result<InterfaceCoefficients<T>> {
    let (rows, cols) = (g.rows(), g.cols());
    for j in 0..cols {
        for i in 0..rows {
            let v = g.get(i, j);
            if !(v > T::zero()) {
                return Err(Error::NonPositiveCoefficient {
                    row: i,
                    col: j,
                    value: v.to_f64_lossy(),
                });
            }
        }
    }
    let half = T::from_f64_lossy(0.5);
    let mut gi = vec![T::zero(); (rows - 1) * cols];
    let mut gj = vec![T::zero(); rows * (cols - 1)];
    for j in 0..cols {
        for i in 0..rows - 1 {
            gi[j * (rows - 1) + i] = (g.get(i, j) + g.get(i + 1, j)) * half;
        }
    }
    for j in 0..cols - 1 {
        for i in 0..rows {
            gj[j * rows + i] = (g.get(i, j) + g.get(i, j + 1)) * half;
        }
    }
    Ok(InterfaceCoefficients { rows, gi, gj })
}

/// Sparse SPD system for one implicit time step, stored as per-cell stencil
/// coefficients. Unknown `k = j*rows + i` corresponds to cell `(i, j)`.
///
/// Off-diagonals are stored once per interface (`off_i` links `k` with `k+1`,
/// `off_j` links `k` with `k+rows`), so symmetry holds by construction.
#[derive(Debug, Clone)]
pub struct PentadiagonalSystem<T> {
    rows: usize,
    cols: usize,
    diag: Vec<T>,
    off_i: Vec<T>,
    off_j: Vec<T>,
    rhs: Vec<T>,
}

impl<T: Real> PentadiagonalSystem<T> {
    /// Builds a system from raw stencil coefficients. Intended for tests and
    /// synthetic systems; `assemble_system` is the production path.
    pub fn from_parts(
        rows: usize,
        cols: usize,
        diag: Vec<T>,
        off_i: Vec<T>,
        off_j: Vec<T>,
        rhs: Vec<T>,
    ) -> Result<Self> {
        let n = rows * cols;
        for (name, len, expected) in [
            ("diag", diag.len(), n),
            ("off_i", off_i.len(), (rows - 1) * cols),
            ("off_j", off_j.len(), rows * (cols - 1)),
            ("rhs", rhs.len(), n),
        ] {
            if len != expected {
                return Err(Error::InvalidParameter(format!(
                    "{name} length {len}, expected {expected}"
                )));
            }
        }
        if diag.iter().any(|&d| !(d > T::zero())) {
            return Err(Error::NotPositiveDefinite(
                "system diagonal must be strictly positive".into(),
            ));
        }
        Ok(PentadiagonalSystem {
            rows,
            cols,
            diag,
            off_i,
            off_j,
            rhs,
        })
    }

    pub fn n_unknowns(&self) -> usize {
        self.diag.len()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rhs(&self) -> &[T] {
        &self.rhs
    }

    pub fn diagonal(&self) -> &[T] {
        &self.diag
    }

    /// Off-diagonal coefficient linking cell `(i, j)` to `(i+1, j)`.
    pub fn coeff_down(&self, i: usize, j: usize) -> T {
        self.off_i[j * (self.rows - 1) + i]
    }

    /// Off-diagonal coefficient linking cell `(i, j)` to `(i, j+1)`.
    pub fn coeff_right(&self, i: usize, j: usize) -> T {
        self.off_j[j * self.rows + i]
    }

    /// `y = A x` exploiting the five-point structure.
    pub fn matvec(&self, x: &[T], y: &mut [T]) {
        let (m, l) = (self.rows, self.cols);
        debug_assert_eq!(x.len(), m * l);
        debug_assert_eq!(y.len(), m * l);
        for j in 0..l {
            for i in 0..m {
                let k = j * m + i;
                let mut acc = self.diag[k] * x[k];
                if i > 0 {
                    acc = acc + self.off_i[j * (m - 1) + (i - 1)] * x[k - 1];
                }
                if i + 1 < m {
                    acc = acc + self.off_i[j * (m - 1) + i] * x[k + 1];
                }
                if j > 0 {
                    acc = acc + self.off_j[(j - 1) * m + i] * x[k - m];
                }
                if j + 1 < l {
                    acc = acc + self.off_j[j * m + i] * x[k + m];
                }
                y[k] = acc;
            }
        }
    }

    /// Dense row-major materialization, for small-system oracles and the
    /// structural (symmetry, dominance) checks.
    pub fn to_dense(&self) -> Vec<T> {
        let n = self.n_unknowns();
        let (m, l) = (self.rows, self.cols);
        let mut a = vec![T::zero(); n * n];
        for j in 0..l {
            for i in 0..m {
                let k = j * m + i;
                a[k * n + k] = self.diag[k];
                if i + 1 < m {
                    let c = self.off_i[j * (m - 1) + i];
                    a[k * n + (k + 1)] = c;
                    a[(k + 1) * n + k] = c;
                }
                if j + 1 < l {
                    let c = self.off_j[j * m + i];
                    a[k * n + (k + m)] = c;
                    a[(k + m) * n + k] = c;
                }
            }
        }
        a
    }
}

/// Assembles the implicit-step system for the current image `u` and
/// coefficient field `g`.
///
/// Interior cells carry the five-point stencil
/// `a_off = -(dt + tau)/h^2 * g_interface` and
/// `a_diag = 1 - (sum of off-diagonals)`; cells adjacent to the boundary
/// simply omit the coefficient crossing it (zero flux), both in the matrix
/// and in the second differences of the right-hand side.
pub fn assemble_system<T: Real>(
    u: &GrayImage<T>,
    params: &MeshParams<T>,
    g: &GrayImage<T>,
) -> Result<PentadiagonalSystem<T>> {
    if g.rows() != u.rows() || g.cols() != u.cols() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            got: g.len(),
        });
    }
    let coef = interface_coefficients(g)?;
    let (m, l) = (u.rows(), u.cols());
    let cx = (params.dt + params.tau) / (params.dx * params.dx);
    let cy = (params.dt + params.tau) / (params.dy * params.dy);
    let inv_dx2 = T::one() / (params.dx * params.dx);
    let inv_dy2 = T::one() / (params.dy * params.dy);

    let mut off_i = vec![T::zero(); (m - 1) * l];
    let mut off_j = vec![T::zero(); m * (l - 1)];
    for j in 0..l {
        for i in 0..m - 1 {
            off_i[j * (m - 1) + i] = -cx * coef.between_rows(i, j);
        }
    }
    for j in 0..l - 1 {
        for i in 0..m {
            off_j[j * m + i] = -cy * coef.between_cols(i, j);
        }
    }

    let mut diag = vec![T::zero(); m * l];
    let mut rhs = vec![T::zero(); m * l];
    for j in 0..l {
        for i in 0..m {
            let k = j * m + i;
            let mut off_sum = T::zero();
            // Fluxes across the boundary are zero: a missing neighbor
            // contributes nothing to the diagonal, the off-diagonals or the
            // right-hand side differences.
            let mut flux_x = T::zero();
            let mut flux_y = T::zero();
            if i + 1 < m {
                off_sum += off_i[j * (m - 1) + i];
                flux_x += coef.between_rows(i, j) * (u.get(i + 1, j) - u.get(i, j));
            }
            if i > 0 {
                off_sum += off_i[j * (m - 1) + (i - 1)];
                flux_x -= coef.between_rows(i - 1, j) * (u.get(i, j) - u.get(i - 1, j));
            }
            if j + 1 < l {
                off_sum += off_j[j * m + i];
                flux_y += coef.between_cols(i, j) * (u.get(i, j + 1) - u.get(i, j));
            }
            if j > 0 {
                off_sum += off_j[(j - 1) * m + i];
                flux_y -= coef.between_cols(i, j - 1) * (u.get(i, j) - u.get(i, j - 1));
            }
            diag[k] = T::one() - off_sum;
            rhs[k] = u.get(i, j) - params.tau * (flux_x * inv_dx2 + flux_y * inv_dy2);
        }
    }

    PentadiagonalSystem::from_parts(m, l, diag, off_i, off_j, rhs)
}

/// Solution of a conjugate-gradient solve.
#[derive(Debug, Clone)]
pub struct PcgOutcome<T> {
    pub x: Vec<T>,
    pub iterations: usize,
}

/// Jacobi-preconditioned conjugate gradient on the five-point system.
///
/// Returns `x` with `||Ax - b||_2 <= tol * ||b||_2`. A zero right-hand side
/// short-circuits to the exact solution `x = 0`. Deterministic for fixed
/// inputs.
pub fn pcg_solve<T: Real>(
    sys: &PentadiagonalSystem<T>,
    x0: &[T],
    sp: &SolverParams<T>,
) -> Result<PcgOutcome<T>> {
    let n = sys.n_unknowns();
    if x0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x0.len(),
        });
    }
    let b = sys.rhs();
    let b_norm = norm2(b);
    if b_norm == T::zero() {
        return Ok(PcgOutcome {
            x: vec![T::zero(); n],
            iterations: 0,
        });
    }
    let threshold = sp.tol * b_norm;

    let mut x = x0.to_vec();
    let mut ax = vec![T::zero(); n];
    sys.matvec(&x, &mut ax);
    let mut r: Vec<T> = b.iter().zip(&ax).map(|(&bi, &axi)| bi - axi).collect();

    let inv_diag: Vec<T> = sys.diag.iter().map(|&d| T::one() / d).collect();
    let mut z: Vec<T> = r.iter().zip(&inv_diag).map(|(&ri, &mi)| ri * mi).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![T::zero(); n];

    let mut iterations = 0;
    loop {
        if norm2(&r) <= threshold {
            // Guard against recurrence drift: accept only the true residual.
            sys.matvec(&x, &mut ap);
            for k in 0..n {
                r[k] = b[k] - ap[k];
            }
            if norm2(&r) <= threshold {
                return Ok(PcgOutcome { x, iterations });
            }
            for k in 0..n {
                z[k] = r[k] * inv_diag[k];
            }
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
        }
        if iterations >= sp.max_iter {
            return Err(Error::SolverDidNotConverge {
                iterations,
                residual: (norm2(&r) / b_norm).to_f64_lossy(),
            });
        }

        sys.matvec(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        for k in 0..n {
            z[k] = r[k] * inv_diag[k];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
        rz = rz_next;
        iterations += 1;
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn norm2<T: Real>(v: &[T]) -> T {
    dot(v, v).sqrt()
}

/// One implicit time step with `g == 1` (the shipped configuration).
pub fn diffusion_step<T: Real>(
    u: &GrayImage<T>,
    params: &MeshParams<T>,
    sp: &SolverParams<T>,
) -> Result<GrayImage<T>> {
    let ones = GrayImage::new(u.rows(), u.cols(), T::one())?;
    diffusion_step_with_coefficients(u, params, sp, &ones)
}

/// One implicit time step with an explicit coefficient field; the solve is
/// warm-started from the current image.
pub fn diffusion_step_with_coefficients<T: Real>(
    u: &GrayImage<T>,
    params: &MeshParams<T>,
    sp: &SolverParams<T>,
    g: &GrayImage<T>,
) -> Result<GrayImage<T>> {
    let sys = assemble_system(u, params, g)?;
    let out = pcg_solve(&sys, u.as_flat(), sp)?;
    GrayImage::from_flat(u.rows(), u.cols(), out.x)
}

/// Evolves `u0` through `n_steps` implicit steps, returning all `n_steps + 1`
/// states starting with the untouched input.
pub fn evolve<T: Real>(
    u0: &GrayImage<T>,
    n_steps: usize,
    params: &MeshParams<T>,
    sp: &SolverParams<T>,
) -> Result<Vec<GrayImage<T>>> {
    if n_steps == 0 {
        return Err(Error::InvalidParameter("step count must be >= 1".into()));
    }
    let ones = GrayImage::new(u0.rows(), u0.cols(), T::one())?;
    let mut states = Vec::with_capacity(n_steps + 1);
    states.push(u0.clone());
    for _ in 0..n_steps {
        let next =
            diffusion_step_with_coefficients(states.last().unwrap(), params, sp, &ones)?;
        states.push(next);
    }
    Ok(states)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn defaults() -> (MeshParams<f64>, SolverParams<f64>) {
        (MeshParams::default(), SolverParams::default())
    }

    #[test]
    fn interface_means_of_unit_field_are_one() {
        let g = GrayImage::<f64>::new(4, 5, 1.0).unwrap();
        let c = interface_coefficients(&g).unwrap();
        for j in 0..5 {
            for i in 0..3 {
                assert_eq!(c.between_rows(i, j), 1.0);
            }
        }
        for j in 0..4 {
            for i in 0..4 {
                assert_eq!(c.between_cols(i, j), 1.0);
            }
        }
    }

    #[test]
    fn interface_mean_is_arithmetic() {
        let mut g = GrayImage::<f64>::new(3, 3, 2.0).unwrap();
        g.set(1, 0, 4.0);
        let c = interface_coefficients(&g).unwrap();
        assert_eq!(c.between_rows(0, 0), 3.0);
    }

    #[test]
    fn nonpositive_coefficient_is_an_error() {
        let mut g = GrayImage::<f64>::new(3, 3, 1.0).unwrap();
        g.set(2, 1, 0.0);
        assert!(matches!(
            interface_coefficients(&g),
            Err(Error::NonPositiveCoefficient { row: 2, col: 1, .. })
        ));
    }

    #[test]
    fn stencil_golden_values_at_defaults() {
        // dt = dx = dy = 1, tau = 5, g == 1: off-diagonals -6, interior
        // diagonal 4*(1+5)+1 = 25, edge 19, corner 13.
        let (mesh, _) = defaults();
        let u = GrayImage::from_fn(4, 5, |i, j| (i * 5 + j) as f64).unwrap();
        let g = GrayImage::new(4, 5, 1.0).unwrap();
        let sys = assemble_system(&u, &mesh, &g).unwrap();

        assert_eq!(sys.coeff_down(1, 2), -6.0);
        assert_eq!(sys.coeff_right(1, 2), -6.0);
        let diag_at = |i: usize, j: usize| sys.diagonal()[j * 4 + i];
        assert_eq!(diag_at(1, 2), 25.0);
        assert_eq!(diag_at(0, 0), 13.0);
        assert_eq!(diag_at(3, 4), 13.0);
        assert_eq!(diag_at(0, 2), 19.0);
        assert_eq!(diag_at(2, 0), 19.0);
    }

    #[test]
    fn constant_image_rhs_is_the_constant() {
        let mesh = MeshParams::new(0.5, 2.0, 0.25, 3.0).unwrap();
        let u = GrayImage::<f64>::new(5, 4, 11.25).unwrap();
        let g = GrayImage::from_fn(5, 4, |i, j| 1.0 + 0.1 * (i + 2 * j) as f64).unwrap();
        let sys = assemble_system(&u, &mesh, &g).unwrap();
        for &b in sys.rhs() {
            assert_abs_diff_eq!(b, 11.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn pcg_identity_system_returns_rhs() {
        let b: Vec<f64> = (0..12).map(|k| (k as f64) * 0.7 - 3.0).collect();
        let sys = PentadiagonalSystem::from_parts(
            4,
            3,
            vec![1.0; 12],
            vec![0.0; 9],
            vec![0.0; 8],
            b.clone(),
        )
        .unwrap();
        let out = pcg_solve(&sys, &vec![0.0; 12], &SolverParams::default()).unwrap();
        assert_eq!(out.x, b);
    }

    #[test]
    fn pcg_zero_rhs_is_zero_in_zero_iterations() {
        let sys = PentadiagonalSystem::from_parts(
            3,
            3,
            vec![2.0; 9],
            vec![-0.5; 6],
            vec![-0.5; 6],
            vec![0.0; 9],
        )
        .unwrap();
        let out = pcg_solve(&sys, &vec![0.0; 9], &SolverParams::default()).unwrap();
        assert_eq!(out.x, vec![0.0; 9]);
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn pcg_reports_non_convergence() {
        let (mesh, _) = defaults();
        let u = GrayImage::from_fn(6, 6, |i, j| ((i * 7 + j * 3) % 11) as f64).unwrap();
        let g = GrayImage::new(6, 6, 1.0).unwrap();
        let sys = assemble_system(&u, &mesh, &g).unwrap();
        let sp = SolverParams::new(1e-14, 1).unwrap();
        match pcg_solve(&sys, &vec![0.0; 36], &sp) {
            Err(Error::SolverDidNotConverge { iterations, residual }) => {
                assert_eq!(iterations, 1);
                assert!(residual > 0.0);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn constant_image_is_a_fixed_point() {
        let (mesh, sp) = defaults();
        let u = GrayImage::<f64>::new(5, 5, 42.0).unwrap();
        let next = diffusion_step(&u, &mesh, &sp).unwrap();
        for k in 0..next.len() {
            assert_abs_diff_eq!(next.as_flat()[k], 42.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn evolve_matches_repeated_steps_exactly() {
        let (mesh, sp) = defaults();
        let u = GrayImage::from_fn(5, 4, |i, j| ((3 * i + 5 * j) % 17) as f64 * 13.0).unwrap();
        let states = evolve(&u, 2, &mesh, &sp).unwrap();
        assert_eq!(states.len(), 3);
        assert_eq!(states[0], u);
        let s1 = diffusion_step(&u, &mesh, &sp).unwrap();
        let s2 = diffusion_step(&s1, &mesh, &sp).unwrap();
        assert_eq!(states[1], s1);
        assert_eq!(states[2], s2);
    }

    #[test]
    fn evolve_constant_stays_constant() {
        let (mesh, sp) = defaults();
        let u = GrayImage::<f64>::new(4, 4, 9.0).unwrap();
        let states = evolve(&u, 50, &mesh, &sp).unwrap();
        assert_eq!(states.len(), 51);
        for s in &states {
            for &v in s.as_flat() {
                assert_abs_diff_eq!(v, 9.0, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn evolve_rejects_zero_steps() {
        let (mesh, sp) = defaults();
        let u = GrayImage::<f64>::new(4, 4, 9.0).unwrap();
        assert!(evolve(&u, 0, &mesh, &sp).is_err());
    }
}
