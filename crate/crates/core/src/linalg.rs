//! Dense real vectors and matrices with the few decompositions the rest of
//! the crate needs: spectral norm by power iteration, symmetric
//! eigendecomposition by cyclic Jacobi sweeps, and a high-accuracy top
//! singular triple for gradient work.
//!
//! Everything is `f64`, row-major, and sized for desk-scale experiments
//! (hundreds of rows, not millions). No BLAS, no panics on shape errors:
//! fallible operations return [`crate::error::Error`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative convergence tolerance used by [`spectral_norm_default`].
pub const SPECTRAL_NORM_TOL: f64 = 1e-9;
/// Iteration cap used by [`spectral_norm_default`].
pub const SPECTRAL_NORM_MAX_ITER: usize = 1000;

const JACOBI_MAX_SWEEPS: usize = 64;
const SYMMETRY_TOL: f64 = 1e-10;

/// Dense column vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vector(Vec<f64>);

impl Vector {
    /// Builds a vector, rejecting empty or non-finite data.
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::invalid("vector must have positive dimension"));
        }
        if !data.iter().all(|x| x.is_finite()) {
            return Err(Error::invalid("vector entries must be finite"));
        }
        Ok(Vector(data))
    }

    /// Builds a vector without the finiteness scan. Intended for arithmetic
    /// results whose inputs were already validated; divergence is caught at
    /// the consumer (loss checks, estimator propagation errors).
    pub fn from_raw(data: Vec<f64>) -> Self {
        Vector(data)
    }

    pub fn zeros(dim: usize) -> Self {
        Vector(vec![0.0; dim])
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut data = vec![0.0; dim];
        data[index] = 1.0;
        Vector(data)
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize) -> f64) -> Self {
        Vector((0..dim).map(f).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    /// Euclidean norm.
    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scaled(&self, s: f64) -> Vector {
        Vector(self.0.iter().map(|x| x * s).collect())
    }

    pub fn add(&self, other: &Vector) -> Vector {
        debug_assert_eq!(self.len(), other.len());
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        debug_assert_eq!(self.len(), other.len());
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    /// `self += s * other`.
    pub fn add_scaled(&mut self, s: f64, other: &Vector) {
        debug_assert_eq!(self.len(), other.len());
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += s * b;
        }
    }

    /// Concatenates blocks into one vector.
    pub fn concat(blocks: &[Vector]) -> Vector {
        let mut data = Vec::with_capacity(blocks.iter().map(Vector::len).sum());
        for b in blocks {
            data.extend_from_slice(&b.0);
        }
        Vector(data)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

impl std::ops::Index<usize> for Vector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl std::ops::IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

/// Dense matrix, row-major storage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major data, rejecting empty shapes, length
    /// mismatches, and non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("matrix dimensions must be positive"));
        }
        if data.len() != rows * cols {
            return Err(Error::shape(format!(
                "matrix data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        if !data.iter().all(|x| x.is_finite()) {
            return Err(Error::invalid("matrix entries must be finite"));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Row-major construction without the finiteness scan; see
    /// [`Vector::from_raw`].
    pub fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Matrix { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Matrix { rows, cols, data }
    }

    /// Builds from explicit rows; all rows must share one length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("matrix needs at least one row"));
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::shape("rows have unequal lengths".to_string()));
        }
        Matrix::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_vector(&self, r: usize) -> Vector {
        Vector(self.row(r).to_vec())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// `self * x`.
    pub fn matvec(&self, x: &Vector) -> Vector {
        debug_assert_eq!(self.cols, x.len());
        let mut out = vec![0.0; self.rows];
        for (r, slot) in out.iter_mut().enumerate() {
            let row = self.row(r);
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x.as_slice()) {
                acc += a * b;
            }
            *slot = acc;
        }
        Vector(out)
    }

    /// `self^T * x`.
    pub fn matvec_transpose(&self, x: &Vector) -> Vector {
        debug_assert_eq!(self.rows, x.len());
        let mut out = vec![0.0; self.cols];
        for r in 0..self.rows {
            let xr = x[r];
            if xr == 0.0 {
                continue;
            }
            let row = self.row(r);
            for (slot, a) in out.iter_mut().zip(row) {
                *slot += a * xr;
            }
        }
        Vector(out)
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        debug_assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self.get(i, k);
                if aik == 0.0 {
                    continue;
                }
                let brow = other.row(k);
                let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += aik * b;
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    /// Rank-one product `u * v^T`.
    pub fn outer(u: &Vector, v: &Vector) -> Matrix {
        Matrix::from_fn(u.len(), v.len(), |r, c| u[r] * v[c])
    }

    pub fn scaled(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    /// `self += s * other`.
    pub fn add_scaled(&mut self, s: f64, other: &Matrix) {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    /// Frobenius inner product `<self, other>`.
    pub fn frobenius_dot(&self, other: &Matrix) -> f64 {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

/// Frobenius norm; rejects non-finite entries so silent overflow upstream
/// surfaces here instead of polluting downstream bounds.
pub fn frobenius_norm(m: &Matrix) -> Result<f64> {
    if !m.is_finite() {
        return Err(Error::invalid("frobenius_norm: non-finite entry"));
    }
    Ok(m.data.iter().map(|x| x * x).sum::<f64>().sqrt())
}

/// Largest singular value estimate from power iteration.
#[derive(Debug, Clone, Copy)]
pub struct SpectralNormEstimate {
    pub value: f64,
    /// False when the iteration hit `max_iter` before the relative change in
    /// the estimate dropped below `tol`; `value` is then the best iterate.
    pub converged: bool,
    pub iterations: usize,
}

/// Largest singular value of `m` via power iteration on `m^T m`.
///
/// The start vector is the normalized all-ones vector, so the result is
/// deterministic. If that start lies in an invariant subspace that hides the
/// top singular direction (detected through a zero image or immediate
/// stagnation), the iterate is perturbed with basis vectors and iteration
/// continues.
pub fn spectral_norm(m: &Matrix, tol: f64, max_iter: usize) -> Result<SpectralNormEstimate> {
    if !m.is_finite() {
        return Err(Error::invalid("spectral_norm: non-finite entry"));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("spectral_norm: tol must be positive"));
    }
    if max_iter == 0 {
        return Err(Error::invalid("spectral_norm: max_iter must be positive"));
    }
    let scale = frobenius_norm(m)?;
    if scale == 0.0 {
        return Ok(SpectralNormEstimate { value: 0.0, converged: true, iterations: 0 });
    }

    let n = m.cols();
    let inv = 1.0 / (n as f64).sqrt();
    let mut x = Vector::from_fn(n, |_| inv);
    let mut sigma_prev = f64::NAN;
    let mut delta_prev = f64::NAN;
    let mut perturbations = 0usize;
    let mut iterations = 0usize;

    while iterations < max_iter {
        iterations += 1;
        let y = m.matvec(&x);
        let ynorm = y.norm();
        if ynorm <= scale * 1e-150 {
            // x sits in the (numerical) null space; restart from the next
            // basis vector.
            if perturbations >= n {
                return Ok(SpectralNormEstimate { value: 0.0, converged: true, iterations });
            }
            x = Vector::basis(n, perturbations);
            perturbations += 1;
            sigma_prev = f64::NAN;
            delta_prev = f64::NAN;
            continue;
        }
        let sigma = ynorm; // ||m x|| with unit x converges to sigma_max
        let z = m.matvec_transpose(&y);
        let znorm = z.norm();
        if znorm <= scale * scale * 1e-300 {
            if perturbations >= n {
                return Ok(SpectralNormEstimate { value: sigma, converged: true, iterations });
            }
            x = Vector::basis(n, perturbations);
            perturbations += 1;
            sigma_prev = f64::NAN;
            delta_prev = f64::NAN;
            continue;
        }
        let mut next = z.scaled(1.0 / znorm);
        if next.dot(&x) < 0.0 {
            next = next.scaled(-1.0);
        }
        let drift = next.sub(&x).norm();
        if iterations <= 2 && drift <= 1e-14 && perturbations == 0 {
            // The all-ones start is already a fixed direction of m^T m. That
            // is only safe if it is the top one; nudge once to find out.
            let mut nudged = next.clone();
            nudged.add_scaled(1.0, &Vector::basis(n, 0));
            let nn = nudged.norm();
            if nn > 0.0 {
                x = nudged.scaled(1.0 / nn);
                perturbations += 1;
                sigma_prev = f64::NAN;
                delta_prev = f64::NAN;
                continue;
            }
        }
        x = next;
        if sigma_prev.is_finite() {
            let delta = (sigma - sigma_prev).abs();
            let floor = sigma.max(f64::MIN_POSITIVE);
            // The iterates converge geometrically, so the raw step size
            // understates the remaining error when the spectral gap is
            // small. Estimate the geometric tail from the last two steps and
            // stop on that instead; fall back to the raw step when the decay
            // ratio is not yet stable.
            let converged = if delta == 0.0 {
                true
            } else if delta_prev.is_finite() && delta_prev > 0.0 && delta < delta_prev {
                let rho = delta / delta_prev;
                delta * rho / (1.0 - rho) <= tol * floor
            } else {
                delta <= 0.01 * tol * floor
            };
            if converged {
                return Ok(SpectralNormEstimate { value: sigma, converged: true, iterations });
            }
            delta_prev = delta;
        }
        sigma_prev = sigma;
    }

    Ok(SpectralNormEstimate { value: sigma_prev, converged: false, iterations })
}

/// [`spectral_norm`] with tol `1e-9`, max_iter `1000`.
pub fn spectral_norm_default(m: &Matrix) -> Result<SpectralNormEstimate> {
    spectral_norm(m, SPECTRAL_NORM_TOL, SPECTRAL_NORM_MAX_ITER)
}

/// Top singular triple `(sigma, u, v)` with `m v = sigma u`.
#[derive(Debug, Clone)]
pub struct TopSingularTriple {
    pub sigma: f64,
    pub u: Vector,
    pub v: Vector,
    pub converged: bool,
}

/// Top singular triple of `m`, iterated to a tight tolerance on the singular
/// *vector*.
///
/// [`spectral_norm`] stops on the value, whose error is roughly the square of
/// the vector error; gradients of spectrally normalized weights need the
/// vectors themselves, hence the separate, stricter iteration.
pub fn top_singular_triple(m: &Matrix) -> Result<TopSingularTriple> {
    if !m.is_finite() {
        return Err(Error::invalid("top_singular_triple: non-finite entry"));
    }
    let scale = frobenius_norm(m)?;
    let n = m.cols();
    if scale == 0.0 {
        return Ok(TopSingularTriple {
            sigma: 0.0,
            u: Vector::zeros(m.rows()),
            v: Vector::basis(n, 0),
            converged: true,
        });
    }

    let inv = 1.0 / (n as f64).sqrt();
    let mut x = Vector::from_fn(n, |_| inv);
    let mut perturbations = 0usize;
    let mut converged = false;
    let max_iter = 20_000;
    for it in 0..max_iter {
        let y = m.matvec(&x);
        if y.norm() <= scale * 1e-150 {
            if perturbations >= n {
                break;
            }
            x = Vector::basis(n, perturbations);
            perturbations += 1;
            continue;
        }
        let z = m.matvec_transpose(&y);
        let zn = z.norm();
        if zn == 0.0 {
            break;
        }
        let mut next = z.scaled(1.0 / zn);
        if next.dot(&x) < 0.0 {
            next = next.scaled(-1.0);
        }
        let drift = next.sub(&x).norm();
        if it <= 2 && drift <= 1e-14 && perturbations == 0 {
            let mut nudged = next.clone();
            nudged.add_scaled(1.0, &Vector::basis(n, 0));
            let nn = nudged.norm();
            if nn > 0.0 {
                x = nudged.scaled(1.0 / nn);
                perturbations += 1;
                continue;
            }
        }
        x = next;
        if drift <= 1e-13 && it > 2 {
            converged = true;
            break;
        }
    }

    let y = m.matvec(&x);
    let sigma = y.norm();
    let u = if sigma > 0.0 { y.scaled(1.0 / sigma) } else { Vector::zeros(m.rows()) };
    Ok(TopSingularTriple { sigma, u, v: x, converged })
}

/// Eigendecomposition of a symmetric matrix: `m = V diag(values) V^T`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Eigenvalues in descending order.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, ordered like `values`.
    pub vectors: Matrix,
}

/// Full eigendecomposition of a symmetric matrix by cyclic Jacobi sweeps.
///
/// The input must be square and symmetric within `1e-10` relative to its
/// largest entry. Cost is O(n^3) per sweep; sweeps converge quadratically, so
/// desk-scale inputs (n in the hundreds) finish in a handful of sweeps.
pub fn sym_eig(m: &Matrix) -> Result<SymmetricEigen> {
    if m.rows() != m.cols() {
        return Err(Error::invalid("sym_eig: matrix must be square"));
    }
    if !m.is_finite() {
        return Err(Error::invalid("sym_eig: non-finite entry"));
    }
    let n = m.rows();
    let max_abs = m.data.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let sym_tol = SYMMETRY_TOL * max_abs.max(1.0);
    for r in 0..n {
        for c in (r + 1)..n {
            if (m.get(r, c) - m.get(c, r)).abs() > sym_tol {
                return Err(Error::invalid(format!(
                    "sym_eig: matrix not symmetric at ({r},{c})"
                )));
            }
        }
    }

    let mut a = m.clone();
    // Work on the exactly symmetrized copy so roundoff asymmetry cannot bias
    // the sweeps.
    for r in 0..n {
        for c in (r + 1)..n {
            let avg = 0.5 * (a.get(r, c) + a.get(c, r));
            a.set(r, c, avg);
            a.set(c, r, avg);
        }
    }
    let mut v = Matrix::identity(n);
    let frob = frobenius_norm(&a)?;
    if frob == 0.0 {
        return Ok(SymmetricEigen { values: vec![0.0; n], vectors: v });
    }
    let stop = 1e-14 * frob;

    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0f64;
        for r in 0..n {
            for c in (r + 1)..n {
                off += a.get(r, c) * a.get(r, c);
            }
        }
        if (2.0 * off).sqrt() <= stop {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq.abs() <= stop / (n as f64) {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Rotate columns p and q of a (right multiply), then rows
                // (left multiply by the transpose), then accumulate into v.
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a.get(j, j).partial_cmp(&a.get(i, i)).unwrap_or(std::cmp::Ordering::Equal)
    });
    let values: Vec<f64> = order.iter().map(|&i| a.get(i, i)).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| v.get(r, order[c]));
    Ok(SymmetricEigen { values, vectors })
}
