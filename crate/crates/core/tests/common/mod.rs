//! Shared oracles for the integration tests.
//!
//! These deliberately re-derive results through routes independent of the
//! library implementation: singular values via one-sided (Hestenes) Jacobi
//! column rotations rather than power iteration, derivatives via central
//! finite differences rather than the analytic formulas under test.

#![allow(dead_code)]

use fuselab_core::linalg::{Matrix, Vector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// All singular values of `m`, descending, via one-sided Jacobi rotations.
///
/// Columns of a working copy are rotated pairwise until mutually orthogonal;
/// their norms are then the singular values.
pub fn svd_singular_values(m: &Matrix) -> Vec<f64> {
    // Work on the tall orientation so columns outnumber rows never.
    let work = if m.rows() >= m.cols() { m.clone() } else { m.transpose() };
    let rows = work.rows();
    let cols = work.cols();
    let mut a: Vec<Vec<f64>> = (0..cols)
        .map(|c| (0..rows).map(|r| work.get(r, c)).collect())
        .collect();

    let scale: f64 = a
        .iter()
        .flat_map(|col| col.iter())
        .fold(0.0f64, |acc, x| acc + x * x)
        .sqrt();
    if scale == 0.0 {
        return vec![0.0; cols];
    }
    let tol = 1e-15 * scale * scale;

    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = 0.0;
                for r in 0..rows {
                    app += a[p][r] * a[p][r];
                    aqq += a[q][r] * a[q][r];
                    apq += a[p][r] * a[q][r];
                }
                if apq.abs() <= tol || apq.abs() <= 1e-15 * (app * aqq).sqrt() {
                    continue;
                }
                rotated = true;
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for r in 0..rows {
                    let vp = a[p][r];
                    let vq = a[q][r];
                    a[p][r] = c * vp - s * vq;
                    a[q][r] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sv: Vec<f64> = a
        .iter()
        .map(|col| col.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    sv.sort_by(|x, y| y.partial_cmp(x).unwrap());
    sv
}

/// Largest singular value via the one-sided Jacobi oracle.
pub fn svd_spectral_norm(m: &Matrix) -> f64 {
    svd_singular_values(m)[0]
}

/// Central-difference Jacobian of a vector-valued function.
pub fn fd_jacobian(f: &dyn Fn(&Vector) -> Vector, x: &Vector, h: f64) -> Matrix {
    let base = f(x);
    let out_dim = base.len();
    let mut jac = Matrix::zeros(out_dim, x.len());
    for c in 0..x.len() {
        let mut xp = x.clone();
        xp[c] += h;
        let mut xm = x.clone();
        xm[c] -= h;
        let fp = f(&xp);
        let fm = f(&xm);
        for r in 0..out_dim {
            jac.set(r, c, (fp[r] - fm[r]) / (2.0 * h));
        }
    }
    jac
}

/// Central-difference gradient of a scalar function over a flat parameter
/// vector.
pub fn fd_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut grad = vec![0.0; x.len()];
    let mut work = x.to_vec();
    for i in 0..x.len() {
        let orig = work[i];
        work[i] = orig + h;
        let fp = f(&work);
        work[i] = orig - h;
        let fm = f(&work);
        work[i] = orig;
        grad[i] = (fp - fm) / (2.0 * h);
    }
    grad
}

/// Relative Frobenius distance `|a - b| / max(|a|, floor)`.
pub fn relative_matrix_error(a: &Matrix, b: &Matrix, floor: f64) -> f64 {
    let diff = a.sub(b);
    let num = diff.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt();
    let den = a.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt();
    num / den.max(floor)
}

/// Relative Euclidean distance between flat vectors.
pub fn relative_vec_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let num: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let den: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    num / den.max(floor)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-scale..scale))
}

pub fn random_vector(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> Vector {
    Vector::from_fn(dim, |_| rng.gen_range(-scale..scale))
}
