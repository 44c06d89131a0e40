//! Dense linear algebra helpers over `faer`.

use faer::{Mat, Side};
use num_complex::Complex64;

use crate::{Error, Result};

pub type C64 = Complex64;

/// Symmetric eigendecomposition, eigenvalues ascending.
pub fn sym_eig(a: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    if a.nrows() == 0 {
        return Ok((Vec::new(), Mat::zeros(0, 0)));
    }
    let e = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::SingularMatrix(format!("symmetric eigensolver failed: {e:?}")))?;
    let s = e.S();
    let vals = (0..a.nrows()).map(|i| s[i]).collect();
    Ok((vals, e.U().to_owned()))
}

/// Eigenvalues of a general real matrix.
pub fn eigenvalues(a: &Mat<f64>) -> Result<Vec<C64>> {
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    a.eigenvalues()
        .map_err(|e| Error::SingularMatrix(format!("eigensolver failed: {e:?}")))
}

/// Eigenvalues of a general complex matrix.
pub fn eigenvalues_c(a: &Mat<C64>) -> Result<Vec<C64>> {
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    a.eigenvalues()
        .map_err(|e| Error::SingularMatrix(format!("eigensolver failed: {e:?}")))
}

/// Full eigendecomposition of a real matrix: values and unit eigenvectors
/// (columns).
pub fn eigen(a: &Mat<f64>) -> Result<(Vec<C64>, Mat<C64>)> {
    if a.nrows() == 0 {
        return Ok((Vec::new(), Mat::zeros(0, 0)));
    }
    let e = a
        .eigen()
        .map_err(|e| Error::SingularMatrix(format!("eigensolver failed: {e:?}")))?;
    let s = e.S();
    let vals = (0..a.nrows()).map(|i| s[i]).collect();
    Ok((vals, e.U().to_owned()))
}

/// Full eigendecomposition of a complex matrix.
pub fn eigen_c(a: &Mat<C64>) -> Result<(Vec<C64>, Mat<C64>)> {
    if a.nrows() == 0 {
        return Ok((Vec::new(), Mat::zeros(0, 0)));
    }
    let e = a
        .eigen()
        .map_err(|e| Error::SingularMatrix(format!("eigensolver failed: {e:?}")))?;
    let s = e.S();
    let vals = (0..a.nrows()).map(|i| s[i]).collect();
    Ok((vals, e.U().to_owned()))
}

/// Orthonormal basis of the numerical kernel of a square matrix: right
/// singular vectors with `sigma <= rtol * sigma_max`.
pub fn kernel(a: &Mat<f64>, rtol: f64) -> Result<Vec<Vec<f64>>> {
    let n = a.ncols();
    if n == 0 {
        return Ok(Vec::new());
    }
    let svd = a
        .svd()
        .map_err(|e| Error::SingularMatrix(format!("SVD failed: {e:?}")))?;
    let s = svd.S();
    let v = svd.V();
    let smax = (0..n).fold(0.0f64, |m, i| m.max(s[i]));
    Ok((0..n)
        .filter(|&i| s[i] <= rtol * smax.max(1.0))
        .map(|i| (0..n).map(|r| v[(r, i)]).collect())
        .collect())
}

/// `log det a` as (log-modulus, phase in (-pi, pi]) from a partially pivoted
/// LU factorisation. Never forms the determinant itself.
pub fn log_det(a: &Mat<C64>) -> Result<(f64, f64)> {
    let n = a.nrows();
    if n == 0 {
        return Ok((0.0, 0.0));
    }
    let lu = a.partial_piv_lu();
    let u = lu.U();
    let mut log_mod = 0.0;
    let mut phase = 0.0;
    for i in 0..n {
        let d = u[(i, i)];
        let m = d.norm();
        if m == 0.0 || !m.is_finite() {
            return Err(Error::SingularMatrix(format!("zero pivot at {i}")));
        }
        log_mod += m.ln();
        phase += d.arg();
    }
    let (fwd, _) = lu.P().arrays();
    if permutation_is_odd(fwd) {
        phase += std::f64::consts::PI;
    }
    Ok((log_mod, wrap_phase(phase)))
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_phase(x: f64) -> f64 {
    use std::f64::consts::PI;
    let mut y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    }
    y
}

fn permutation_is_odd(p: &[usize]) -> bool {
    let mut seen = vec![false; p.len()];
    let mut transpositions = 0usize;
    for start in 0..p.len() {
        if seen[start] {
            continue;
        }
        let mut len = 0;
        let mut j = start;
        while !seen[j] {
            seen[j] = true;
            j = p[j];
            len += 1;
        }
        transpositions += len - 1;
    }
    transpositions % 2 == 1
}

pub fn to_complex(a: &Mat<f64>) -> Mat<C64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| C64::new(a[(i, j)], 0.0))
}

pub fn to_rows(a: &Mat<f64>) -> Vec<Vec<f64>> {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)]).collect())
        .collect()
}

/// Spectral norm of a symmetric matrix (largest |eigenvalue|).
pub fn sym_norm(a: &Mat<f64>) -> Result<f64> {
    let (vals, _) = sym_eig(a)?;
    Ok(vals.iter().fold(0.0f64, |m, v| m.max(v.abs())))
}

/// Spectral norm of a general real matrix via the largest eigenvalue of AᵀA.
pub fn op_norm(a: &Mat<f64>) -> Result<f64> {
    let ata = a.transpose() * a;
    let (vals, _) = sym_eig(&ata)?;
    Ok(vals.last().copied().unwrap_or(0.0).max(0.0).sqrt())
}

pub fn max_abs(a: &Mat<f64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].abs());
        }
    }
    m
}

pub fn dot_c(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_c(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}
