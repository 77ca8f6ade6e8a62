//! Symmetric positive-definite 3×3 matrices under two metrics.
//!
//! Affine-invariant: d(X,Y) = ‖log(X^{-1/2} Y X^{-1/2})‖_F, with
//! exp_X(V) = X^{1/2} expm(X^{-1/2} V X^{-1/2}) X^{1/2} and the inner
//! product ⟨U,V⟩_X = tr(X⁻¹U X⁻¹V). Tangent vectors are symmetric matrices
//! in the ambient chart.
//!
//! Log-Euclidean: the pullback of the flat Frobenius geometry through the
//! matrix logarithm. Tangent vectors here are displacements in log-space,
//! so exp_X(V) = expm(logm X + V) and log_X(Y) = logm Y − logm X, with the
//! Frobenius inner product independent of the base point.

use alloc::vec::Vec;

use super::lin3::{self, M3};
use super::{GeometryError, SPD_EIGEN_FLOOR};
use crate::num;

/// Symmetrize and clamp eigenvalues from below so arbitrary finite raw input
/// lands strictly inside the positive-definite cone.
pub fn project(raw: &M3) -> Result<M3, GeometryError> {
    lin3::spectral_map(&lin3::symmetrize(raw), |l| Ok(l.max(SPD_EIGEN_FLOOR)))
}

fn whiten(x: &M3, a: &M3) -> Result<(M3, M3, M3), GeometryError> {
    let (xs, xm) = lin3::spd_sqrt_pair(x)?;
    let w = lin3::symmetrize(&lin3::mat3_mul(&lin3::mat3_mul(&xm, a), &xm));
    Ok((xs, xm, w))
}

pub fn airm_distance(x: &M3, y: &M3) -> Result<f64, GeometryError> {
    let (_, _, s) = whiten(x, y)?;
    let (vals, _) = lin3::eigh3(&s)?;
    let mut acc = 0.0;
    for l in vals {
        if l <= 0.0 {
            return Err(GeometryError::NotPositiveDefinite);
        }
        let t = num::ln(l);
        acc += t * t;
    }
    Ok(num::sqrt(acc))
}

pub fn airm_exp(x: &M3, v: &M3) -> Result<M3, GeometryError> {
    let (xs, _, w) = whiten(x, v)?;
    let e = lin3::sym_expm(&w)?;
    Ok(lin3::symmetrize(&lin3::mat3_mul(&lin3::mat3_mul(&xs, &e), &xs)))
}

pub fn airm_log(x: &M3, y: &M3) -> Result<M3, GeometryError> {
    let (xs, _, w) = whiten(x, y)?;
    let l = lin3::sym_logm(&w)?;
    Ok(lin3::symmetrize(&lin3::mat3_mul(&lin3::mat3_mul(&xs, &l), &xs)))
}

pub fn airm_inner(x: &M3, u: &M3, v: &M3) -> Result<f64, GeometryError> {
    let (_, xm, wu) = whiten(x, u)?;
    let wv = lin3::symmetrize(&lin3::mat3_mul(&lin3::mat3_mul(&xm, v), &xm));
    Ok(lin3::frob_inner(&wu, &wv))
}

pub fn airm_norm(x: &M3, v: &M3) -> f64 {
    match whiten(x, v) {
        Ok((_, _, w)) => lin3::frob_norm(&w),
        // The base point is validated SPD, so whitening only fails on
        // non-finite input; surface that as NaN rather than panicking.
        Err(_) => f64::NAN,
    }
}

/// Orthonormal basis of symmetric matrices under the Frobenius inner
/// product: the three diagonal units, then (e_ij + e_ji)/√2 for
/// (i,j) ∈ {(0,1), (0,2), (1,2)}.
pub fn sym_basis() -> Vec<M3> {
    let mut out = Vec::with_capacity(6);
    for i in 0..3 {
        let mut m = [[0.0; 3]; 3];
        m[i][i] = 1.0;
        out.push(m);
    }
    let inv_sqrt2 = core::f64::consts::FRAC_1_SQRT_2;
    for &(i, j) in &[(0usize, 1usize), (0, 2), (1, 2)] {
        let mut m = [[0.0; 3]; 3];
        m[i][j] = inv_sqrt2;
        m[j][i] = inv_sqrt2;
        out.push(m);
    }
    out
}

/// Affine-invariant orthonormal basis at X: {X^{1/2} E X^{1/2}} for E in the
/// Frobenius-orthonormal symmetric basis.
pub fn airm_basis(x: &M3) -> Result<Vec<M3>, GeometryError> {
    let (xs, _) = lin3::spd_sqrt_pair(x)?;
    Ok(sym_basis()
        .into_iter()
        .map(|e| lin3::symmetrize(&lin3::mat3_mul(&lin3::mat3_mul(&xs, &e), &xs)))
        .collect())
}

pub fn le_distance(x: &M3, y: &M3) -> Result<f64, GeometryError> {
    let lx = lin3::sym_logm(x)?;
    let ly = lin3::sym_logm(y)?;
    Ok(lin3::frob_norm(&lin3::mat3_sub(&lx, &ly)))
}

pub fn le_exp(x: &M3, v: &M3) -> Result<M3, GeometryError> {
    let lx = lin3::sym_logm(x)?;
    lin3::sym_expm(&lin3::mat3_add(&lx, v))
}

pub fn le_log(x: &M3, y: &M3) -> Result<M3, GeometryError> {
    let lx = lin3::sym_logm(x)?;
    let ly = lin3::sym_logm(y)?;
    Ok(lin3::mat3_sub(&ly, &lx))
}
