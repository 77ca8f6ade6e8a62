//! Small fixed-size linear algebra: 3-vectors, quaternions, and symmetric
//! 3×3 eigendecomposition (cyclic Jacobi) with spectral matrix functions.

use super::GeometryError;
use crate::num;

pub type V3 = [f64; 3];
pub type M3 = [[f64; 3]; 3];
/// Quaternion stored scalar-first: [w, x, y, z].
pub type Quat = [f64; 4];

// ---- 3-vectors --------------------------------------------------------------

#[inline]
pub fn dot3(a: &V3, b: &V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm3(a: &V3) -> f64 {
    num::sqrt(dot3(a, a))
}

#[inline]
pub fn cross3(a: &V3, b: &V3) -> V3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn scale3(a: &V3, s: f64) -> V3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn add3(a: &V3, b: &V3) -> V3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub3(a: &V3, b: &V3) -> V3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn axpy3(acc: &mut V3, s: f64, v: &V3) {
    acc[0] += s * v[0];
    acc[1] += s * v[1];
    acc[2] += s * v[2];
}

// ---- 3×3 matrices -----------------------------------------------------------

pub const EYE3: M3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

pub fn mat3_mul(a: &M3, b: &M3) -> M3 {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for k in 0..3 {
            let aik = a[i][k];
            for j in 0..3 {
                c[i][j] += aik * b[k][j];
            }
        }
    }
    c
}

pub fn mat3_transpose(a: &M3) -> M3 {
    let mut t = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            t[i][j] = a[j][i];
        }
    }
    t
}

pub fn mat3_add(a: &M3, b: &M3) -> M3 {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = a[i][j] + b[i][j];
        }
    }
    c
}

pub fn mat3_sub(a: &M3, b: &M3) -> M3 {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = a[i][j] - b[i][j];
        }
    }
    c
}

pub fn mat3_scale(a: &M3, s: f64) -> M3 {
    let mut c = *a;
    for row in c.iter_mut() {
        for v in row.iter_mut() {
            *v *= s;
        }
    }
    c
}

pub fn symmetrize(a: &M3) -> M3 {
    let mut s = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            s[i][j] = 0.5 * (a[i][j] + a[j][i]);
        }
    }
    s
}

#[inline]
pub fn frob_inner(a: &M3, b: &M3) -> f64 {
    let mut s = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            s += a[i][j] * b[i][j];
        }
    }
    s
}

#[inline]
pub fn frob_norm(a: &M3) -> f64 {
    num::sqrt(frob_inner(a, a))
}

pub fn mat3_is_finite(a: &M3) -> bool {
    a.iter().all(|row| row.iter().all(|v| v.is_finite()))
}

// ---- symmetric eigendecomposition -------------------------------------------

/// Eigendecomposition of a symmetric 3×3 matrix by cyclic Jacobi rotations
/// (the documented choice for the fixed 3×3 case: unconditionally convergent
/// and accurate to machine precision in a handful of sweeps).
///
/// Returns eigenvalues in ascending order and eigenvectors as the columns of
/// the returned matrix, so `a = V · diag(vals) · Vᵀ`.
pub fn eigh3(a: &M3) -> Result<([f64; 3], M3), GeometryError> {
    if !mat3_is_finite(a) {
        return Err(GeometryError::NonFinite);
    }
    let mut b = symmetrize(a);
    let mut v = EYE3;
    let scale = frob_norm(&b).max(1.0);
    let tol = 1e-15 * scale;
    let mut converged = false;
    for _sweep in 0..64 {
        let off = num::sqrt(
            b[0][1] * b[0][1] + b[0][2] * b[0][2] + b[1][2] * b[1][2],
        );
        if off <= tol {
            converged = true;
            break;
        }
        for &(p, q) in &[(0usize, 1usize), (0, 2), (1, 2)] {
            let bpq = b[p][q];
            if num::abs(bpq) <= 1e-300 {
                continue;
            }
            let theta = (b[q][q] - b[p][p]) / (2.0 * bpq);
            let t = if theta >= 0.0 {
                1.0 / (theta + num::sqrt(theta * theta + 1.0))
            } else {
                -1.0 / (-theta + num::sqrt(theta * theta + 1.0))
            };
            let c = 1.0 / num::sqrt(t * t + 1.0);
            let s = t * c;
            // Rotate rows/columns p and q of the symmetric matrix.
            let bpp = b[p][p];
            let bqq = b[q][q];
            b[p][p] = bpp - t * bpq;
            b[q][q] = bqq + t * bpq;
            b[p][q] = 0.0;
            b[q][p] = 0.0;
            let r = 3 - p - q; // the remaining index
            let brp = b[r][p];
            let brq = b[r][q];
            b[r][p] = c * brp - s * brq;
            b[p][r] = b[r][p];
            b[r][q] = s * brp + c * brq;
            b[q][r] = b[r][q];
            for row in 0..3 {
                let vp = v[row][p];
                let vq = v[row][q];
                v[row][p] = c * vp - s * vq;
                v[row][q] = s * vp + c * vq;
            }
        }
    }
    if !converged {
        return Err(GeometryError::EigenFailure);
    }
    let mut vals = [b[0][0], b[1][1], b[2][2]];
    // Sort ascending, permuting eigenvector columns along.
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| vals[i].partial_cmp(&vals[j]).unwrap_or(core::cmp::Ordering::Equal));
    let sorted_vals = [vals[order[0]], vals[order[1]], vals[order[2]]];
    let mut sorted_vecs = [[0.0; 3]; 3];
    for (new_col, &old_col) in order.iter().enumerate() {
        for row in 0..3 {
            sorted_vecs[row][new_col] = v[row][old_col];
        }
    }
    vals = sorted_vals;
    Ok((vals, sorted_vecs))
}

/// `V · diag(f(λᵢ)) · Vᵀ` for a symmetric input.
pub fn spectral_map(
    a: &M3,
    mut f: impl FnMut(f64) -> Result<f64, GeometryError>,
) -> Result<M3, GeometryError> {
    let (vals, vecs) = eigh3(a)?;
    let mut mapped = [0.0; 3];
    for (m, &l) in mapped.iter_mut().zip(&vals) {
        *m = f(l)?;
    }
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut s = 0.0;
            for k in 0..3 {
                s += vecs[i][k] * mapped[k] * vecs[j][k];
            }
            out[i][j] = s;
        }
    }
    Ok(symmetrize(&out))
}

/// Matrix logarithm of a symmetric positive-definite matrix.
pub fn sym_logm(a: &M3) -> Result<M3, GeometryError> {
    spectral_map(a, |l| {
        if l <= 0.0 {
            Err(GeometryError::NotPositiveDefinite)
        } else {
            Ok(num::ln(l))
        }
    })
}

/// Matrix exponential of a symmetric matrix.
pub fn sym_expm(a: &M3) -> Result<M3, GeometryError> {
    spectral_map(a, |l| Ok(num::exp(l)))
}

/// Square root and inverse square root of a symmetric positive-definite
/// matrix, from a single eigendecomposition.
pub fn spd_sqrt_pair(a: &M3) -> Result<(M3, M3), GeometryError> {
    let (vals, vecs) = eigh3(a)?;
    if vals[0] <= 0.0 {
        return Err(GeometryError::NotPositiveDefinite);
    }
    let mut sqrt_m = [[0.0; 3]; 3];
    let mut inv_sqrt_m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut s = 0.0;
            let mut si = 0.0;
            for k in 0..3 {
                let r = num::sqrt(vals[k]);
                s += vecs[i][k] * r * vecs[j][k];
                si += vecs[i][k] / r * vecs[j][k];
            }
            sqrt_m[i][j] = s;
            inv_sqrt_m[i][j] = si;
        }
    }
    Ok((symmetrize(&sqrt_m), symmetrize(&inv_sqrt_m)))
}

// ---- quaternions ------------------------------------------------------------

#[inline]
pub fn quat_dot(a: &Quat, b: &Quat) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

#[inline]
pub fn quat_norm(q: &Quat) -> f64 {
    num::sqrt(quat_dot(q, q))
}

pub fn quat_conj(q: &Quat) -> Quat {
    [q[0], -q[1], -q[2], -q[3]]
}

pub fn quat_mul(a: &Quat, b: &Quat) -> Quat {
    [
        a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
        a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
        a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
        a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
    ]
}

/// Canonical sign: leading component ≥ 0; on an exactly-zero leading
/// component, the first nonzero of the vector part is made positive so the
/// representative is still unique.
pub fn quat_canonical_sign(q: &Quat) -> Quat {
    let flip = if q[0] != 0.0 {
        q[0] < 0.0
    } else {
        let first = q.iter().skip(1).copied().find(|v| *v != 0.0).unwrap_or(0.0);
        first < 0.0
    };
    if flip {
        [-q[0], -q[1], -q[2], -q[3]]
    } else {
        *q
    }
}

/// Unit quaternion for the rotation-vector `v` (axis times angle):
/// `[cos(θ/2), sin(θ/2)·axis]` with a series fallback near θ = 0.
pub fn quat_exp_rotvec(v: &V3) -> Quat {
    let theta = norm3(v);
    let (w, k) = if theta < 1e-8 {
        // sin(θ/2)/θ = 1/2 − θ²/48 + O(θ⁴)
        (num::cos(0.5 * theta), 0.5 - theta * theta / 48.0)
    } else {
        (num::cos(0.5 * theta), num::sin(0.5 * theta) / theta)
    };
    [w, k * v[0], k * v[1], k * v[2]]
}

/// Rotation vector of the relative rotation carrying `q1` to `q2` along the
/// shorter arc, i.e. the SO(3) log in the axis-angle chart at `q1`.
/// Errors when the pair is within the cut-locus tolerance of angle π.
pub fn quat_log_relative(q1: &Quat, q2: &Quat) -> Result<V3, GeometryError> {
    let mut rel = quat_mul(&quat_conj(q1), q2);
    // Shorter arc: representative with nonnegative scalar part.
    if rel[0] < 0.0 {
        rel = [-rel[0], -rel[1], -rel[2], -rel[3]];
    }
    let vec = [rel[1], rel[2], rel[3]];
    let s = norm3(&vec);
    let theta = 2.0 * num::atan2(s, rel[0]);
    if theta >= core::f64::consts::PI - super::CUT_LOCUS_TOL {
        return Err(GeometryError::CutLocus);
    }
    if s < 1e-9 {
        // θ/s → 2/w as s → 0 (w ≈ 1 away from the cut locus).
        return Ok(scale3(&vec, 2.0 / rel[0]));
    }
    Ok(scale3(&vec, theta / s))
}

/// Relative rotation angle 2·atan2(‖vec(q₁⁻¹q₂)‖, |scalar(q₁⁻¹q₂)|) ∈ [0, π].
pub fn quat_distance(q1: &Quat, q2: &Quat) -> f64 {
    let rel = quat_mul(&quat_conj(q1), q2);
    let s = norm3(&[rel[1], rel[2], rel[3]]);
    2.0 * num::atan2(s, num::abs(rel[0]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_mat_close(a: &M3, b: &M3, tol: f64) {
        for i in 0..3 {
            for j in 0..3 {
                assert!(
                    (a[i][j] - b[i][j]).abs() <= tol,
                    "entry ({i},{j}): {} vs {}",
                    a[i][j],
                    b[i][j]
                );
            }
        }
    }

    #[test]
    fn eigh3_diagonal_matrix_is_fixed_point() {
        let d = [[3.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 2.0]];
        let (vals, vecs) = eigh3(&d).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-14);
        assert!((vals[1] - 2.0).abs() < 1e-14);
        assert!((vals[2] - 3.0).abs() < 1e-14);
        // Columns are signed unit axes.
        for c in 0..3 {
            let col = [vecs[0][c], vecs[1][c], vecs[2][c]];
            assert!((norm3(&col) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn eigh3_known_2x2_block() {
        // [[2,1,0],[1,2,0],[0,0,5]] has eigenvalues 1, 3, 5.
        let a = [[2.0, 1.0, 0.0], [1.0, 2.0, 0.0], [0.0, 0.0, 5.0]];
        let (vals, _) = eigh3(&a).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-13);
        assert!((vals[1] - 3.0).abs() < 1e-13);
        assert!((vals[2] - 5.0).abs() < 1e-13);
    }

    #[test]
    fn eigh3_reconstructs_random_symmetric_matrices() {
        use crate::rng;
        let mut r = rng::seeded(11, 0);
        for _ in 0..200 {
            let mut a = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in i..3 {
                    let v = rng::standard_normal(&mut r) * 2.0;
                    a[i][j] = v;
                    a[j][i] = v;
                }
            }
            let (vals, vecs) = eigh3(&a).unwrap();
            // Reconstruction.
            let mut rec = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    for k in 0..3 {
                        rec[i][j] += vecs[i][k] * vals[k] * vecs[j][k];
                    }
                }
            }
            assert_mat_close(&a, &rec, 1e-12);
            // Orthonormal columns.
            let vt_v = mat3_mul(&mat3_transpose(&vecs), &vecs);
            assert_mat_close(&vt_v, &EYE3, 1e-13);
            // Ascending values.
            assert!(vals[0] <= vals[1] && vals[1] <= vals[2]);
        }
    }

    #[test]
    fn spectral_functions_are_mutually_inverse() {
        use crate::rng;
        let mut r = rng::seeded(12, 0);
        for _ in 0..100 {
            // Random SPD via AᵀA + floor.
            let mut g = [[0.0; 3]; 3];
            for row in g.iter_mut() {
                for v in row.iter_mut() {
                    *v = rng::standard_normal(&mut r);
                }
            }
            let spd = mat3_add(&mat3_mul(&mat3_transpose(&g), &g), &mat3_scale(&EYE3, 0.05));
            let log = sym_logm(&spd).unwrap();
            let back = sym_expm(&log).unwrap();
            assert_mat_close(&spd, &back, 1e-10 * (1.0 + frob_norm(&spd)));
            let (s, si) = spd_sqrt_pair(&spd).unwrap();
            assert_mat_close(&mat3_mul(&s, &s), &spd, 1e-11 * (1.0 + frob_norm(&spd)));
            assert_mat_close(&mat3_mul(&s, &si), &EYE3, 1e-11);
        }
    }

    #[test]
    fn sym_logm_rejects_indefinite_input() {
        let a = [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]];
        assert_eq!(sym_logm(&a), Err(GeometryError::NotPositiveDefinite));
    }

    #[test]
    fn quaternion_algebra() {
        let qi = [0.0, 1.0, 0.0, 0.0];
        let qj = [0.0, 0.0, 1.0, 0.0];
        let qk = quat_mul(&qi, &qj);
        assert_eq!(qk, [0.0, 0.0, 0.0, 1.0]); // i·j = k
        let e = quat_mul(&qi, &quat_conj(&qi));
        assert_eq!(e, [1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn rotvec_exp_log_roundtrip() {
        use crate::rng;
        let mut r = rng::seeded(13, 0);
        let id = [1.0, 0.0, 0.0, 0.0];
        for _ in 0..200 {
            let mut v = [0.0; 3];
            for c in v.iter_mut() {
                *c = rng::standard_normal(&mut r);
            }
            let n = norm3(&v);
            if n > 3.0 {
                v = scale3(&v, 3.0 / n); // stay inside the injectivity radius π
            }
            let q = quat_exp_rotvec(&v);
            assert!((quat_norm(&q) - 1.0).abs() < 1e-12);
            let back = quat_log_relative(&id, &q).unwrap();
            for c in 0..3 {
                assert!((back[c] - v[c]).abs() < 1e-10, "{:?} vs {:?}", back, v);
            }
            // ‖log‖ equals the rotation angle.
            assert!((quat_distance(&id, &q) - norm3(&v)).abs() < 1e-10);
        }
    }

    #[test]
    fn quat_log_errors_at_cut_locus() {
        let id = [1.0, 0.0, 0.0, 0.0];
        let half_turn = [0.0, 1.0, 0.0, 0.0]; // rotation by π about x
        assert_eq!(quat_log_relative(&id, &half_turn), Err(GeometryError::CutLocus));
    }

    #[test]
    fn canonical_sign_fixes_leading_component() {
        assert_eq!(quat_canonical_sign(&[-1.0, 0.0, 0.0, 0.0]), [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(
            quat_canonical_sign(&[0.0, -1.0, 0.0, 0.0]),
            [0.0, 1.0, 0.0, 0.0]
        );
        assert_eq!(quat_canonical_sign(&[0.5, -0.5, 0.5, -0.5]), [0.5, -0.5, 0.5, -0.5]);
    }
}
