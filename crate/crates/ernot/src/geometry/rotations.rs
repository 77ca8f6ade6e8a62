//! Rotation group SO(3) as unit quaternions with canonical sign, carrying
//! the bi-invariant metric normalized so the distance is the geodesic
//! rotation angle in [0, π]. Tangent vectors use the rotation-vector
//! (axis-angle) chart at the base point, in which the metric is the standard
//! Euclidean inner product.
//!
//! SE(3) reuses these routines for its rotation factor; its translation
//! factor is flat, so the product operations live in the dispatch layer.

use super::lin3::{self, Quat, V3};
use super::GeometryError;

pub fn project_quat(raw: &Quat) -> Result<Quat, GeometryError> {
    let n = lin3::quat_norm(raw);
    if n == 0.0 {
        return Err(GeometryError::DegenerateInput);
    }
    let unit = [raw[0] / n, raw[1] / n, raw[2] / n, raw[3] / n];
    Ok(lin3::quat_canonical_sign(&unit))
}

/// exp at `q` of the rotation vector `v`: right-translate the one-parameter
/// subgroup, then re-normalize and fix the sign.
pub fn exp_quat(q: &Quat, v: &V3) -> Quat {
    let step = lin3::quat_exp_rotvec(v);
    let out = lin3::quat_mul(q, &step);
    let n = lin3::quat_norm(&out);
    lin3::quat_canonical_sign(&[out[0] / n, out[1] / n, out[2] / n, out[3] / n])
}
