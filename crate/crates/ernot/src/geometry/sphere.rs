//! Unit sphere S² ⊂ ℝ³ with the round metric. Tangent vectors are ambient
//! vectors orthogonal to the base point.

use super::lin3::{self, V3};
use super::{GeometryError, CUT_LOCUS_TOL};
use crate::num;

pub fn project(raw: &V3) -> Result<V3, GeometryError> {
    let n = lin3::norm3(raw);
    if n == 0.0 {
        return Err(GeometryError::DegenerateInput);
    }
    Ok(lin3::scale3(raw, 1.0 / n))
}

/// Geodesic distance θ = atan2(‖x×y‖, ⟨x,y⟩) — accurate at both ends of
/// [0, π], unlike acos of the clamped dot product.
pub fn distance(x: &V3, y: &V3) -> f64 {
    let c = lin3::cross3(x, y);
    num::atan2(lin3::norm3(&c), lin3::dot3(x, y))
}

/// exp_p(v) = cos(θ)·p + sin(θ)·v/θ with θ = ‖v‖; the series branch keeps
/// v → 0 exact.
pub fn exp(p: &V3, v: &V3) -> V3 {
    let theta = lin3::norm3(v);
    let (c, k) = if theta < 1e-9 {
        (num::cos(theta), 1.0 - theta * theta / 6.0)
    } else {
        (num::cos(theta), num::sin(theta) / theta)
    };
    let mut out = lin3::scale3(p, c);
    lin3::axpy3(&mut out, k, v);
    // Re-normalize to kill accumulated drift.
    let n = lin3::norm3(&out);
    lin3::scale3(&out, 1.0 / n)
}

/// log_p(y): direction is the component of y orthogonal to p, rescaled to
/// length θ. Errors within the cut-locus tolerance of the antipode.
pub fn log(p: &V3, y: &V3) -> Result<V3, GeometryError> {
    let theta = distance(p, y);
    if theta >= core::f64::consts::PI - CUT_LOCUS_TOL {
        return Err(GeometryError::CutLocus);
    }
    let mut u = *y;
    lin3::axpy3(&mut u, -lin3::dot3(p, y), p);
    let n = lin3::norm3(&u); // = sin θ up to rounding
    if n < 1e-15 {
        return Ok([0.0; 3]);
    }
    Ok(lin3::scale3(&u, theta / n))
}

/// Deterministic orthonormal tangent basis: complete p against the ambient
/// axis with the smallest |component| (lowest index on ties), which is never
/// close to parallel with p.
pub fn basis(p: &V3) -> (V3, V3) {
    let mut k = 0;
    for i in 1..3 {
        if num::abs(p[i]) < num::abs(p[k]) {
            k = i;
        }
    }
    let mut a = [0.0; 3];
    a[k] = 1.0;
    let mut u = a;
    lin3::axpy3(&mut u, -lin3::dot3(&a, p), p);
    let b1 = lin3::scale3(&u, 1.0 / lin3::norm3(&u));
    let b2 = lin3::cross3(p, &b1);
    (b1, b2)
}
