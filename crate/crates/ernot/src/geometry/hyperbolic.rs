//! Hyperbolic plane H² as the upper sheet of the unit hyperboloid
//! {x : ⟨x,x⟩_M = −1, x₀ > 0} in Minkowski space with signature (−,+,+).
//! Tangent vectors are ambient vectors Minkowski-orthogonal to the base
//! point, where the (positive-definite) induced metric is the Minkowski
//! inner product itself.

use super::lin3::{self, V3};
use crate::num;

/// Minkowski inner product ⟨a,b⟩_M = −a₀b₀ + a₁b₁ + a₂b₂.
#[inline]
pub fn minkowski(a: &V3, b: &V3) -> f64 {
    -a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Re-lift onto the upper sheet from the spatial coordinates: the time
/// component is recomputed as √(1 + x₁² + x₂²), so any finite raw triple has
/// a well-defined projection.
pub fn project(raw: &V3) -> V3 {
    let x1 = raw[1];
    let x2 = raw[2];
    [num::sqrt(1.0 + x1 * x1 + x2 * x2), x1, x2]
}

/// d(x,y) = 2·asinh(√((m−1)/2)) with m = max(−⟨x,y⟩_M, 1). Equivalent to
/// arcosh(m) but accurate for nearby points, where m−1 underflows the
/// naive form.
pub fn distance(x: &V3, y: &V3) -> f64 {
    let m = (-minkowski(x, y)).max(1.0);
    2.0 * num::asinh(num::sqrt(0.5 * (m - 1.0)))
}

/// exp_p(v) = cosh(r)·p + sinh(r)·v/r with r = ‖v‖_M.
pub fn exp(p: &V3, v: &V3) -> V3 {
    let r2 = minkowski(v, v).max(0.0); // tangent vectors are spacelike
    let r = num::sqrt(r2);
    if r < 1e-12 {
        return project(p);
    }
    let c = num::cosh(r);
    let k = num::sinh(r) / r;
    let out = [
        c * p[0] + k * v[0],
        c * p[1] + k * v[1],
        c * p[2] + k * v[2],
    ];
    project(&out)
}

/// log_p(y): Minkowski-orthogonal component of y against p, rescaled to the
/// geodesic distance. Globally defined — H² has no cut locus.
pub fn log(p: &V3, y: &V3) -> V3 {
    let d = distance(p, y);
    let mut u = *y;
    // ⟨p,p⟩_M = −1, so adding ⟨p,y⟩_M·p removes the p-component.
    let c = minkowski(p, y);
    u[0] += c * p[0];
    u[1] += c * p[1];
    u[2] += c * p[2];
    let n2 = minkowski(&u, &u).max(0.0); // = sinh²(d) up to rounding
    let n = num::sqrt(n2);
    if n < 1e-15 {
        return [0.0; 3];
    }
    lin3::scale3(&u, d / n)
}

/// Deterministic orthonormal tangent basis via Minkowski Gram–Schmidt on the
/// projections of the spatial axes, c_k = e_k + ⟨p,e_k⟩_M·p. The pair is
/// never degenerate: its Gram determinant is 1 + p₁² + p₂² > 0.
pub fn basis(p: &V3) -> (V3, V3) {
    let mut c1 = [0.0, 1.0, 0.0];
    let g1 = p[1]; // ⟨p, e₁⟩_M
    lin3::axpy3(&mut c1, g1, p);
    let b1 = lin3::scale3(&c1, 1.0 / num::sqrt(minkowski(&c1, &c1)));
    let mut c2 = [0.0, 0.0, 1.0];
    let g2 = p[2];
    lin3::axpy3(&mut c2, g2, p);
    let overlap = minkowski(&c2, &b1);
    lin3::axpy3(&mut c2, -overlap, &b1);
    let b2 = lin3::scale3(&c2, 1.0 / num::sqrt(minkowski(&c2, &c2)));
    (b1, b2)
}

#[cfg(test)]
mod tests {
    use super::*;

    const ORIGIN: V3 = [1.0, 0.0, 0.0];

    #[test]
    fn geodesic_from_origin_has_known_endpoint() {
        // exp_o(2·e₁) = (cosh 2, sinh 2, 0) at distance exactly 2.
        let v = [0.0, 2.0, 0.0];
        let q = exp(&ORIGIN, &v);
        assert!((q[0] - num::cosh(2.0)).abs() < 1e-12);
        assert!((q[1] - num::sinh(2.0)).abs() < 1e-12);
        assert!(q[2].abs() < 1e-15);
        assert!((distance(&ORIGIN, &q) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn distance_is_accurate_for_nearby_points() {
        // The inner product −⟨x,y⟩ = cosh d carries absolute rounding of
        // order ulp(1), so the best achievable absolute error in d is about
        // 1e-16/d. The asinh form reaches that; a naive arcosh adds its own
        // √ulp ≈ 1e-8 cancellation on top and would fail this bound.
        let eps = 1e-6;
        let q = exp(&ORIGIN, &[0.0, eps, 0.0]);
        let d = distance(&ORIGIN, &q);
        assert!((d - eps).abs() < 5e-10, "d = {d}");
    }

    #[test]
    fn log_inverts_exp() {
        let p = project(&[0.0, 0.7, -1.2]);
        let (b1, b2) = basis(&p);
        let mut v = lin3::scale3(&b1, 0.8);
        lin3::axpy3(&mut v, -1.3, &b2);
        let q = exp(&p, &v);
        let back = log(&p, &q);
        for i in 0..3 {
            assert!((back[i] - v[i]).abs() < 1e-11);
        }
    }

    #[test]
    fn points_satisfy_the_sheet_constraint() {
        let p = project(&[5.0, 3.0, -4.0]);
        assert!((minkowski(&p, &p) + 1.0).abs() < 1e-14);
        assert!(p[0] >= 1.0);
    }

    #[test]
    fn basis_is_minkowski_orthonormal_and_tangent() {
        let p = project(&[0.0, 2.0, -3.0]);
        let (b1, b2) = basis(&p);
        assert!(minkowski(&b1, &p).abs() < 1e-13);
        assert!(minkowski(&b2, &p).abs() < 1e-13);
        assert!((minkowski(&b1, &b1) - 1.0).abs() < 1e-13);
        assert!((minkowski(&b2, &b2) - 1.0).abs() < 1e-13);
        assert!(minkowski(&b1, &b2).abs() < 1e-13);
    }
}
