//! Randomized verification of the geometric invariants every manifold must
//! satisfy: exp/log round-trips, metric compatibility of the log norm,
//! distance symmetry and the triangle inequality, constraint residuals of
//! produced points, quaternion sign invariance, and affine invariance of
//! the SPD metric. The same routine backs the library's self-test CLI and
//! the acceptance checks.

use alloc::vec::Vec;

use super::lin3::{self, M3};
use super::{
    distance, exp_map, log_map, project, tangent_from_chart, GeometryError, ManifoldKind,
    ManifoldPoint, PointCoords, SpdMetric, TangentVector,
};
use crate::num;
use crate::rng::{self, Rng};

/// Worst-case residuals observed over all sampled configurations; every
/// field is a maximum of absolute errors, so 0 is perfect.
#[derive(Debug, Clone)]
pub struct ManifoldCheckReport {
    pub kind: ManifoldKind,
    pub samples: usize,
    /// max |log(exp v) − v| over flat tangent coordinates.
    pub tangent_roundtrip: f64,
    /// max flat-coordinate deviation of exp(log y) from y.
    pub point_roundtrip: f64,
    /// max |‖log_x y‖_g − d(x, y)|.
    pub norm_vs_distance: f64,
    /// max d(x, x).
    pub self_distance: f64,
    /// max |d(x,y) − d(y,x)|.
    pub symmetry: f64,
    /// max positive part of d(x,z) − d(x,y) − d(y,z).
    pub triangle: f64,
    /// max manifold-constraint residual of points produced by exp.
    pub constraint: f64,
    /// Quaternion manifolds: max |d(q,r) − d(project(−q),r)|; 0 elsewhere.
    pub sign_invariance: f64,
    /// Affine-invariant SPD only: max |d(AXAᵀ,AYAᵀ) − d(X,Y)|; 0 elsewhere.
    pub affine_invariance: f64,
}

impl ManifoldCheckReport {
    /// Worst residual across all checks (each already an absolute error).
    pub fn worst(&self) -> f64 {
        [
            self.tangent_roundtrip,
            self.point_roundtrip,
            self.norm_vs_distance,
            self.self_distance,
            self.symmetry,
            self.triangle,
            self.constraint,
            self.sign_invariance,
            self.affine_invariance,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Draw a point from a wrapped normal at the origin: normal coefficients of
/// the orthonormal tangent basis, pushed through exp.
fn random_point(kind: ManifoldKind, r: &mut Rng, spread: f64) -> ManifoldPoint {
    let origin = kind.origin();
    let d = kind.tangent_dim();
    let coeffs: Vec<f64> = (0..d).map(|_| rng::standard_normal(r) * spread).collect();
    let v = tangent_from_chart(&origin, &coeffs).expect("origin chart is well defined");
    exp_map(&v).expect("exp of a finite tangent vector succeeds")
}

/// Random tangent vector at `base` with metric norm at most `max_norm`.
fn random_tangent(base: &ManifoldPoint, r: &mut Rng, max_norm: f64) -> TangentVector {
    let d = base.kind().tangent_dim();
    let coeffs: Vec<f64> = (0..d).map(|_| rng::standard_normal(r)).collect();
    let v = tangent_from_chart(base, &coeffs).expect("chart is well defined");
    let n = v.norm();
    if n > max_norm {
        v.scale(max_norm / n * 0.999)
    } else {
        v
    }
}

/// How far a point's coordinates are from satisfying the manifold's defining
/// constraints.
fn constraint_residual(p: &ManifoldPoint) -> f64 {
    match (p.kind(), p.coords()) {
        (ManifoldKind::Sphere2, PointCoords::Vec3(v)) => num::abs(lin3::norm3(v) - 1.0),
        (ManifoldKind::Hyperbolic2, PointCoords::Vec3(v)) => {
            let g = super::hyperbolic::minkowski(v, v);
            num::abs(g + 1.0).max(if v[0] >= 1.0 { 0.0 } else { 1.0 - v[0] })
        }
        (ManifoldKind::Rotations3, PointCoords::Quat(q)) => {
            let norm_err = num::abs(lin3::quat_norm(q) - 1.0);
            let sign_err = if q[0] >= 0.0 { 0.0 } else { num::abs(q[0]) };
            norm_err.max(sign_err)
        }
        (ManifoldKind::RigidMotions3 { .. }, PointCoords::Pose(q, _)) => {
            let norm_err = num::abs(lin3::quat_norm(q) - 1.0);
            let sign_err = if q[0] >= 0.0 { 0.0 } else { num::abs(q[0]) };
            norm_err.max(sign_err)
        }
        (ManifoldKind::Spd3(_), PointCoords::Mat3(m)) => {
            let mut asym: f64 = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    asym = asym.max(num::abs(m[i][j] - m[j][i]));
                }
            }
            let min_eig = match lin3::eigh3(m) {
                Ok((vals, _)) => vals[0],
                Err(_) => f64::NEG_INFINITY,
            };
            asym.max(if min_eig > 0.0 { 0.0 } else { 1.0 - min_eig })
        }
        _ => f64::INFINITY,
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| num::abs(x - y))
        .fold(0.0, f64::max)
}

/// Run `samples` randomized trials of every invariant on one manifold.
/// `seed` makes the report reproducible.
pub fn check_manifold(
    kind: ManifoldKind,
    samples: usize,
    seed: u64,
) -> Result<ManifoldCheckReport, GeometryError> {
    let mut r = rng::seeded(seed, 7);
    let mut report = ManifoldCheckReport {
        kind,
        samples,
        tangent_roundtrip: 0.0,
        point_roundtrip: 0.0,
        norm_vs_distance: 0.0,
        self_distance: 0.0,
        symmetry: 0.0,
        triangle: 0.0,
        constraint: 0.0,
        sign_invariance: 0.0,
        affine_invariance: 0.0,
    };
    let spread = 0.8;
    for _ in 0..samples {
        let x = random_point(kind, &mut r, spread);
        let y = random_point(kind, &mut r, spread);
        let z = random_point(kind, &mut r, spread);

        // exp/log round-trip from a random base with ‖v‖ ≤ 1.
        let v = random_tangent(&x, &mut r, 1.0);
        let endpoint = exp_map(&v)?;
        report.constraint = report.constraint.max(constraint_residual(&endpoint));
        let back = log_map(&x, &endpoint)?;
        report.tangent_roundtrip = report
            .tangent_roundtrip
            .max(max_abs_diff(&back.to_flat(), &v.to_flat()));

        // exp(log y) = y, plus metric compatibility of the log norm.
        let dxy = distance(&x, &y)?;
        let log_xy = log_map(&x, &y)?;
        report.norm_vs_distance = report.norm_vs_distance.max(num::abs(log_xy.norm() - dxy));
        let y_again = exp_map(&log_xy)?;
        report.point_roundtrip = report
            .point_roundtrip
            .max(max_abs_diff(&y_again.to_flat(), &y.to_flat()));

        // Metric axioms.
        report.self_distance = report.self_distance.max(distance(&x, &x)?);
        let dyx = distance(&y, &x)?;
        report.symmetry = report.symmetry.max(num::abs(dxy - dyx));
        let dxz = distance(&x, &z)?;
        let dyz = distance(&y, &z)?;
        report.triangle = report.triangle.max((dxz - dxy - dyz).max(0.0));

        // Quaternion sign invariance: projecting the negated flat
        // coordinates must land on the same representative, hence the same
        // distances.
        match kind {
            ManifoldKind::Rotations3 | ManifoldKind::RigidMotions3 { .. } => {
                let mut flat = x.to_flat();
                for c in flat.iter_mut().take(4) {
                    *c = -*c;
                }
                let x_neg = project(kind, &flat)?;
                let d_neg = distance(&x_neg, &y)?;
                report.sign_invariance = report.sign_invariance.max(num::abs(d_neg - dxy));
            }
            _ => {}
        }

        // Affine invariance of the affine-invariant SPD metric.
        if kind == ManifoldKind::Spd3(SpdMetric::AffineInvariant) {
            let a = random_invertible(&mut r);
            let gx = congruence(&a, x.expect_mat3());
            let gy = congruence(&a, y.expect_mat3());
            let px = project(kind, &flatten(&gx))?;
            let py = project(kind, &flatten(&gy))?;
            let d_transported = distance(&px, &py)?;
            report.affine_invariance = report
                .affine_invariance
                .max(num::abs(d_transported - dxy));
        }
    }
    Ok(report)
}

/// Reports for every supported manifold (the default CLI self-test).
pub fn check_all(samples: usize, seed: u64) -> Result<Vec<ManifoldCheckReport>, GeometryError> {
    ManifoldKind::ALL_TAGS
        .iter()
        .map(|tag| {
            let kind = ManifoldKind::from_tag(tag).expect("static tag list is valid");
            check_manifold(kind, samples, seed)
        })
        .collect()
}

fn random_invertible(r: &mut Rng) -> M3 {
    loop {
        let mut a = [[0.0; 3]; 3];
        for row in a.iter_mut() {
            for v in row.iter_mut() {
                *v = rng::standard_normal(r) * 0.6;
            }
        }
        if num::abs(det3(&a)) > 0.05 {
            return a;
        }
    }
}

fn det3(a: &M3) -> f64 {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

fn congruence(a: &M3, x: &M3) -> M3 {
    lin3::symmetrize(&lin3::mat3_mul(&lin3::mat3_mul(a, x), &lin3::mat3_transpose(a)))
}

fn flatten(m: &M3) -> Vec<f64> {
    m.iter().flat_map(|row| row.iter().copied()).collect()
}
