//! Intrinsic geometry for the five supported manifolds: the unit sphere S²,
//! the rotation group SO(3), symmetric positive-definite 3×3 matrices (with
//! either the affine-invariant or the log-Euclidean metric), rigid motions
//! SE(3) with a weighted product metric, and the hyperbolic plane H² in the
//! hyperboloid model.
//!
//! Every manifold exposes the same surface: projection from raw ambient
//! coordinates, geodesic distance, the transport cost ½·d², exponential and
//! logarithm maps, metric inner products and norms on tangent spaces, and a
//! deterministic orthonormal tangent basis. Points and tangent vectors carry
//! their manifold (and base point) so mismatched arguments fail loudly
//! instead of silently computing nonsense.

pub mod checks;
pub mod lin3;

mod hyperbolic;
mod rotations;
mod spd;
mod sphere;

use alloc::vec::Vec;

use crate::num;
use lin3::{M3, Quat, V3};

/// Log maps error inside this margin of the cut locus (angle π on S² and on
/// the rotation factor of SE(3)).
pub const CUT_LOCUS_TOL: f64 = 1e-8;

/// Eigenvalue floor applied when projecting raw symmetric input onto the
/// positive-definite cone.
pub const SPD_EIGEN_FLOOR: f64 = 1e-10;

/// Tolerance for tangency validation when tangent vectors are built from raw
/// coordinates.
pub const TANGENCY_TOL: f64 = 1e-9;

/// Which Riemannian metric a `Spd3` manifold instance carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpdMetric {
    AffineInvariant,
    LogEuclidean,
}

/// A manifold identity, including any metric parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ManifoldKind {
    /// Unit sphere in ℝ³.
    Sphere2,
    /// Rotation group, represented by unit quaternions with a canonical sign.
    Rotations3,
    /// Symmetric positive-definite 3×3 matrices.
    Spd3(SpdMetric),
    /// Rigid motions of ℝ³ with product metric d² = w²·d_rot² + ‖Δt‖².
    RigidMotions3 { rotation_weight: f64 },
    /// Hyperbolic plane, upper sheet of the unit hyperboloid in Minkowski ℝ³.
    Hyperbolic2,
}

/// Rotation-weight used by the canonical `se3` instance.
pub const SE3_DEFAULT_ROTATION_WEIGHT: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub enum GeometryError {
    /// Input contained NaN or infinity.
    NonFinite,
    /// Arguments live on different manifolds (or on the same manifold with
    /// different metric parameters).
    KindMismatch,
    /// Logarithm requested at (or within tolerance of) the cut locus, where
    /// the geodesic midpoint is not unique: on S² this means antipodal
    /// points, on SO(3) a relative rotation of angle π.
    CutLocus,
    /// Raw coordinates cannot be projected: zero vector where a direction is
    /// required.
    DegenerateInput,
    /// A matrix expected to be positive definite had a nonpositive
    /// eigenvalue.
    NotPositiveDefinite,
    /// Tangent coordinates violate the tangency constraint beyond tolerance.
    TangencyViolation,
    /// The iterative eigensolver failed to converge (only possible for
    /// non-finite input slipping past earlier checks).
    EigenFailure,
    /// A raw coordinate slice had the wrong length for the manifold.
    WrongCoordinateLength { expected: usize, got: usize },
}

impl core::fmt::Display for GeometryError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            GeometryError::NonFinite => write!(f, "non-finite coordinates"),
            GeometryError::KindMismatch => {
                write!(f, "arguments belong to different manifolds")
            }
            GeometryError::CutLocus => write!(
                f,
                "log map undefined: points are at or within tolerance of the cut locus"
            ),
            GeometryError::DegenerateInput => {
                write!(f, "degenerate raw coordinates (zero where a direction is required)")
            }
            GeometryError::NotPositiveDefinite => {
                write!(f, "matrix is not positive definite")
            }
            GeometryError::TangencyViolation => {
                write!(f, "coordinates violate the tangent-space constraint")
            }
            GeometryError::EigenFailure => {
                write!(f, "symmetric eigensolver failed to converge")
            }
            GeometryError::WrongCoordinateLength { expected, got } => {
                write!(f, "expected {expected} coordinates, got {got}")
            }
        }
    }
}

impl core::error::Error for GeometryError {}

impl ManifoldKind {
    /// Parse a manifold tag as used by configuration and the CLI.
    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "s2" => Some(ManifoldKind::Sphere2),
            "so3" => Some(ManifoldKind::Rotations3),
            "spd3" => Some(ManifoldKind::Spd3(SpdMetric::AffineInvariant)),
            "spd3le" => Some(ManifoldKind::Spd3(SpdMetric::LogEuclidean)),
            "se3" => Some(ManifoldKind::RigidMotions3 {
                rotation_weight: SE3_DEFAULT_ROTATION_WEIGHT,
            }),
            "h2" => Some(ManifoldKind::Hyperbolic2),
            _ => None,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            ManifoldKind::Sphere2 => "s2",
            ManifoldKind::Rotations3 => "so3",
            ManifoldKind::Spd3(SpdMetric::AffineInvariant) => "spd3",
            ManifoldKind::Spd3(SpdMetric::LogEuclidean) => "spd3le",
            ManifoldKind::RigidMotions3 { .. } => "se3",
            ManifoldKind::Hyperbolic2 => "h2",
        }
    }

    pub const ALL_TAGS: [&'static str; 6] = ["s2", "so3", "spd3", "spd3le", "se3", "h2"];

    /// Length of the flat ambient coordinate representation of a point.
    pub fn ambient_dim(&self) -> usize {
        match self {
            ManifoldKind::Sphere2 | ManifoldKind::Hyperbolic2 => 3,
            ManifoldKind::Rotations3 => 4,
            ManifoldKind::Spd3(_) => 9,
            ManifoldKind::RigidMotions3 { .. } => 7,
        }
    }

    /// Intrinsic dimension (cardinality of an orthonormal tangent basis).
    pub fn tangent_dim(&self) -> usize {
        match self {
            ManifoldKind::Sphere2 | ManifoldKind::Hyperbolic2 => 2,
            ManifoldKind::Rotations3 => 3,
            ManifoldKind::Spd3(_) => 6,
            ManifoldKind::RigidMotions3 { .. } => 6,
        }
    }

    /// Length of the flat representation of a tangent vector.
    pub fn tangent_flat_dim(&self) -> usize {
        match self {
            ManifoldKind::Sphere2 | ManifoldKind::Hyperbolic2 => 3,
            ManifoldKind::Rotations3 => 3,
            ManifoldKind::Spd3(_) => 9,
            ManifoldKind::RigidMotions3 { .. } => 6,
        }
    }

    /// True when geodesics between any two points are unique (nonpositive
    /// curvature, no cut locus): both SPD metrics and the hyperbolic plane.
    pub fn has_unique_geodesics(&self) -> bool {
        matches!(self, ManifoldKind::Spd3(_) | ManifoldKind::Hyperbolic2)
    }

    /// Canonical base point used for tangent-space feature charts.
    pub fn origin(&self) -> ManifoldPoint {
        let coords = match self {
            ManifoldKind::Sphere2 => PointCoords::Vec3([0.0, 0.0, 1.0]),
            ManifoldKind::Rotations3 => PointCoords::Quat([1.0, 0.0, 0.0, 0.0]),
            ManifoldKind::Spd3(_) => PointCoords::Mat3(lin3::EYE3),
            ManifoldKind::RigidMotions3 { .. } => {
                PointCoords::Pose([1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0])
            }
            ManifoldKind::Hyperbolic2 => PointCoords::Vec3([1.0, 0.0, 0.0]),
        };
        ManifoldPoint { kind: *self, coords }
    }
}

/// Internal storage for a point's coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum PointCoords {
    /// S² unit vector or H² hyperboloid point (t, x, y).
    Vec3(V3),
    /// Unit quaternion, scalar first, canonical sign.
    Quat(Quat),
    /// Symmetric positive-definite matrix.
    Mat3(M3),
    /// Rigid motion: rotation quaternion plus translation.
    Pose(Quat, V3),
}

/// A validated point on one of the supported manifolds.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldPoint {
    kind: ManifoldKind,
    coords: PointCoords,
}

impl ManifoldPoint {
    pub fn kind(&self) -> ManifoldKind {
        self.kind
    }

    pub fn coords(&self) -> &PointCoords {
        &self.coords
    }

    /// Flat ambient coordinates: S² and H² give 3 values, SO(3) the 4
    /// quaternion components, SPD the 9 row-major matrix entries, SE(3) the
    /// quaternion followed by the translation (7 values).
    pub fn to_flat(&self) -> Vec<f64> {
        match &self.coords {
            PointCoords::Vec3(v) => v.to_vec(),
            PointCoords::Quat(q) => q.to_vec(),
            PointCoords::Mat3(m) => m.iter().flat_map(|row| row.iter().copied()).collect(),
            PointCoords::Pose(q, t) => q.iter().chain(t.iter()).copied().collect(),
        }
    }

    #[inline]
    pub(crate) fn expect_vec3(&self) -> &V3 {
        match &self.coords {
            PointCoords::Vec3(v) => v,
            _ => unreachable!("coords/kind invariant violated"),
        }
    }

    #[inline]
    pub(crate) fn expect_quat(&self) -> &Quat {
        match &self.coords {
            PointCoords::Quat(q) => q,
            _ => unreachable!("coords/kind invariant violated"),
        }
    }

    #[inline]
    pub(crate) fn expect_mat3(&self) -> &M3 {
        match &self.coords {
            PointCoords::Mat3(m) => m,
            _ => unreachable!("coords/kind invariant violated"),
        }
    }

    #[inline]
    pub(crate) fn expect_pose(&self) -> (&Quat, &V3) {
        match &self.coords {
            PointCoords::Pose(q, t) => (q, t),
            _ => unreachable!("coords/kind invariant violated"),
        }
    }
}

/// Internal storage for tangent-vector coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum TangentCoords {
    /// Ambient tangent for S² / H², or a rotation vector for SO(3).
    Vec3(V3),
    /// Symmetric matrix tangent for SPD.
    Sym3(M3),
    /// SE(3): rotation vector plus translation displacement.
    Pose { rot: V3, trans: V3 },
}

/// A tangent vector anchored at a base point.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    base: ManifoldPoint,
    coords: TangentCoords,
}

impl TangentVector {
    pub fn base(&self) -> &ManifoldPoint {
        &self.base
    }

    pub fn coords(&self) -> &TangentCoords {
        &self.coords
    }

    pub fn zero(base: &ManifoldPoint) -> Self {
        let coords = match base.kind {
            ManifoldKind::Sphere2 | ManifoldKind::Hyperbolic2 | ManifoldKind::Rotations3 => {
                TangentCoords::Vec3([0.0; 3])
            }
            ManifoldKind::Spd3(_) => TangentCoords::Sym3([[0.0; 3]; 3]),
            ManifoldKind::RigidMotions3 { .. } => TangentCoords::Pose {
                rot: [0.0; 3],
                trans: [0.0; 3],
            },
        };
        TangentVector {
            base: base.clone(),
            coords,
        }
    }

    /// Build a tangent vector from flat coordinates, validating length,
    /// finiteness, and the tangency constraint of the base manifold.
    pub fn from_flat(base: &ManifoldPoint, raw: &[f64]) -> Result<Self, GeometryError> {
        let expected = base.kind.tangent_flat_dim();
        if raw.len() != expected {
            return Err(GeometryError::WrongCoordinateLength {
                expected,
                got: raw.len(),
            });
        }
        if !raw.iter().all(|v| v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let coords = match base.kind {
            ManifoldKind::Sphere2 => {
                let v = [raw[0], raw[1], raw[2]];
                let p = base.expect_vec3();
                let scale = 1.0 + lin3::norm3(&v);
                if num::abs(lin3::dot3(&v, p)) > TANGENCY_TOL * scale {
                    return Err(GeometryError::TangencyViolation);
                }
                TangentCoords::Vec3(v)
            }
            ManifoldKind::Hyperbolic2 => {
                let v = [raw[0], raw[1], raw[2]];
                let p = base.expect_vec3();
                let scale = 1.0 + lin3::norm3(&v);
                if num::abs(hyperbolic::minkowski(&v, p)) > TANGENCY_TOL * scale {
                    return Err(GeometryError::TangencyViolation);
                }
                TangentCoords::Vec3(v)
            }
            ManifoldKind::Rotations3 => TangentCoords::Vec3([raw[0], raw[1], raw[2]]),
            ManifoldKind::Spd3(_) => {
                let m = [
                    [raw[0], raw[1], raw[2]],
                    [raw[3], raw[4], raw[5]],
                    [raw[6], raw[7], raw[8]],
                ];
                let scale = 1.0 + lin3::frob_norm(&m);
                for i in 0..3 {
                    for j in (i + 1)..3 {
                        if num::abs(m[i][j] - m[j][i]) > TANGENCY_TOL * scale {
                            return Err(GeometryError::TangencyViolation);
                        }
                    }
                }
                TangentCoords::Sym3(lin3::symmetrize(&m))
            }
            ManifoldKind::RigidMotions3 { .. } => TangentCoords::Pose {
                rot: [raw[0], raw[1], raw[2]],
                trans: [raw[3], raw[4], raw[5]],
            },
        };
        Ok(TangentVector {
            base: base.clone(),
            coords,
        })
    }

    /// Flat coordinates, matching the layout accepted by `from_flat`.
    pub fn to_flat(&self) -> Vec<f64> {
        match &self.coords {
            TangentCoords::Vec3(v) => v.to_vec(),
            TangentCoords::Sym3(m) => m.iter().flat_map(|row| row.iter().copied()).collect(),
            TangentCoords::Pose { rot, trans } => {
                rot.iter().chain(trans.iter()).copied().collect()
            }
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        let coords = match &self.coords {
            TangentCoords::Vec3(v) => TangentCoords::Vec3(lin3::scale3(v, s)),
            TangentCoords::Sym3(m) => TangentCoords::Sym3(lin3::mat3_scale(m, s)),
            TangentCoords::Pose { rot, trans } => TangentCoords::Pose {
                rot: lin3::scale3(rot, s),
                trans: lin3::scale3(trans, s),
            },
        };
        TangentVector {
            base: self.base.clone(),
            coords,
        }
    }

    /// `self += w · other`; both vectors must share the same base point.
    pub fn add_scaled(&mut self, w: f64, other: &TangentVector) -> Result<(), GeometryError> {
        if self.base != other.base {
            return Err(GeometryError::KindMismatch);
        }
        match (&mut self.coords, &other.coords) {
            (TangentCoords::Vec3(a), TangentCoords::Vec3(b)) => lin3::axpy3(a, w, b),
            (TangentCoords::Sym3(a), TangentCoords::Sym3(b)) => {
                for i in 0..3 {
                    for j in 0..3 {
                        a[i][j] += w * b[i][j];
                    }
                }
            }
            (
                TangentCoords::Pose { rot: ar, trans: at },
                TangentCoords::Pose { rot: br, trans: bt },
            ) => {
                lin3::axpy3(ar, w, br);
                lin3::axpy3(at, w, bt);
            }
            _ => return Err(GeometryError::KindMismatch),
        }
        Ok(())
    }

    /// Metric norm ‖v‖_g at the base point.
    pub fn norm(&self) -> f64 {
        tangent_norm(self)
    }
}

/// Project raw ambient coordinates onto the manifold. The raw slice must be
/// finite and the right length; beyond that each manifold applies its own
/// normalization (unit norm, canonical quaternion sign, symmetrization plus
/// an eigenvalue floor, hyperboloid re-lift).
pub fn project(kind: ManifoldKind, raw: &[f64]) -> Result<ManifoldPoint, GeometryError> {
    let expected = kind.ambient_dim();
    if raw.len() != expected {
        return Err(GeometryError::WrongCoordinateLength {
            expected,
            got: raw.len(),
        });
    }
    if !raw.iter().all(|v| v.is_finite()) {
        return Err(GeometryError::NonFinite);
    }
    let coords = match kind {
        ManifoldKind::Sphere2 => {
            PointCoords::Vec3(sphere::project(&[raw[0], raw[1], raw[2]])?)
        }
        ManifoldKind::Rotations3 => {
            PointCoords::Quat(rotations::project_quat(&[raw[0], raw[1], raw[2], raw[3]])?)
        }
        ManifoldKind::Spd3(_) => {
            let m = [
                [raw[0], raw[1], raw[2]],
                [raw[3], raw[4], raw[5]],
                [raw[6], raw[7], raw[8]],
            ];
            PointCoords::Mat3(spd::project(&m)?)
        }
        ManifoldKind::RigidMotions3 { .. } => {
            let q = rotations::project_quat(&[raw[0], raw[1], raw[2], raw[3]])?;
            PointCoords::Pose(q, [raw[4], raw[5], raw[6]])
        }
        ManifoldKind::Hyperbolic2 => {
            PointCoords::Vec3(hyperbolic::project(&[raw[0], raw[1], raw[2]]))
        }
    };
    Ok(ManifoldPoint { kind, coords })
}

/// Geodesic distance between two points on the same manifold.
pub fn distance(x: &ManifoldPoint, y: &ManifoldPoint) -> Result<f64, GeometryError> {
    if x.kind != y.kind {
        return Err(GeometryError::KindMismatch);
    }
    match x.kind {
        ManifoldKind::Sphere2 => Ok(sphere::distance(x.expect_vec3(), y.expect_vec3())),
        ManifoldKind::Rotations3 => {
            Ok(lin3::quat_distance(x.expect_quat(), y.expect_quat()))
        }
        ManifoldKind::Spd3(SpdMetric::AffineInvariant) => {
            spd::airm_distance(x.expect_mat3(), y.expect_mat3())
        }
        ManifoldKind::Spd3(SpdMetric::LogEuclidean) => {
            spd::le_distance(x.expect_mat3(), y.expect_mat3())
        }
        ManifoldKind::RigidMotions3 { rotation_weight } => {
            let (qx, tx) = x.expect_pose();
            let (qy, ty) = y.expect_pose();
            let dr = lin3::quat_distance(qx, qy);
            let dt = lin3::norm3(&lin3::sub3(ty, tx));
            Ok(num::sqrt(rotation_weight * rotation_weight * dr * dr + dt * dt))
        }
        ManifoldKind::Hyperbolic2 => {
            Ok(hyperbolic::distance(x.expect_vec3(), y.expect_vec3()))
        }
    }
}

/// Transport cost ½·d(x,y)².
pub fn cost(x: &ManifoldPoint, y: &ManifoldPoint) -> Result<f64, GeometryError> {
    let d = distance(x, y)?;
    Ok(0.5 * d * d)
}

/// Exponential map: follow the geodesic from the tangent vector's base point
/// with initial velocity `v` for unit time.
pub fn exp_map(v: &TangentVector) -> Result<ManifoldPoint, GeometryError> {
    let base = &v.base;
    let coords = match (base.kind, &v.coords) {
        (ManifoldKind::Sphere2, TangentCoords::Vec3(t)) => {
            PointCoords::Vec3(sphere::exp(base.expect_vec3(), t))
        }
        (ManifoldKind::Rotations3, TangentCoords::Vec3(t)) => {
            PointCoords::Quat(rotations::exp_quat(base.expect_quat(), t))
        }
        (ManifoldKind::Spd3(SpdMetric::AffineInvariant), TangentCoords::Sym3(t)) => {
            PointCoords::Mat3(spd::airm_exp(base.expect_mat3(), t)?)
        }
        (ManifoldKind::Spd3(SpdMetric::LogEuclidean), TangentCoords::Sym3(t)) => {
            PointCoords::Mat3(spd::le_exp(base.expect_mat3(), t)?)
        }
        (ManifoldKind::RigidMotions3 { .. }, TangentCoords::Pose { rot, trans }) => {
            let (q, t) = base.expect_pose();
            PointCoords::Pose(rotations::exp_quat(q, rot), lin3::add3(t, trans))
        }
        (ManifoldKind::Hyperbolic2, TangentCoords::Vec3(t)) => {
            PointCoords::Vec3(hyperbolic::exp(base.expect_vec3(), t))
        }
        _ => return Err(GeometryError::KindMismatch),
    };
    Ok(ManifoldPoint {
        kind: base.kind,
        coords,
    })
}

/// Riemannian logarithm: the tangent vector at `base` whose exponential is
/// `y`. Errors at the cut locus for the compact factors (S², SO(3), and the
/// rotation part of SE(3)).
pub fn log_map(base: &ManifoldPoint, y: &ManifoldPoint) -> Result<TangentVector, GeometryError> {
    if base.kind != y.kind {
        return Err(GeometryError::KindMismatch);
    }
    let coords = match base.kind {
        ManifoldKind::Sphere2 => {
            TangentCoords::Vec3(sphere::log(base.expect_vec3(), y.expect_vec3())?)
        }
        ManifoldKind::Rotations3 => TangentCoords::Vec3(lin3::quat_log_relative(
            base.expect_quat(),
            y.expect_quat(),
        )?),
        ManifoldKind::Spd3(SpdMetric::AffineInvariant) => {
            TangentCoords::Sym3(spd::airm_log(base.expect_mat3(), y.expect_mat3())?)
        }
        ManifoldKind::Spd3(SpdMetric::LogEuclidean) => {
            TangentCoords::Sym3(spd::le_log(base.expect_mat3(), y.expect_mat3())?)
        }
        ManifoldKind::RigidMotions3 { .. } => {
            let (qb, tb) = base.expect_pose();
            let (qy, ty) = y.expect_pose();
            TangentCoords::Pose {
                rot: lin3::quat_log_relative(qb, qy)?,
                trans: lin3::sub3(ty, tb),
            }
        }
        ManifoldKind::Hyperbolic2 => {
            TangentCoords::Vec3(hyperbolic::log(base.expect_vec3(), y.expect_vec3()))
        }
    };
    Ok(TangentVector {
        base: base.clone(),
        coords,
    })
}

/// Metric inner product of two tangent vectors at the same base point.
pub fn tangent_inner(u: &TangentVector, v: &TangentVector) -> Result<f64, GeometryError> {
    if u.base != v.base {
        return Err(GeometryError::KindMismatch);
    }
    match (u.base.kind, &u.coords, &v.coords) {
        (ManifoldKind::Sphere2, TangentCoords::Vec3(a), TangentCoords::Vec3(b)) => {
            Ok(lin3::dot3(a, b))
        }
        (ManifoldKind::Rotations3, TangentCoords::Vec3(a), TangentCoords::Vec3(b)) => {
            Ok(lin3::dot3(a, b))
        }
        (
            ManifoldKind::Spd3(SpdMetric::AffineInvariant),
            TangentCoords::Sym3(a),
            TangentCoords::Sym3(b),
        ) => spd::airm_inner(u.base.expect_mat3(), a, b),
        (
            ManifoldKind::Spd3(SpdMetric::LogEuclidean),
            TangentCoords::Sym3(a),
            TangentCoords::Sym3(b),
        ) => Ok(lin3::frob_inner(a, b)),
        (
            ManifoldKind::RigidMotions3 { rotation_weight },
            TangentCoords::Pose { rot: ar, trans: at },
            TangentCoords::Pose { rot: br, trans: bt },
        ) => Ok(rotation_weight * rotation_weight * lin3::dot3(ar, br) + lin3::dot3(at, bt)),
        (ManifoldKind::Hyperbolic2, TangentCoords::Vec3(a), TangentCoords::Vec3(b)) => {
            Ok(hyperbolic::minkowski(a, b))
        }
        _ => Err(GeometryError::KindMismatch),
    }
}

/// Metric norm of a tangent vector. For vectors produced by `log_map` this
/// equals the geodesic distance to the target point.
pub fn tangent_norm(v: &TangentVector) -> f64 {
    match (v.base.kind, &v.coords) {
        (ManifoldKind::Sphere2, TangentCoords::Vec3(a))
        | (ManifoldKind::Rotations3, TangentCoords::Vec3(a)) => lin3::norm3(a),
        (ManifoldKind::Spd3(SpdMetric::AffineInvariant), TangentCoords::Sym3(a)) => {
            spd::airm_norm(v.base.expect_mat3(), a)
        }
        (ManifoldKind::Spd3(SpdMetric::LogEuclidean), TangentCoords::Sym3(a)) => {
            lin3::frob_norm(a)
        }
        (
            ManifoldKind::RigidMotions3 { rotation_weight },
            TangentCoords::Pose { rot, trans },
        ) => {
            let r2 = lin3::dot3(rot, rot);
            let t2 = lin3::dot3(trans, trans);
            num::sqrt(rotation_weight * rotation_weight * r2 + t2)
        }
        (ManifoldKind::Hyperbolic2, TangentCoords::Vec3(a)) => {
            num::sqrt(num::abs(hyperbolic::minkowski(a, a)))
        }
        _ => unreachable!("coords/kind invariant violated"),
    }
}

/// Deterministic orthonormal basis of the tangent space at `base`, with
/// respect to the manifold's metric. The construction depends only on the
/// base coordinates, so repeated calls agree exactly.
pub fn orthonormal_basis(base: &ManifoldPoint) -> Result<Vec<TangentVector>, GeometryError> {
    let mk = |coords: TangentCoords| TangentVector {
        base: base.clone(),
        coords,
    };
    let out = match base.kind {
        ManifoldKind::Sphere2 => {
            let (b1, b2) = sphere::basis(base.expect_vec3());
            alloc::vec![mk(TangentCoords::Vec3(b1)), mk(TangentCoords::Vec3(b2))]
        }
        ManifoldKind::Rotations3 => (0..3)
            .map(|i| {
                let mut e = [0.0; 3];
                e[i] = 1.0;
                mk(TangentCoords::Vec3(e))
            })
            .collect(),
        ManifoldKind::Spd3(SpdMetric::AffineInvariant) => {
            spd::airm_basis(base.expect_mat3())?
                .into_iter()
                .map(|m| mk(TangentCoords::Sym3(m)))
                .collect()
        }
        ManifoldKind::Spd3(SpdMetric::LogEuclidean) => spd::sym_basis()
            .into_iter()
            .map(|m| mk(TangentCoords::Sym3(m)))
            .collect(),
        ManifoldKind::RigidMotions3 { rotation_weight } => {
            let mut out = Vec::with_capacity(6);
            for i in 0..3 {
                let mut e = [0.0; 3];
                e[i] = 1.0 / rotation_weight;
                out.push(mk(TangentCoords::Pose {
                    rot: e,
                    trans: [0.0; 3],
                }));
            }
            for i in 0..3 {
                let mut e = [0.0; 3];
                e[i] = 1.0;
                out.push(mk(TangentCoords::Pose {
                    rot: [0.0; 3],
                    trans: e,
                }));
            }
            out
        }
        ManifoldKind::Hyperbolic2 => {
            let (b1, b2) = hyperbolic::basis(base.expect_vec3());
            alloc::vec![mk(TangentCoords::Vec3(b1)), mk(TangentCoords::Vec3(b2))]
        }
    };
    Ok(out)
}

/// Coordinates of a tangent vector in the deterministic orthonormal basis at
/// its base point (length `tangent_dim`).
pub fn tangent_chart_coords(v: &TangentVector) -> Result<Vec<f64>, GeometryError> {
    let basis = orthonormal_basis(&v.base)?;
    basis.iter().map(|b| tangent_inner(v, b)).collect()
}

/// Inverse of `tangent_chart_coords`: assemble Σ cᵢ·bᵢ from basis
/// coefficients.
pub fn tangent_from_chart(
    base: &ManifoldPoint,
    coeffs: &[f64],
) -> Result<TangentVector, GeometryError> {
    let expected = base.kind.tangent_dim();
    if coeffs.len() != expected {
        return Err(GeometryError::WrongCoordinateLength {
            expected,
            got: coeffs.len(),
        });
    }
    if !coeffs.iter().all(|v| v.is_finite()) {
        return Err(GeometryError::NonFinite);
    }
    let basis = orthonormal_basis(base)?;
    let mut acc = TangentVector::zero(base);
    for (c, b) in coeffs.iter().zip(&basis) {
        acc.add_scaled(*c, b)?;
    }
    Ok(acc)
}
