//! Sampling on manifolds: wrapped normal distributions (a tangent Gaussian
//! pushed through the exponential map), Haar-uniform rotations, and greedy
//! farthest-point subsampling for landmark selection.

use alloc::string::ToString;
use alloc::vec::Vec;

use crate::error::Error;
use crate::geometry::{
    self, exp_map, tangent_from_chart, ManifoldKind, ManifoldPoint, TangentVector,
};
use crate::num;
use crate::rng::{self, Rng};

/// Tangent-Gaussian specification. The isotropic form applies to every
/// manifold except SE(3), where the rotation and translation factors carry
/// independent scales in their natural (rotation-vector / displacement)
/// charts, with optional per-axis truncation of the resulting translations.
#[derive(Debug, Clone)]
pub enum WrappedNormalSpec {
    Isotropic {
        center: ManifoldPoint,
        sigma: f64,
    },
    Se3 {
        center: ManifoldPoint,
        sigma_rot: f64,
        sigma_trans: f64,
        /// Inclusive [low, high] bounds per translation axis.
        truncation: Option<[[f64; 2]; 3]>,
    },
}

/// Attempts at drawing a translation inside the truncation box before
/// falling back to clipping.
const TRUNCATION_ATTEMPTS: usize = 1000;

impl WrappedNormalSpec {
    pub fn center(&self) -> &ManifoldPoint {
        match self {
            WrappedNormalSpec::Isotropic { center, .. } => center,
            WrappedNormalSpec::Se3 { center, .. } => center,
        }
    }

    fn validate(&self) -> Result<(), Error> {
        match self {
            WrappedNormalSpec::Isotropic { center, sigma } => {
                if matches!(center.kind(), ManifoldKind::RigidMotions3 { .. }) {
                    return Err(Error::InvalidInput(
                        "rigid motions need the split rotation/translation spec".to_string(),
                    ));
                }
                if !(*sigma > 0.0) {
                    return Err(Error::NonPositive { what: "sigma" });
                }
            }
            WrappedNormalSpec::Se3 {
                center,
                sigma_rot,
                sigma_trans,
                truncation,
            } => {
                if !matches!(center.kind(), ManifoldKind::RigidMotions3 { .. }) {
                    return Err(Error::InvalidInput(
                        "split rotation/translation spec requires a rigid-motion center"
                            .to_string(),
                    ));
                }
                if !(*sigma_rot > 0.0) {
                    return Err(Error::NonPositive { what: "sigma_rot" });
                }
                if !(*sigma_trans > 0.0) {
                    return Err(Error::NonPositive { what: "sigma_trans" });
                }
                if let Some(bounds) = truncation {
                    for axis in bounds {
                        if !(axis[0] < axis[1]) {
                            return Err(Error::InvalidInput(
                                "truncation bounds must satisfy low < high".to_string(),
                            ));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Draw `n` wrapped-normal samples using a caller-provided RNG.
pub fn sample_wrapped_normal_with(
    spec: &WrappedNormalSpec,
    n: usize,
    r: &mut Rng,
) -> Result<Vec<ManifoldPoint>, Error> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::InvalidInput("sample count must be at least 1".to_string()));
    }
    let mut out = Vec::with_capacity(n);
    match spec {
        WrappedNormalSpec::Isotropic { center, sigma } => {
            let d = center.kind().tangent_dim();
            let mut coeffs = alloc::vec![0.0; d];
            for _ in 0..n {
                for c in coeffs.iter_mut() {
                    *c = sigma * rng::standard_normal(r);
                }
                let v = tangent_from_chart(center, &coeffs)?;
                out.push(exp_map(&v)?);
            }
        }
        WrappedNormalSpec::Se3 {
            center,
            sigma_rot,
            sigma_trans,
            truncation,
        } => {
            let center_flat = center.to_flat();
            let center_t = [center_flat[4], center_flat[5], center_flat[6]];
            for _ in 0..n {
                let rot = [
                    sigma_rot * rng::standard_normal(r),
                    sigma_rot * rng::standard_normal(r),
                    sigma_rot * rng::standard_normal(r),
                ];
                let mut trans = draw_translation(&center_t, *sigma_trans, truncation, r);
                for (t, c) in trans.iter_mut().zip(&center_t) {
                    *t -= c; // back to a displacement from the center
                }
                let v = TangentVector::from_flat(
                    center,
                    &[rot[0], rot[1], rot[2], trans[0], trans[1], trans[2]],
                )?;
                out.push(exp_map(&v)?);
            }
        }
    }
    Ok(out)
}

/// Draw `n` wrapped-normal samples; deterministic for a fixed seed.
pub fn sample_wrapped_normal(
    spec: &WrappedNormalSpec,
    n: usize,
    seed: u64,
) -> Result<Vec<ManifoldPoint>, Error> {
    let mut r = rng::seeded(seed, 0);
    sample_wrapped_normal_with(spec, n, &mut r)
}

fn draw_translation(
    center: &[f64; 3],
    sigma: f64,
    truncation: &Option<[[f64; 2]; 3]>,
    r: &mut Rng,
) -> [f64; 3] {
    let draw = |r: &mut Rng| {
        [
            center[0] + sigma * rng::standard_normal(r),
            center[1] + sigma * rng::standard_normal(r),
            center[2] + sigma * rng::standard_normal(r),
        ]
    };
    let Some(bounds) = truncation else {
        return draw(r);
    };
    let inside = |t: &[f64; 3]| {
        t.iter()
            .zip(bounds)
            .all(|(v, b)| *v >= b[0] && *v <= b[1])
    };
    let mut t = draw(r);
    for _ in 0..TRUNCATION_ATTEMPTS {
        if inside(&t) {
            return t;
        }
        t = draw(r);
    }
    // Rejection exhausted (possible only for extreme scale/box combinations):
    // clip onto the box instead.
    for (v, b) in t.iter_mut().zip(bounds) {
        *v = v.clamp(b[0], b[1]);
    }
    t
}

/// Haar-uniform random rotation as a canonical-sign unit quaternion, from
/// four normalized Gaussian deviates.
pub fn haar_quat(r: &mut Rng) -> [f64; 4] {
    loop {
        let q = [
            rng::standard_normal(r),
            rng::standard_normal(r),
            rng::standard_normal(r),
            rng::standard_normal(r),
        ];
        let n = num::sqrt(q.iter().map(|v| v * v).sum());
        if n > 1e-6 {
            let unit = [q[0] / n, q[1] / n, q[2] / n, q[3] / n];
            return geometry::lin3::quat_canonical_sign(&unit);
        }
    }
}

/// Greedy max-min landmark selection: start from `start_index`, then
/// repeatedly add the pool point farthest (in geodesic distance) from the
/// already-selected set, ties broken by lowest index. Returns the selected
/// indices in pick order.
pub fn farthest_point_indices(
    pool: &[ManifoldPoint],
    k: usize,
    start_index: usize,
) -> Result<Vec<usize>, Error> {
    if pool.is_empty() {
        return Err(Error::InvalidInput("farthest-point pool is empty".to_string()));
    }
    if k == 0 || k > pool.len() {
        return Err(Error::InvalidInput(
            "farthest-point count must be in 1..=pool size".to_string(),
        ));
    }
    if start_index >= pool.len() {
        return Err(Error::InvalidInput(
            "farthest-point start index out of range".to_string(),
        ));
    }
    let mut picked = Vec::with_capacity(k);
    picked.push(start_index);
    let mut min_dist: Vec<f64> = Vec::with_capacity(pool.len());
    for p in pool {
        min_dist.push(geometry::distance(p, &pool[start_index])?);
    }
    while picked.len() < k {
        let mut best = 0usize;
        let mut best_d = f64::NEG_INFINITY;
        for (i, d) in min_dist.iter().enumerate() {
            if *d > best_d {
                best_d = *d;
                best = i;
            }
        }
        picked.push(best);
        for (i, d) in min_dist.iter_mut().enumerate() {
            let nd = geometry::distance(&pool[i], &pool[best])?;
            if nd < *d {
                *d = nd;
            }
        }
    }
    Ok(picked)
}

/// `farthest_point_indices`, materialized as points.
pub fn farthest_point_sample(
    pool: &[ManifoldPoint],
    k: usize,
    start_index: usize,
) -> Result<Vec<ManifoldPoint>, Error> {
    Ok(farthest_point_indices(pool, k, start_index)?
        .into_iter()
        .map(|i| pool[i].clone())
        .collect())
}
