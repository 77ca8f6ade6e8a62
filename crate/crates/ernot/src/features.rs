//! Feature embeddings that pull manifold points into the Euclidean domain of
//! the potential network: geodesic distances to a fixed landmark set
//! (optionally layer-normalized), or logarithmic coordinates in the tangent
//! space of a fixed base point.

use alloc::string::ToString;
use alloc::vec::Vec;

use crate::error::Error;
use crate::geometry::{self, GeometryError, ManifoldKind, ManifoldPoint};
use crate::num;

/// Epsilon inside the layer-norm denominator.
pub const LAYER_NORM_EPS: f64 = 1e-6;

#[derive(Debug, Clone)]
pub enum FeatureEmbedding {
    /// φ(x) = (d(x, ℓ₁), …, d(x, ℓ_K)), optionally layer-normalized.
    Landmark {
        landmarks: Vec<ManifoldPoint>,
        layer_norm: bool,
    },
    /// φ(x) = flat coordinates of log_base(x). Layer norm is deliberately
    /// not offered here.
    LogCoords { base: ManifoldPoint },
}

impl FeatureEmbedding {
    pub fn landmark(landmarks: Vec<ManifoldPoint>, layer_norm: bool) -> Result<Self, Error> {
        if landmarks.is_empty() {
            return Err(Error::InvalidInput(
                "landmark embedding needs at least one landmark".to_string(),
            ));
        }
        let kind = landmarks[0].kind();
        if landmarks.iter().any(|l| l.kind() != kind) {
            return Err(Error::Geometry(GeometryError::KindMismatch));
        }
        Ok(FeatureEmbedding::Landmark {
            landmarks,
            layer_norm,
        })
    }

    pub fn log_coords(base: ManifoldPoint) -> Self {
        FeatureEmbedding::LogCoords { base }
    }

    pub fn kind(&self) -> ManifoldKind {
        match self {
            FeatureEmbedding::Landmark { landmarks, .. } => landmarks[0].kind(),
            FeatureEmbedding::LogCoords { base } => base.kind(),
        }
    }

    /// Output dimension of the embedding.
    pub fn dim(&self) -> usize {
        match self {
            FeatureEmbedding::Landmark { landmarks, .. } => landmarks.len(),
            FeatureEmbedding::LogCoords { base } => base.kind().tangent_flat_dim(),
        }
    }

    /// Embed one point into `out` (length must equal `dim()`).
    pub fn embed_into(&self, x: &ManifoldPoint, out: &mut [f64]) -> Result<(), Error> {
        if out.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "feature output buffer",
            });
        }
        match self {
            FeatureEmbedding::Landmark {
                landmarks,
                layer_norm,
            } => {
                for (o, l) in out.iter_mut().zip(landmarks) {
                    *o = geometry::distance(x, l)?;
                }
                if *layer_norm {
                    layer_norm_in_place(out);
                }
            }
            FeatureEmbedding::LogCoords { base } => {
                let v = geometry::log_map(base, x)?;
                for (o, c) in out.iter_mut().zip(v.to_flat()) {
                    *o = c;
                }
            }
        }
        Ok(())
    }

    pub fn embed(&self, x: &ManifoldPoint) -> Result<Vec<f64>, Error> {
        let mut out = alloc::vec![0.0; self.dim()];
        self.embed_into(x, &mut out)?;
        Ok(out)
    }

    /// Embed a batch of points as the rows of a flat row-major buffer.
    pub fn embed_all(&self, xs: &[ManifoldPoint]) -> Result<Vec<f64>, Error> {
        let d = self.dim();
        let mut out = alloc::vec![0.0; xs.len() * d];
        for (x, row) in xs.iter().zip(out.chunks_mut(d)) {
            self.embed_into(x, row)?;
        }
        Ok(out)
    }
}

/// Non-affine layer normalization: subtract the mean and divide by the
/// square root of the population variance plus `LAYER_NORM_EPS`.
pub fn layer_norm_in_place(v: &mut [f64]) {
    if v.is_empty() {
        return;
    }
    let n = v.len() as f64;
    let mean = num::kahan_sum(v.iter().copied()) / n;
    let var = num::kahan_sum(v.iter().map(|x| (x - mean) * (x - mean))) / n;
    let denom = num::sqrt(var + LAYER_NORM_EPS);
    for x in v.iter_mut() {
        *x = (*x - mean) / denom;
    }
}
