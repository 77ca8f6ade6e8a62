//! Discrete probability measures on a manifold: weighted atom lists with
//! validation, plus pairwise cost/distance matrices against another measure.

use alloc::string::ToString;
use alloc::vec::Vec;

use crate::error::Error;
use crate::geometry::{self, GeometryError, ManifoldKind, ManifoldPoint};
use crate::mat::Mat;
use crate::num;

/// Tolerance for the total-mass check: weights must sum to 1 within this.
pub const MASS_TOL: f64 = 1e-10;

/// A finitely supported probability measure. Atoms all live on the same
/// manifold; weights are nonnegative and sum to one within `MASS_TOL`
/// (individual zero weights are allowed).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    atoms: Vec<ManifoldPoint>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(atoms: Vec<ManifoldPoint>, weights: Vec<f64>) -> Result<Self, Error> {
        if atoms.is_empty() {
            return Err(Error::InvalidInput(
                "a discrete measure needs at least one atom".to_string(),
            ));
        }
        if atoms.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                context: "measure atoms vs weights",
            });
        }
        let kind = atoms[0].kind();
        if atoms.iter().any(|a| a.kind() != kind) {
            return Err(Error::Geometry(GeometryError::KindMismatch));
        }
        if !weights.iter().all(|w| w.is_finite()) {
            return Err(Error::NonFinite {
                context: "measure weights",
            });
        }
        if weights.iter().any(|w| *w < 0.0) {
            return Err(Error::InvalidInput(
                "measure weights must be nonnegative".to_string(),
            ));
        }
        let total = num::kahan_sum(weights.iter().copied());
        if num::abs(total - 1.0) > MASS_TOL {
            return Err(Error::NotAProbability {
                what: "measure weights",
                total,
            });
        }
        Ok(DiscreteMeasure { atoms, weights })
    }

    /// Uniform weights 1/n over the given atoms.
    pub fn uniform(atoms: Vec<ManifoldPoint>) -> Result<Self, Error> {
        let n = atoms.len();
        if n == 0 {
            return Err(Error::InvalidInput(
                "a discrete measure needs at least one atom".to_string(),
            ));
        }
        let w = 1.0 / n as f64;
        Self::new(atoms, alloc::vec![w; n])
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        false // validated nonempty at construction
    }

    pub fn kind(&self) -> ManifoldKind {
        self.atoms[0].kind()
    }

    pub fn atoms(&self) -> &[ManifoldPoint] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Matrix of transport costs ½·d(xᵢ, yⱼ)².
    pub fn cost_matrix(&self, other: &DiscreteMeasure) -> Result<Mat, Error> {
        self.pairwise(other, geometry::cost)
    }

    /// Matrix of geodesic distances d(xᵢ, yⱼ).
    pub fn distance_matrix(&self, other: &DiscreteMeasure) -> Result<Mat, Error> {
        self.pairwise(other, geometry::distance)
    }

    fn pairwise(
        &self,
        other: &DiscreteMeasure,
        f: impl Fn(&ManifoldPoint, &ManifoldPoint) -> Result<f64, GeometryError>,
    ) -> Result<Mat, Error> {
        if self.kind() != other.kind() {
            return Err(Error::Geometry(GeometryError::KindMismatch));
        }
        let mut m = Mat::zeros(self.len(), other.len());
        for (i, x) in self.atoms.iter().enumerate() {
            let row = m.row_mut(i);
            for (j, y) in other.atoms.iter().enumerate() {
                row[j] = f(x, y)?;
            }
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::project;
    use alloc::vec;

    fn sphere_points() -> Vec<ManifoldPoint> {
        let k = ManifoldKind::Sphere2;
        vec![
            project(k, &[1.0, 0.0, 0.0]).unwrap(),
            project(k, &[0.0, 1.0, 0.0]).unwrap(),
            project(k, &[0.0, 0.0, 1.0]).unwrap(),
        ]
    }

    #[test]
    fn accepts_valid_and_rejects_bad_weights() {
        let atoms = sphere_points();
        assert!(DiscreteMeasure::new(atoms.clone(), vec![0.5, 0.5, 0.0]).is_ok());
        assert!(matches!(
            DiscreteMeasure::new(atoms.clone(), vec![0.5, 0.6, 0.0]),
            Err(Error::NotAProbability { .. })
        ));
        assert!(matches!(
            DiscreteMeasure::new(atoms.clone(), vec![0.5, -0.1, 0.6]),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            DiscreteMeasure::new(atoms, vec![0.5, 0.5]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn rejects_mixed_kinds() {
        let mut atoms = sphere_points();
        atoms.push(ManifoldKind::Hyperbolic2.origin());
        assert!(matches!(
            DiscreteMeasure::uniform(atoms),
            Err(Error::Geometry(GeometryError::KindMismatch))
        ));
    }

    #[test]
    fn uniform_sums_to_one() {
        let m = DiscreteMeasure::uniform(sphere_points()).unwrap();
        let total: f64 = m.weights().iter().sum();
        assert!((total - 1.0).abs() <= MASS_TOL);
    }

    #[test]
    fn cost_matrix_is_half_square_of_distance_matrix() {
        let a = DiscreteMeasure::uniform(sphere_points()).unwrap();
        let b = DiscreteMeasure::new(sphere_points(), vec![0.2, 0.3, 0.5]).unwrap();
        let c = a.cost_matrix(&b).unwrap();
        let d = a.distance_matrix(&b).unwrap();
        assert_eq!(c.rows(), 3);
        assert_eq!(c.cols(), 3);
        for i in 0..3 {
            for j in 0..3 {
                let dd = d.get(i, j);
                assert!((c.get(i, j) - 0.5 * dd * dd).abs() < 1e-15);
            }
        }
        // Diagonal is zero: same atom lists.
        for i in 0..3 {
            assert_eq!(c.get(i, i), 0.0);
        }
    }
}
