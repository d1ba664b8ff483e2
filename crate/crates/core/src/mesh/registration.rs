use nalgebra::{Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Proper rigid motion `p -> R p + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn apply(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    pub fn compose(&self, inner: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * inner.rotation,
            translation: self.rotation * inner.translation + self.translation,
        }
    }

    /// Sum of squared residuals of mapping `src` onto `dst`.
    pub fn residual(&self, src: &[Point3<f64>], dst: &[Point3<f64>]) -> f64 {
        src.iter()
            .zip(dst)
            .map(|(s, d)| (self.apply(s) - d).norm_squared())
            .sum()
    }

    /// Frobenius distance of the rotation from the identity.
    pub fn rotation_deviation(&self) -> f64 {
        (self.rotation - Matrix3::identity()).norm()
    }
}

/// Least-squares rigid fit (no scale, no reflection) between corresponding
/// point sets.
pub fn rigid_register(src: &[Point3<f64>], dst: &[Point3<f64>]) -> Result<RigidTransform> {
    if src.len() != dst.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} source vs {} target points",
            src.len(),
            dst.len()
        )));
    }
    if src.len() < 3 {
        return Err(Error::DegenerateConfiguration(format!(
            "need at least 3 correspondences, got {}",
            src.len()
        )));
    }
    let n = src.len() as f64;
    let cs = src.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;
    let cd = dst.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;

    let mut spread = Matrix3::zeros();
    let mut cross = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        let a = s.coords - cs;
        let b = d.coords - cd;
        spread += a * a.transpose();
        cross += a * b.transpose();
    }
    let mut ev = spread.symmetric_eigenvalues().as_slice().to_vec();
    ev.sort_by(|a, b| b.total_cmp(a));
    if ev[0] <= 0.0 || ev[1] <= 1e-12 * ev[0] {
        return Err(Error::DegenerateConfiguration(
            "source points are collinear".into(),
        ));
    }

    let svd = cross.svd(true, true);
    let u = svd.u.unwrap();
    let v_t = svd.v_t.unwrap();
    let v = v_t.transpose();
    let sign = (v * u.transpose()).determinant().signum();
    let fix = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, sign));
    let rotation = v * fix * u.transpose();
    let translation = cd - rotation * cs;
    Ok(RigidTransform {
        rotation,
        translation,
    })
}
