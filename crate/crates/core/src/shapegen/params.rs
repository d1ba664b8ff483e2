//! Atrium parameters and the multivariate normal they are drawn from.

use nalgebra::{DMatrix, DVector, SymmetricEigen, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Length of the flat parameter vector (see [`AtriumParams::from_vector`]).
pub const PARAM_DIM: usize = 24;

/// Draws tried by [`sample_params`] before giving up.
pub const MAX_DRAWS: usize = 1000;

pub const PV_RADIUS_RANGE_MM: (f64, f64) = (3.0, 12.0);
pub const MIN_PV_ANGLE_DEG: f64 = 20.0;

/// Largest warp amplitude accepted by the sampler. Keeps the warp a
/// contraction-friendly perturbation (Lipschitz constant below 1/4).
pub const MAX_WARP_AMP_MM: f64 = 4.5;

const DEFAULT_SPEC: &str = include_str!("../../data/default_mvn.json");

/// Shape parameters of one synthetic atrium. Directions are unit vectors in
/// the patient frame: x left, y posterior, z superior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtriumParams {
    pub body_radii_mm: [f64; 3],
    /// LS, LI, RI, RS.
    pub pv_dir: [Vector3<f64>; 4],
    pub pv_radius_mm: [f64; 4],
    pub pv_length_mm: [f64; 4],
    pub appendage_dir: Vector3<f64>,
    pub appendage_radius_mm: f64,
    pub appendage_length_mm: f64,
    pub warp_seed: u64,
    pub warp_amp_mm: f64,
}

/// Unit vector from azimuth (about +z, from +x) and elevation, in degrees.
pub fn direction(azimuth_deg: f64, elevation_deg: f64) -> Vector3<f64> {
    let (az, el) = (azimuth_deg.to_radians(), elevation_deg.to_radians());
    Vector3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin())
}

fn angles(d: &Vector3<f64>) -> (f64, f64) {
    (d.y.atan2(d.x).to_degrees(), d.z.clamp(-1.0, 1.0).asin().to_degrees())
}

impl AtriumParams {
    /// Builds parameters from the flat vector layout used by [`MvnSpec`]:
    /// body radii (3), PV azimuth/elevation pairs in degrees (8), PV radii (4),
    /// PV lengths (4), appendage azimuth/elevation (2), appendage radius,
    /// appendage length, warp amplitude.
    pub fn from_vector(x: &[f64], warp_seed: u64) -> Result<Self> {
        if x.len() != PARAM_DIM {
            return Err(Error::ShapeMismatch(format!(
                "parameter vector has {} entries, expected {PARAM_DIM}",
                x.len()
            )));
        }
        let pv_dir = std::array::from_fn(|i| direction(x[3 + 2 * i], x[4 + 2 * i]));
        Ok(Self {
            body_radii_mm: [x[0], x[1], x[2]],
            pv_dir,
            pv_radius_mm: [x[11], x[12], x[13], x[14]],
            pv_length_mm: [x[15], x[16], x[17], x[18]],
            appendage_dir: direction(x[19], x[20]),
            appendage_radius_mm: x[21],
            appendage_length_mm: x[22],
            warp_seed,
            warp_amp_mm: x[23],
        })
    }

    pub fn to_vector(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(PARAM_DIM);
        x.extend_from_slice(&self.body_radii_mm);
        for d in &self.pv_dir {
            let (az, el) = angles(d);
            x.extend([az, el]);
        }
        x.extend_from_slice(&self.pv_radius_mm);
        x.extend_from_slice(&self.pv_length_mm);
        let (az, el) = angles(&self.appendage_dir);
        x.extend([az, el, self.appendage_radius_mm, self.appendage_length_mm, self.warp_amp_mm]);
        x
    }

    /// Checks the sampler's acceptance box: positive sizes, PV radii in
    /// range, PV axes at least 20 degrees apart, bounded warp.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.body_radii_mm.iter().any(|&r| !(r > 0.0)) {
            return bad(format!("body radii must be positive: {:?}", self.body_radii_mm));
        }
        let (lo, hi) = PV_RADIUS_RANGE_MM;
        if self.pv_radius_mm.iter().any(|r| !(lo..=hi).contains(r)) {
            return bad(format!("PV radii outside [{lo}, {hi}]: {:?}", self.pv_radius_mm));
        }
        if self.pv_length_mm.iter().any(|&l| !(l > 0.0)) {
            return bad(format!("PV lengths must be positive: {:?}", self.pv_length_mm));
        }
        if !(self.appendage_radius_mm > 0.0 && self.appendage_length_mm > 0.0) {
            return bad("appendage radius and length must be positive".into());
        }
        if !(0.0..=MAX_WARP_AMP_MM).contains(&self.warp_amp_mm) {
            return bad(format!("warp amplitude {} outside [0, {MAX_WARP_AMP_MM}]", self.warp_amp_mm));
        }
        for i in 0..4 {
            for j in i + 1..4 {
                let angle = self.pv_dir[i].angle(&self.pv_dir[j]).to_degrees();
                if angle < MIN_PV_ANGLE_DEG {
                    return bad(format!("PV axes {i} and {j} only {angle:.1} degrees apart"));
                }
            }
        }
        Ok(())
    }
}

/// Multivariate normal over the flat parameter vector plus the Mahalanobis
/// radius beyond which draws are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MvnSpec {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub accept_threshold: f64,
}

impl Default for MvnSpec {
    fn default() -> Self {
        serde_json::from_str(DEFAULT_SPEC).expect("bundled MVN spec parses")
    }
}

impl MvnSpec {
    pub fn validate(&self) -> Result<()> {
        let n = self.mean.len();
        if n != PARAM_DIM {
            return Err(Error::ShapeMismatch(format!("mean has {n} entries, expected {PARAM_DIM}")));
        }
        if self.covariance.len() != n || self.covariance.iter().any(|row| row.len() != n) {
            return Err(Error::ShapeMismatch(format!("covariance must be {n}x{n}")));
        }
        if self.mean.iter().chain(self.covariance.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("MVN entries must be finite".into()));
        }
        for i in 0..n {
            for j in 0..i {
                if (self.covariance[i][j] - self.covariance[j][i]).abs() > 1e-9 {
                    return Err(Error::InvalidConfig(format!("covariance not symmetric at ({i}, {j})")));
                }
            }
        }
        if self.accept_threshold.is_nan() || self.accept_threshold < 0.0 {
            return Err(Error::InvalidConfig("accept_threshold must be >= 0".into()));
        }
        let eig = SymmetricEigen::new(self.covariance_matrix());
        let scale = eig.eigenvalues.amax().max(1.0);
        if eig.eigenvalues.iter().any(|&l| l < -1e-9 * scale) {
            return Err(Error::InvalidConfig("covariance is not positive semi-definite".into()));
        }
        Ok(())
    }

    fn covariance_matrix(&self) -> DMatrix<f64> {
        let n = self.mean.len();
        DMatrix::from_fn(n, n, |i, j| 0.5 * (self.covariance[i][j] + self.covariance[j][i]))
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash_hex(&self) -> String {
        use sha2::{Digest, Sha256};
        let bytes = serde_json::to_vec(self).expect("spec serializes");
        Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Eigen-factorized sampler; eigenvalues below a relative floor are treated
/// as zero so that singular covariances still sample (and score) sensibly.
#[derive(Debug, Clone)]
pub struct MvnSampler {
    mean: DVector<f64>,
    basis: DMatrix<f64>,
    sqrt_eig: DVector<f64>,
}

impl MvnSampler {
    pub fn new(spec: &MvnSpec) -> Result<Self> {
        spec.validate()?;
        let eig = SymmetricEigen::new(spec.covariance_matrix());
        let floor = 1e-12 * eig.eigenvalues.amax();
        let sqrt_eig = eig.eigenvalues.map(|l| if l > floor { l.sqrt() } else { 0.0 });
        Ok(Self {
            mean: DVector::from_column_slice(&spec.mean),
            basis: eig.eigenvectors,
            sqrt_eig,
        })
    }

    /// One draw and its Mahalanobis distance from the mean.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, f64) {
        let mut z = DVector::<f64>::zeros(self.mean.len());
        let mut d2 = 0.0;
        for i in 0..z.len() {
            let g: f64 = rng.sample(StandardNormal);
            if self.sqrt_eig[i] > 0.0 {
                z[i] = g * self.sqrt_eig[i];
                d2 += g * g;
            }
        }
        let x = &self.mean + &self.basis * z;
        (x.iter().copied().collect(), d2.sqrt())
    }

    /// Mahalanobis distance under the pseudo-inverse covariance.
    pub fn mahalanobis(&self, x: &[f64]) -> f64 {
        let dx = DVector::from_column_slice(x) - &self.mean;
        let proj = self.basis.transpose() * dx;
        proj.iter()
            .zip(self.sqrt_eig.iter())
            .filter(|(_, s)| **s > 0.0)
            .map(|(p, s)| (p / s).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Rejection-sampled parameters: draws beyond the Mahalanobis threshold or
/// outside the validity box are redrawn, up to [`MAX_DRAWS`] times.
pub fn sample_params<R: Rng + ?Sized>(spec: &MvnSpec, rng: &mut R) -> Result<AtriumParams> {
    let sampler = MvnSampler::new(spec)?;
    sample_with(&sampler, spec.accept_threshold, rng)
}

pub(crate) fn sample_with<R: Rng + ?Sized>(
    sampler: &MvnSampler,
    threshold: f64,
    rng: &mut R,
) -> Result<AtriumParams> {
    for _ in 0..MAX_DRAWS {
        let (x, d) = sampler.draw(rng);
        let warp_seed: u64 = rng.random();
        if d > threshold {
            continue;
        }
        let params = AtriumParams::from_vector(&x, warp_seed)?;
        if params.validate().is_ok() {
            return Ok(params);
        }
    }
    Err(Error::RejectionExhausted(MAX_DRAWS))
}
