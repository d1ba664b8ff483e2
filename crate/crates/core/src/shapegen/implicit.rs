//! Implicit atrium: smooth union of an ellipsoid body and capsule tubes,
//! composed with a divergence-free sinusoidal warp.

use std::f64::consts::PI;

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::params::{direction, AtriumParams};

/// Smooth-min blend width.
pub const BLEND_MM: f64 = 4.0;

/// Fixed direction from the body center to the septal landmark.
pub fn septum_direction() -> Vector3<f64> {
    direction(200.0, 0.0)
}

const WARP_OCTAVES: usize = 3;
const WAVES_PER_OCTAVE: usize = 2;
const WARP_BASE_WAVELENGTH_MM: f64 = 200.0;
const INVERSE_ITERATIONS: usize = 60;

/// Polynomial smooth minimum.
pub fn smin(a: f64, b: f64, k: f64) -> f64 {
    let h = (k - (a - b).abs()).max(0.0) / k;
    a.min(b) - h * h * k * 0.25
}

/// Approximate signed distance to an axis-aligned ellipsoid at the origin.
/// The sign is exact: negative strictly inside, zero on, positive outside.
pub fn ellipsoid_sdf(p: &Vector3<f64>, radii: &[f64; 3]) -> f64 {
    let q: f64 = (0..3).map(|a| (p[a] / radii[a]).powi(2)).sum();
    let k1 = (0..3).map(|a| (p[a] / (radii[a] * radii[a])).powi(2)).sum::<f64>().sqrt();
    if k1 == 0.0 {
        return -radii.iter().cloned().fold(f64::INFINITY, f64::min);
    }
    let k0 = q.sqrt();
    let d = k0 * (k0 - 1.0) / k1;
    if q > 1.0 {
        d.max(f64::MIN_POSITIVE)
    } else {
        d.min(0.0)
    }
}

/// Distance from the origin to the ellipsoid surface along unit `dir`.
pub fn ellipsoid_ray(dir: &Vector3<f64>, radii: &[f64; 3]) -> f64 {
    1.0 / (0..3).map(|a| (dir[a] / radii[a]).powi(2)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy)]
pub struct Capsule {
    pub a: Point3<f64>,
    pub b: Point3<f64>,
    pub radius: f64,
}

impl Capsule {
    pub fn sdf(&self, p: &Point3<f64>) -> f64 {
        let ab = self.b - self.a;
        let t = ((p - self.a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
        (p - (self.a + ab * t)).norm() - self.radius
    }
}

#[derive(Debug, Clone, Copy)]
struct Wave {
    k: Vector3<f64>,
    dir: Vector3<f64>,
    phase: f64,
    weight: f64,
}

/// Displacement `u(x) = amp * sum_t w_t c_t cos(k_t . x + phi_t) / sum_t w_t`
/// with every `c_t` a unit vector orthogonal to `k_t`, so `div u = 0`.
#[derive(Debug, Clone)]
pub struct Warp {
    waves: Vec<Wave>,
    amp: f64,
}

impl Warp {
    pub fn new(seed: u64, amp: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let unit = |rng: &mut ChaCha8Rng| loop {
            let v = Vector3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
            if v.norm() > 1e-6 {
                break v.normalize();
            }
        };
        let mut waves = Vec::with_capacity(WARP_OCTAVES * WAVES_PER_OCTAVE);
        let weight_sum: f64 = (0..WARP_OCTAVES).map(|o| 0.5f64.powi(o as i32)).sum::<f64>()
            * WAVES_PER_OCTAVE as f64;
        for o in 0..WARP_OCTAVES {
            let freq = 2.0 * PI / WARP_BASE_WAVELENGTH_MM * 2f64.powi(o as i32);
            for _ in 0..WAVES_PER_OCTAVE {
                let khat = unit(&mut rng);
                let dir = loop {
                    let c = khat.cross(&unit(&mut rng));
                    if c.norm() > 1e-3 {
                        break c.normalize();
                    }
                };
                let phase = rng.random_range(0.0..2.0 * PI);
                waves.push(Wave {
                    k: khat * freq,
                    dir,
                    phase,
                    weight: 0.5f64.powi(o as i32) / weight_sum,
                });
            }
        }
        Self { waves, amp }
    }

    pub fn displacement(&self, x: &Point3<f64>) -> Vector3<f64> {
        if self.amp == 0.0 {
            return Vector3::zeros();
        }
        self.waves.iter().fold(Vector3::zeros(), |acc, w| {
            acc + w.dir * (w.weight * (w.k.dot(&x.coords) + w.phase).cos())
        }) * self.amp
    }

    /// Upper bound on the Lipschitz constant of the displacement.
    pub fn lipschitz(&self) -> f64 {
        self.amp * self.waves.iter().map(|w| w.weight * w.k.norm()).sum::<f64>()
    }

    pub fn forward(&self, x: &Point3<f64>) -> Point3<f64> {
        x + self.displacement(x)
    }

    /// Solves `y = x + u(x)` for `x` by fixed-point iteration.
    pub fn inverse(&self, y: &Point3<f64>) -> Point3<f64> {
        let mut x = *y;
        for _ in 0..INVERSE_ITERATIONS {
            let next = y - self.displacement(&x);
            let step = (next - x).norm();
            x = next;
            if step < 1e-12 {
                break;
            }
        }
        x
    }
}

/// Evaluable implicit atrium: `value(p) <= 0` is inside.
#[derive(Debug, Clone)]
pub struct AtriumShape {
    pub radii: [f64; 3],
    /// PV tubes in LS, LI, RI, RS order; `None` for zero-length tubes.
    pub pv: [Option<Capsule>; 4],
    pub appendage: Option<Capsule>,
    pub warp: Warp,
    pv_axis: [(Point3<f64>, Vector3<f64>, f64); 4],
}

fn tube(dir: &Vector3<f64>, radii: &[f64; 3], radius: f64, length: f64) -> (Point3<f64>, Option<Capsule>) {
    let s = ellipsoid_ray(dir, radii);
    let end = Point3::from(dir * (s + length));
    let capsule = (length > 0.0).then(|| Capsule {
        a: Point3::from(dir * (s - radius)),
        b: end,
        radius,
    });
    (end, capsule)
}

impl AtriumShape {
    pub fn new(params: &AtriumParams) -> Self {
        let radii = params.body_radii_mm;
        let mut pv = [None; 4];
        let mut pv_axis = [(Point3::origin(), Vector3::zeros(), 0.0); 4];
        for i in 0..4 {
            let (end, capsule) = tube(&params.pv_dir[i], &radii, params.pv_radius_mm[i], params.pv_length_mm[i]);
            pv[i] = capsule;
            pv_axis[i] = (end, params.pv_dir[i], params.pv_radius_mm[i]);
        }
        let (_, appendage) = tube(
            &params.appendage_dir,
            &radii,
            params.appendage_radius_mm,
            params.appendage_length_mm,
        );
        Self {
            radii,
            pv,
            appendage,
            warp: Warp::new(params.warp_seed, params.warp_amp_mm),
            pv_axis,
        }
    }

    /// Implicit value before warping.
    pub fn base_value(&self, p: &Point3<f64>) -> f64 {
        let mut f = ellipsoid_sdf(&p.coords, &self.radii);
        for c in self.pv.iter().chain(std::iter::once(&self.appendage)).flatten() {
            f = smin(f, c.sdf(p), BLEND_MM);
        }
        f
    }

    /// Implicit value of the warped shape.
    pub fn value(&self, p: &Point3<f64>) -> f64 {
        self.base_value(&self.warp.inverse(p))
    }

    /// Warped end of PV `i`'s tube axis.
    pub fn pv_axis_end(&self, i: usize) -> Point3<f64> {
        self.warp.forward(&self.pv_axis[i].0)
    }

    /// PV landmark: the end-cap point on the axis, pulled inward just enough
    /// that its warped image stays within the tube radius of the warped
    /// axis end.
    pub fn pv_landmark(&self, i: usize) -> Point3<f64> {
        let (end, dir, radius) = self.pv_axis[i];
        let reach = radius / (1.0 + self.warp.lipschitz());
        self.warp.forward(&(end + dir * reach))
    }

    /// Warped point where the septal direction leaves the body ellipsoid.
    pub fn septum_landmark(&self) -> Point3<f64> {
        let d = septum_direction();
        self.warp.forward(&Point3::from(d * ellipsoid_ray(&d, &self.radii)))
    }

    /// Warped point where PV `i`'s axis leaves the body ellipsoid.
    pub fn pv_base(&self, i: usize) -> Point3<f64> {
        let d = self.pv_axis[i].1;
        self.warp.forward(&Point3::from(d * ellipsoid_ray(&d, &self.radii)))
    }
}
