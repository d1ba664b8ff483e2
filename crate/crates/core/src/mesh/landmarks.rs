use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The four pulmonary veins, in traversal order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PvLabel {
    LeftSuperior,
    LeftInferior,
    RightInferior,
    RightSuperior,
}

impl PvLabel {
    pub const ALL: [PvLabel; 4] = [
        PvLabel::LeftSuperior,
        PvLabel::LeftInferior,
        PvLabel::RightInferior,
        PvLabel::RightSuperior,
    ];

    pub fn key(self) -> &'static str {
        match self {
            PvLabel::LeftSuperior => "pv_ls",
            PvLabel::LeftInferior => "pv_li",
            PvLabel::RightInferior => "pv_ri",
            PvLabel::RightSuperior => "pv_rs",
        }
    }
}

/// PV ostium centers and the septal entry point, in mm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LandmarksJson", into = "LandmarksJson")]
pub struct Landmarks {
    pub pv: [Point3<f64>; 4],
    pub septum: Point3<f64>,
}

impl Landmarks {
    pub fn new(pv: [Point3<f64>; 4], septum: Point3<f64>) -> Result<Self> {
        for i in 0..4 {
            for j in i + 1..4 {
                if pv[i] == pv[j] {
                    return Err(Error::InvalidConfig(format!(
                        "PV landmarks {} and {} coincide",
                        PvLabel::ALL[i].key(),
                        PvLabel::ALL[j].key()
                    )));
                }
            }
        }
        Ok(Self { pv, septum })
    }

    pub fn pv(&self, label: PvLabel) -> Point3<f64> {
        self.pv[label as usize]
    }

    /// Septum followed by the four PVs in traversal order.
    pub fn route(&self) -> [Point3<f64>; 5] {
        [self.septum, self.pv[0], self.pv[1], self.pv[2], self.pv[3]]
    }

    pub fn map(&self, f: impl Fn(&Point3<f64>) -> Point3<f64>) -> Self {
        Self {
            pv: [f(&self.pv[0]), f(&self.pv[1]), f(&self.pv[2]), f(&self.pv[3])],
            septum: f(&self.septum),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct LandmarksJson {
    pv_ls: [f64; 3],
    pv_li: [f64; 3],
    pv_ri: [f64; 3],
    pv_rs: [f64; 3],
    septum: [f64; 3],
}

impl TryFrom<LandmarksJson> for Landmarks {
    type Error = Error;

    fn try_from(j: LandmarksJson) -> Result<Self> {
        let p = |a: [f64; 3]| Point3::new(a[0], a[1], a[2]);
        Landmarks::new([p(j.pv_ls), p(j.pv_li), p(j.pv_ri), p(j.pv_rs)], p(j.septum))
    }
}

impl From<Landmarks> for LandmarksJson {
    fn from(l: Landmarks) -> Self {
        let a = |p: Point3<f64>| [p.x, p.y, p.z];
        LandmarksJson {
            pv_ls: a(l.pv[0]),
            pv_li: a(l.pv[1]),
            pv_ri: a(l.pv[2]),
            pv_rs: a(l.pv[3]),
            septum: a(l.septum),
        }
    }
}
