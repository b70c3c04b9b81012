//! Unit directions, transverse projectors and polarization bases.
//!
//! Polarization bases outside the yz-plane carrier frame follow a Gram–Schmidt
//! convention: `e1` is the component of x̂ orthogonal to the carrier (ŷ when the
//! carrier is within 1e-6 rad of ±x̂) and `e2 = s × e1`. For `s = ẑ` this gives
//! `e1 = x̂, e2 = ŷ`, and for carriers in the yz-plane it reproduces the
//! yz-plane frame exactly.

use serde::{Deserialize, Serialize};

use crate::{Error, Mat3, Result, Vec3};

/// Tolerance on `|d| - 1` for a [`Direction`].
pub const UNIT_TOLERANCE: f64 = 1e-12;

const FALLBACK_SINE: f64 = 1e-6;

/// A unit 3-vector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct Direction(Vec3);

impl Direction {
    pub const X: Direction = Direction(Vec3::new(1.0, 0.0, 0.0));
    pub const Y: Direction = Direction(Vec3::new(0.0, 1.0, 0.0));
    pub const Z: Direction = Direction(Vec3::new(0.0, 0.0, 1.0));

    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        unit(Vec3::new(x, y, z))
    }

    /// Direction at polar angle `acos(cos_theta)` from `axis` and azimuth
    /// `azimuth`, measured in the axis' polarization frame (`e1`, `e2`).
    pub fn from_axis(axis: &Direction, cos_theta: f64, azimuth: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&cos_theta) {
            return Err(Error::invalid(
                "cos_theta",
                format!("{cos_theta} outside [-1, 1]"),
            ));
        }
        let basis = PolarizationBasis::for_direction(axis);
        let sin_theta = (1.0 - cos_theta * cos_theta).max(0.0).sqrt();
        let v =
            axis.0 * cos_theta + (basis.e1 * azimuth.cos() + basis.e2 * azimuth.sin()) * sin_theta;
        unit(v)
    }

    pub fn vector(&self) -> &Vec3 {
        &self.0
    }

    pub fn dot(&self, v: &Vec3) -> f64 {
        self.0.dot(v)
    }

    pub fn component(&self, axis: usize) -> f64 {
        self.0[axis]
    }

    /// Angle to another direction, accurate for nearly parallel vectors.
    pub fn angle_to(&self, other: &Direction) -> f64 {
        self.0.cross(&other.0).norm().atan2(self.0.dot(&other.0))
    }
}

impl std::ops::Neg for Direction {
    type Output = Direction;
    fn neg(self) -> Direction {
        Direction(-self.0)
    }
}

impl From<Direction> for [f64; 3] {
    fn from(d: Direction) -> Self {
        [d.0.x, d.0.y, d.0.z]
    }
}

impl TryFrom<[f64; 3]> for Direction {
    type Error = Error;
    fn try_from(v: [f64; 3]) -> Result<Self> {
        unit(Vec3::new(v[0], v[1], v[2]))
    }
}

/// Normalizes `v`. Near-unit inputs are renormalized, never rejected.
pub fn unit(v: Vec3) -> Result<Direction> {
    let norm = v.norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::DegenerateDirection(norm));
    }
    Ok(Direction(v / norm))
}

/// `δ⊥_ik(n) = δ_ik − n_i n_k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransverseProjector(Mat3);

impl TransverseProjector {
    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }
}

pub fn transverse_projector(n: &Direction) -> TransverseProjector {
    TransverseProjector(Mat3::identity() - n.0 * n.0.transpose())
}

/// Orthonormal polarization vectors transverse to a carrier direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolarizationBasis {
    pub carrier: Direction,
    pub e1: Vec3,
    pub e2: Vec3,
}

impl PolarizationBasis {
    /// Gram–Schmidt basis for a general carrier (see module docs).
    pub fn for_direction(s: &Direction) -> Self {
        let s_vec = s.0;
        let reference = if s_vec.cross(&Vec3::x()).norm() < FALLBACK_SINE {
            Vec3::y()
        } else {
            Vec3::x()
        };
        let e1 = (reference - s_vec * s_vec.dot(&reference)).normalize();
        let e2 = s_vec.cross(&e1);
        PolarizationBasis {
            carrier: *s,
            e1,
            e2,
        }
    }

    pub fn vector(&self, alpha: usize) -> &Vec3 {
        match alpha {
            0 => &self.e1,
            1 => &self.e2,
            _ => panic!("polarization index {alpha} out of range"),
        }
    }

    /// Largest deviation from `e_α·e_β = δ_αβ`, `e_α·s = 0`.
    pub fn orthonormality_defect(&self) -> f64 {
        let s = self.carrier.0;
        [
            (self.e1.dot(&self.e1) - 1.0).abs(),
            (self.e2.dot(&self.e2) - 1.0).abs(),
            self.e1.dot(&self.e2).abs(),
            self.e1.dot(&s).abs(),
            self.e2.dot(&s).abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// The two-carrier frame used for the polarization tensor: `s1 = ẑ`,
/// `e1(s1) = e1(s2) = x̂`, `e2(s1) = ŷ`, `s2 = (0, sin φ, cos φ)`,
/// `e2(s2) = (0, cos φ, −sin φ)`.
pub fn yz_plane_basis(phi: f64) -> (PolarizationBasis, PolarizationBasis) {
    let (sin, cos) = phi.sin_cos();
    let b1 = PolarizationBasis {
        carrier: Direction::Z,
        e1: Vec3::x(),
        e2: Vec3::y(),
    };
    let b2 = PolarizationBasis {
        carrier: Direction(Vec3::new(0.0, sin, cos)),
        e1: Vec3::x(),
        e2: Vec3::new(0.0, cos, -sin),
    };
    (b1, b2)
}

/// Projections of carrier, detection and (optionally) second-branch directions
/// onto the scatterer axis `a/|a|`, with `chi = (sigma − nu)/2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryScenario {
    pub sigma: f64,
    pub nu: f64,
    pub kappa: Option<f64>,
    pub chi: f64,
}

impl GeometryScenario {
    /// Checks the resolution constraint `1/2 < |chi| < 1`.
    pub fn check_resolution_constraint(chi: f64) -> Result<()> {
        if chi.abs() > 0.5 && chi.abs() < 1.0 {
            Ok(())
        } else {
            Err(Error::invalid(
                "chi",
                format!("{chi} violates 1/2 < |chi| < 1 (forward/backward detection excluded)"),
            ))
        }
    }

    /// Geometry with `sigma − nu = 2 chi` that avoids `sigma = ±nu`.
    pub fn from_resolution_constraint(chi: f64) -> Result<Self> {
        Self::check_resolution_constraint(chi)?;
        let sigma = chi.signum() * (1.0 + chi.abs()) / 2.0;
        let nu = sigma - 2.0 * chi;
        Ok(GeometryScenario {
            sigma,
            nu,
            kappa: None,
            chi,
        })
    }
}

pub fn scenario_params(s: &Direction, n: &Direction, a: &Vec3) -> Result<GeometryScenario> {
    let axis = unit(*a).map_err(|_| Error::invalid("a", "separation vector must be nonzero"))?;
    let sigma = s.dot(axis.vector());
    let nu = n.dot(axis.vector());
    Ok(GeometryScenario {
        sigma,
        nu,
        kappa: None,
        chi: (sigma - nu) / 2.0,
    })
}
