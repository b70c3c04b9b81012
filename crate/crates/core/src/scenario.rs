//! Named experimental setups: a state, detectors and a two-point scatterer
//! along a fixed axis, evaluable at any separation and frequency.
//!
//! Presets are defined at reference frequency `ω₁ = 1`; [`Scenario::evaluate`]
//! rescales every carrier, bandwidth and detector frequency by `ω`, which
//! leaves all direction constraints intact.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::analysis::{linspace, scan, Signal1D, SignalMetadata};
use crate::correlators::{
    coherent_phi1, entangled_phi2, phi1, phi2, two_laser_phi2, Axis, Detector,
};
use crate::geometry::{transverse_projector, Direction, PolarizationBasis};
use crate::scatterer::{Lambda, ScattererModel, TwoPointCenters};
use crate::states::{
    make_one_photon, CoherentState, EntangledBiphotonState, IncidentState, PhaseMode,
    SpectralEnvelope, TwoModeCoherentState, TwoPhotonState,
};
use crate::{CMat3, Complex64, Error, Result};

/// Resolution parameter of every two-detector preset.
pub const PRESET_CHI: f64 = 0.9;
/// `ω₂/ω₁` of the two-frequency presets.
pub const PRESET_RATIO: f64 = 0.8;
/// Separation used by the preset fit designs.
pub const PRESET_SEPARATION: f64 = 1.3;

const ANGULAR_WIDTH: f64 = 0.01;
const RELATIVE_BANDWIDTH: f64 = 0.01;
const DETECTOR_DISTANCE: f64 = 100.0;
const COHERENT_DISTANCE: f64 = 10.0;

pub const PRESET_NAMES: [&str; 5] = [
    "one-photon-backscatter",
    "coherent-backscatter",
    "two-photon-chi09",
    "two-laser",
    "entangled",
];

/// A scan-and-fit experiment for a preset: synthetic data at
/// `true_separation` over `omega_range`, fitted within `bounds`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitDesign {
    pub true_separation: f64,
    pub omega_range: (f64, f64),
    pub points: usize,
    pub bounds: (f64, f64),
    /// The `Dₙ` containing `a·ω̄` when the design needs prior information.
    pub prior_domain: Option<i64>,
    /// Declared relative measurement precision.
    pub noise_level: f64,
}

impl FitDesign {
    pub fn omega_grid(&self) -> Vec<f64> {
        linspace(self.omega_range.0, self.omega_range.1, self.points)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub state: IncidentState,
    pub detectors: Vec<Detector>,
    pub lambda: Lambda,
    /// Direction of the separation vector `a`.
    pub axis: Direction,
    pub chi: Option<f64>,
    /// Add the incident field to one-photon signals where it reaches the
    /// detector.
    pub include_incident: bool,
}

fn dir(cos_theta: f64, azimuth: f64) -> Result<Direction> {
    Direction::from_axis(&Direction::Z, cos_theta, azimuth)
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn preset_lambda() -> Lambda {
    Lambda::from_upper(1.0, 0.6, 0.8, 0.3, 0.0, 0.0)
}

fn envelope(omega: f64, d: Direction) -> Result<SpectralEnvelope> {
    SpectralEnvelope::new(omega, d, ANGULAR_WIDTH, RELATIVE_BANDWIDTH * omega)
}

/// Measured components `(i₁, i₂)` maximizing `|δ⊥(n₁) Θ δ⊥(n₂)|`.
fn best_components(
    c: &[[Complex64; 2]; 2],
    s: [&Direction; 2],
    n: [&Direction; 2],
) -> (Axis, Axis) {
    let theta = crate::correlators::theta_tensor(
        c,
        &PolarizationBasis::for_direction(s[0]),
        &PolarizationBasis::for_direction(s[1]),
    );
    let p1: CMat3 = transverse_projector(n[0]).matrix().map(Complex64::from);
    let p2: CMat3 = transverse_projector(n[1]).matrix().map(Complex64::from);
    let m = p1 * theta.matrix() * p2.transpose();
    let mut best = (Axis::X, Axis::X, -1.0);
    for a in Axis::ALL {
        for b in Axis::ALL {
            let v = m[(a.index(), b.index())].norm();
            if v > best.2 + 1e-12 {
                best = (a, b, v);
            }
        }
    }
    (best.0, best.1)
}

/// Geometry with `σ₁ − ν₁ = 2χ` and `ω₂(σ₂ − ν₂) = ω₁χ`, carriers at azimuth
/// 0 and detectors at azimuth π/2 about the scatterer axis ẑ.
struct ChiGeometry {
    s: [Direction; 2],
    n: [Direction; 2],
}

fn chi_geometry(chi: f64, ratio: f64) -> Result<ChiGeometry> {
    let sigma1 = 0.95;
    let nu1 = sigma1 - 2.0 * chi;
    let d = chi / ratio;
    let sigma2 = d / 2.0 + (1.0 - d / 2.0) / 4.0;
    let nu2 = sigma2 - d;
    if nu1.abs() > 1.0 || nu2.abs() > 1.0 || sigma2 > 1.0 {
        return Err(Error::invalid(
            "chi",
            format!("no two-photon geometry for chi = {chi}, ratio = {ratio}"),
        ));
    }
    Ok(ChiGeometry {
        s: [dir(sigma1, 0.0)?, dir(sigma2, 0.0)?],
        n: [dir(nu1, PI / 2.0)?, dir(nu2, PI / 2.0)?],
    })
}

impl Scenario {
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "one-photon-backscatter" => Self::one_photon_backscatter(),
            "coherent-backscatter" => Self::coherent_backscatter(),
            "two-photon-chi09" => Self::two_photon(PRESET_CHI, PRESET_RATIO),
            "two-laser" => Self::two_laser(PRESET_CHI, PRESET_RATIO),
            "entangled" => Self::entangled(PRESET_CHI, PRESET_RATIO),
            other => Err(Error::invalid(
                "preset",
                format!(
                    "unknown preset `{other}` (known: {})",
                    PRESET_NAMES.join(", ")
                ),
            )),
        }
    }

    /// `s = ẑ`, `n = −ẑ`, polarization x̂, detected component y: the incident
    /// field is eliminated and `Φ⁽¹⁾ ∝ cos²(2ωa)`.
    pub fn one_photon_backscatter() -> Result<Self> {
        let state = make_one_photon(
            1.0,
            Direction::Z,
            [c(1.0), c(0.0)],
            ANGULAR_WIDTH,
            RELATIVE_BANDWIDTH,
        )?;
        Ok(Scenario {
            name: "one-photon-backscatter".into(),
            state: IncidentState::OnePhoton(state),
            detectors: vec![Detector::new(
                -Direction::Z,
                DETECTOR_DISTANCE,
                Axis::Y,
                1.0,
            )?],
            lambda: preset_lambda(),
            axis: Direction::Z,
            chi: None,
            include_incident: true,
        })
    }

    /// Same geometry with a coherent state, detecting the incident
    /// polarization so the cross term is present.
    pub fn coherent_backscatter() -> Result<Self> {
        let state = CoherentState::new(envelope(1.0, Direction::Z)?, [c(1.0), c(0.0)], c(1.0))?;
        Ok(Scenario {
            name: "coherent-backscatter".into(),
            state: IncidentState::Coherent(state),
            detectors: vec![Detector::new(
                -Direction::Z,
                COHERENT_DISTANCE,
                Axis::X,
                1.0,
            )?],
            lambda: preset_lambda(),
            axis: Direction::Z,
            chi: None,
            include_incident: true,
        })
    }

    pub fn two_photon(chi: f64, ratio: f64) -> Result<Self> {
        crate::geometry::GeometryScenario::check_resolution_constraint(chi)?;
        let g = chi_geometry(chi, ratio)?;
        let pol = [[c(1.0), c(0.0)], [c(0.0), c(0.0)]];
        let state = TwoPhotonState::new([envelope(1.0, g.s[0])?, envelope(ratio, g.s[1])?], pol)?;
        let (i1, i2) = best_components(&pol, [&g.s[0], &g.s[1]], [&g.n[0], &g.n[1]]);
        Ok(Scenario {
            name: "two-photon-chi09".into(),
            state: IncidentState::TwoPhoton(state),
            detectors: vec![
                Detector::new(g.n[0], DETECTOR_DISTANCE, i1, 1.0)?,
                Detector::new(g.n[1], DETECTOR_DISTANCE, i2, ratio)?,
            ],
            lambda: Lambda::isotropic(1.0),
            axis: Direction::Z,
            chi: Some(chi),
            include_incident: false,
        })
    }

    pub fn two_laser(chi: f64, ratio: f64) -> Result<Self> {
        let base = Self::two_photon(chi, ratio)?;
        let IncidentState::TwoPhoton(tp) = base.state else {
            unreachable!("two_photon builds a two-photon state")
        };
        // photon order after symmetrization is by frequency; keep mode 1 at ω₁
        let [lo, hi] = tp.envelopes;
        let pol = [[c(1.0), c(0.0)], [c(1.0), c(0.0)]];
        let state = TwoModeCoherentState::new([hi, lo], pol, 1.0, PhaseMode::Random)?;
        Ok(Scenario {
            name: "two-laser".into(),
            state: IncidentState::TwoModeCoherent(state),
            ..base
        })
    }

    /// Two branches `(q₁, q₂)`, `(s₁, s₂)` with `κ₁ = σ₁`, `κ₁ − ν₁ = 2χ`,
    /// `ω₂(σ₂ − κ₂) = ω₁χ` and `ω₂(κ₂ + σ₂ − 2ν₂) = 2ω₁χ`.
    pub fn entangled(chi: f64, ratio: f64) -> Result<Self> {
        crate::geometry::GeometryScenario::check_resolution_constraint(chi)?;
        let d = chi / ratio;
        let sigma1 = 0.95;
        let nu1 = sigma1 - 2.0 * chi;
        // σ₂ = ν₂ + 1.5d and κ₂ = ν₂ + 0.5d must stay in [−1, 1]
        let nu2_hi = 1.0 - 1.5 * d;
        if nu2_hi < -1.0 {
            return Err(Error::invalid(
                "chi",
                format!("no entangled geometry for chi = {chi}, ratio = {ratio}"),
            ));
        }
        let nu2 = -1.0 + 0.45 * (nu2_hi + 1.0);
        let sigma2 = nu2 + 1.5 * d;
        let kappa2 = nu2 + 0.5 * d;
        let s = [dir(sigma1, 0.0)?, dir(sigma2, 0.0)?];
        let q = [dir(sigma1, PI)?, dir(kappa2, PI)?];
        let n = [dir(nu1, PI / 2.0)?, dir(nu2, PI / 2.0)?];
        let pol = [[c(1.0), c(0.0)], [c(0.0), c(0.0)]];
        let state = EntangledBiphotonState::new(
            q,
            s,
            [1.0, ratio],
            ANGULAR_WIDTH,
            RELATIVE_BANDWIDTH,
            pol,
        )?;
        let (i1, i2) = best_components(&pol, [&s[0], &s[1]], [&n[0], &n[1]]);
        Ok(Scenario {
            name: "entangled".into(),
            state: IncidentState::Entangled(state),
            detectors: vec![
                Detector::new(n[0], DETECTOR_DISTANCE, i1, 1.0)?,
                Detector::new(n[1], DETECTOR_DISTANCE, i2, ratio)?,
            ],
            lambda: Lambda::isotropic(1.0),
            axis: Direction::Z,
            chi: Some(chi),
            include_incident: false,
        })
    }

    /// A user-assembled scenario; the detector count must match the state.
    pub fn custom(
        name: &str,
        state: IncidentState,
        detectors: Vec<Detector>,
        lambda: Lambda,
        axis: Direction,
        include_incident: bool,
    ) -> Result<Self> {
        let state = state.validated()?;
        let needed = match state {
            IncidentState::OnePhoton(_) | IncidentState::Coherent(_) => 1,
            _ => 2,
        };
        if detectors.len() != needed {
            return Err(Error::invalid(
                "detectors",
                format!(
                    "state `{}` needs {needed} detector(s), got {}",
                    state.kind(),
                    detectors.len()
                ),
            ));
        }
        let chi = (needed == 2).then(|| {
            let a = axis.vector();
            let s1 = match &state {
                IncidentState::TwoPhoton(t) => t.envelopes[1].carrier_direction,
                IncidentState::TwoModeCoherent(t) => t.modes[0].envelope.carrier_direction,
                IncidentState::Entangled(t) => t.branch_b[0],
                _ => unreachable!(),
            };
            (s1.dot(a) - detectors[0].direction.dot(a)) / 2.0
        });
        Ok(Scenario {
            name: name.into(),
            state,
            detectors,
            lambda,
            axis,
            chi,
            include_incident,
        })
    }

    pub fn model(&self, a: f64) -> ScattererModel {
        TwoPointCenters::new(self.lambda, self.axis.vector() * a).into()
    }

    /// State and detectors with every frequency multiplied by `k`.
    fn rescaled(&self, k: f64) -> (IncidentState, Vec<Detector>) {
        let env = |e: &SpectralEnvelope| SpectralEnvelope {
            carrier_frequency: e.carrier_frequency * k,
            frequency_width: e.frequency_width * k,
            ..*e
        };
        let state = match self.state {
            IncidentState::OnePhoton(mut s) => {
                s.envelope = env(&s.envelope);
                IncidentState::OnePhoton(s)
            }
            IncidentState::Coherent(mut s) => {
                s.envelope = env(&s.envelope);
                IncidentState::Coherent(s)
            }
            IncidentState::TwoPhoton(mut s) => {
                s.envelopes = s.envelopes.map(|e| env(&e));
                IncidentState::TwoPhoton(s)
            }
            IncidentState::TwoModeCoherent(mut s) => {
                for m in &mut s.modes {
                    m.envelope = env(&m.envelope);
                }
                IncidentState::TwoModeCoherent(s)
            }
            IncidentState::Entangled(mut s) => {
                s.frequencies = s.frequencies.map(|w| w * k);
                s.frequency_width *= k;
                IncidentState::Entangled(s)
            }
        };
        let detectors = self
            .detectors
            .iter()
            .map(|d| d.with_frequency(d.frequency * k))
            .collect();
        (state, detectors)
    }

    /// Signal at separation `a` with all frequencies scaled so that detector 1
    /// sits at `omega`.
    pub fn evaluate(&self, a: f64, omega: f64) -> Result<f64> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::invalid("omega", format!("{omega} must be positive")));
        }
        let k = omega / self.detectors[0].frequency;
        let (state, det) = self.rescaled(k);
        let model = self.model(a);
        Ok(match &state {
            IncidentState::OnePhoton(s) => phi1(s, &det[0], &model, self.include_incident).value,
            IncidentState::Coherent(s) => coherent_phi1(s, &det[0], &model),
            IncidentState::TwoPhoton(s) => phi2(s, &det[0], &det[1], &model),
            IncidentState::TwoModeCoherent(s) => two_laser_phi2(s, &det[0], &det[1], &model),
            IncidentState::Entangled(s) => entangled_phi2(s, &det[0], &det[1], &model)?,
        })
    }

    /// Whether incident light contaminates the signal (one-photon only).
    pub fn born_inconsistent(&self, a: f64) -> bool {
        match &self.state {
            IncidentState::OnePhoton(s) => {
                phi1(s, &self.detectors[0], &self.model(a), self.include_incident).born_inconsistent
            }
            _ => false,
        }
    }

    /// Period of the noiseless signal in `aω`.
    pub fn period(&self) -> f64 {
        let chi = self.chi.unwrap_or(1.0).abs();
        match self.state {
            IncidentState::OnePhoton(_) => PI / 2.0,
            IncidentState::Coherent(_) => PI,
            IncidentState::TwoPhoton(_) | IncidentState::TwoModeCoherent(_) => PI / chi,
            IncidentState::Entangled(_) => 2.0 * PI / chi,
        }
    }

    fn metadata(&self, x_label: &str, fixed: (&str, f64)) -> SignalMetadata {
        let mut params = std::collections::BTreeMap::new();
        params.insert("scenario".to_string(), self.name.clone());
        params.insert(fixed.0.to_string(), format!("{}", fixed.1));
        SignalMetadata {
            kind: self.state.kind().to_string(),
            x_label: x_label.into(),
            chi: self.chi,
            params,
        }
    }

    /// Scan over `x = aω` at fixed `omega`.
    pub fn separation_scan(&self, grid: &[f64], omega: f64) -> Result<Signal1D> {
        scan(
            |x| self.evaluate(x / omega, omega),
            grid,
            self.metadata("a*omega", ("omega", omega)),
        )
    }

    /// Scan over `ω` at fixed separation `a`.
    pub fn frequency_scan(&self, a: f64, grid: &[f64]) -> Result<Signal1D> {
        scan(
            |w| self.evaluate(a, w),
            grid,
            self.metadata("omega", ("a", a)),
        )
    }

    /// Fit design of each preset. One-detector and entangled presets scan
    /// two or more fringes; the two-photon and two-laser presets scan a ±1 %
    /// band around the `aω̄ χ = 3π/2` zero, where separations sharing that zero
    /// shape are indistinguishable at 1 % precision without the `D₁` prior.
    pub fn fit_design(&self) -> FitDesign {
        let a = PRESET_SEPARATION;
        match self.state {
            IncidentState::TwoPhoton(_) | IncidentState::TwoModeCoherent(_) => {
                let chi = self.chi.unwrap_or(PRESET_CHI);
                let center = 1.5 * PI / (chi * a);
                FitDesign {
                    true_separation: a,
                    omega_range: (0.99 * center, 1.01 * center),
                    points: 101,
                    bounds: (0.3, 2.6),
                    prior_domain: Some(1),
                    noise_level: 0.01,
                }
            }
            _ => FitDesign {
                true_separation: a,
                omega_range: (1.0, 3.5),
                points: 151,
                bounds: (0.5, 2.5),
                prior_domain: None,
                noise_level: 0.01,
            },
        }
    }
}
