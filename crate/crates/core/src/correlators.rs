//! Narrowband far-field amplitudes and the correlators `Φ⁽¹⁾`, `Φ⁽²⁾`.
//!
//! Results are defined up to a positive constant per state (its `scale` and
//! the omitted normalization integrals), so ratios and visibilities are exact.
//! A negative detector frequency returns the complex conjugate of the
//! amplitude at `|ω|`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{transverse_projector, Direction, PolarizationBasis};
use crate::scatterer::ScattererModel;
use crate::states::{
    CoherentState, EntangledBiphotonState, OnePhotonState, PhaseMode, SpectralEnvelope,
    ThetaConvention, TwoModeCoherentState, TwoPhotonState,
};
use crate::{CMat3, CVec3, Complex64, Error, Result, Vec3};

/// Detectors with `distance·|ω|` below this are flagged as not far-field.
pub const FAR_FIELD_MIN: f64 = 10.0;

/// The incident beam reaches a detector within this many angular widths of
/// the forward or backward carrier direction.
pub const INCIDENT_CONE_WIDTHS: f64 = 3.0;

const MIN_CONE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(["x", "y", "z"][self.index()])
    }
}

impl FromStr for Axis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "x" | "0" => Ok(Axis::X),
            "y" | "1" => Ok(Axis::Y),
            "z" | "2" => Ok(Axis::Z),
            other => Err(Error::invalid(
                "component",
                format!("`{other}` is not x, y or z"),
            )),
        }
    }
}

/// A far-field detector at `distance · direction` measuring one Cartesian
/// field component at one frequency.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detector {
    pub direction: Direction,
    pub distance: f64,
    pub component: Axis,
    pub frequency: f64,
}

impl Detector {
    pub fn new(
        direction: Direction,
        distance: f64,
        component: Axis,
        frequency: f64,
    ) -> Result<Self> {
        if !(distance > 0.0 && distance.is_finite()) {
            return Err(Error::invalid(
                "distance",
                format!("{distance} must be positive"),
            ));
        }
        if !(frequency != 0.0 && frequency.is_finite()) {
            return Err(Error::invalid(
                "frequency",
                format!("{frequency} must be nonzero"),
            ));
        }
        Ok(Detector {
            direction,
            distance,
            component,
            frequency,
        })
    }

    pub fn is_far_field(&self) -> bool {
        self.distance * self.frequency.abs() >= FAR_FIELD_MIN
    }

    pub fn position(&self) -> Vec3 {
        self.direction.vector() * self.distance
    }

    pub fn with_frequency(&self, frequency: f64) -> Self {
        Detector { frequency, ..*self }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Incident,
    Scattered,
}

/// `⟨0|E(ω, r)|ψ⟩` for a one-photon state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldAmplitude {
    pub vector: CVec3,
    pub kind: FieldKind,
    pub frequency: f64,
}

impl FieldAmplitude {
    pub fn component(&self, axis: Axis) -> Complex64 {
        self.vector[axis.index()]
    }

    fn zero(kind: FieldKind, frequency: f64) -> Self {
        FieldAmplitude {
            vector: CVec3::zeros(),
            kind,
            frequency,
        }
    }
}

/// Outgoing Green function `−e^{i|ω|r}/(4πr)`.
pub fn green(omega: f64, r: f64) -> Result<Complex64> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::invalid("r", format!("{r} must be positive")));
    }
    Ok(-Complex64::from_polar(1.0, omega.abs() * r) / (4.0 * PI * r))
}

/// `−|ω|^{9/2} G_ω(r) δ⊥(n) ε̄[ω(m − n)]`: maps a polarization vector at
/// carrier `m` to the scattered field.
pub(crate) fn scattered_response(
    omega: f64,
    det: &Detector,
    m: &Vec3,
    model: &ScattererModel,
) -> CMat3 {
    let w = omega.abs();
    let n = det.direction.vector();
    let g = -Complex64::from_polar(1.0, w * det.distance) / (4.0 * PI * det.distance);
    let eps = model.ft(&((m - n) * w));
    let proj = transverse_projector(&det.direction)
        .matrix()
        .map(Complex64::from);
    proj * eps.matrix() * (-g * w.powf(4.5))
}

/// `|ω|^{5/2} e^{iω r·m}`.
pub(crate) fn incident_factor(omega: f64, det: &Detector, m: &Vec3) -> Complex64 {
    let w = omega.abs();
    Complex64::from_polar(w.powf(2.5), w * det.position().dot(m))
}

/// Whether the incident wave packet of `env` reaches the detector.
pub fn incident_reaches(env: &SpectralEnvelope, det: &Detector) -> bool {
    let cone = (INCIDENT_CONE_WIDTHS * env.angular_width).max(MIN_CONE);
    let forward = env.carrier_direction.angle_to(&det.direction);
    forward <= cone || PI - forward <= cone
}

fn conj_if_negative(v: CVec3, omega: f64) -> CVec3 {
    if omega < 0.0 {
        v.map(|z| z.conj())
    } else {
        v
    }
}

pub fn one_photon_scattered_amp(
    state: &OnePhotonState,
    det: &Detector,
    model: &ScattererModel,
) -> FieldAmplitude {
    let w = det.frequency;
    let z = state.envelope.amplitude_weight(w.abs()) * state.scale;
    if z == 0.0 {
        return FieldAmplitude::zero(FieldKind::Scattered, w);
    }
    let s = state.envelope.carrier_direction.vector();
    let v = scattered_response(w, det, s, model) * state.polarization() * Complex64::from(z);
    FieldAmplitude {
        vector: conj_if_negative(v, w),
        kind: FieldKind::Scattered,
        frequency: w,
    }
}

/// Plane-wave incident amplitude; whether it reaches the detector is decided
/// by the correlators, not here.
pub fn one_photon_incident_amp(state: &OnePhotonState, det: &Detector) -> FieldAmplitude {
    let w = det.frequency;
    let z = state.envelope.amplitude_weight(w.abs()) * state.scale;
    if z == 0.0 {
        return FieldAmplitude::zero(FieldKind::Incident, w);
    }
    let s = state.envelope.carrier_direction.vector();
    let v = state.polarization() * (incident_factor(w, det, s) * z);
    FieldAmplitude {
        vector: conj_if_negative(v, w),
        kind: FieldKind::Incident,
        frequency: w,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Phi1 {
    pub value: f64,
    /// Incident light reached the measured component, so the first-order
    /// Born result is not self-consistent.
    pub born_inconsistent: bool,
}

/// `|⟨0|E_i|ψ⟩|²`, scattered only or with the incident field when it reaches
/// the detector.
pub fn phi1(
    state: &OnePhotonState,
    det: &Detector,
    model: &ScattererModel,
    include_incident: bool,
) -> Phi1 {
    let scattered = one_photon_scattered_amp(state, det, model).component(det.component);
    let mut total = scattered;
    let mut born_inconsistent = false;
    if include_incident && incident_reaches(&state.envelope, det) {
        let incident = one_photon_incident_amp(state, det).component(det.component);
        if incident.norm() > 0.0 {
            born_inconsistent = true;
        }
        total += incident;
    }
    Phi1 {
        value: total.norm_sqr(),
        born_inconsistent,
    }
}

/// The three parts of the coherent-state intensity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoherentTerms {
    pub incident: f64,
    pub cross: f64,
    pub scattered: f64,
}

impl CoherentTerms {
    pub fn total(&self) -> f64 {
        self.incident + self.cross + self.scattered
    }
}

pub fn coherent_phi1_terms(
    state: &CoherentState,
    det: &Detector,
    model: &ScattererModel,
) -> CoherentTerms {
    let mode = state.mode();
    let a = state.amplitude;
    let es = one_photon_scattered_amp(&mode, det, model).component(det.component) * a;
    let ei = if incident_reaches(&state.envelope, det) {
        one_photon_incident_amp(&mode, det).component(det.component) * a
    } else {
        Complex64::new(0.0, 0.0)
    };
    CoherentTerms {
        incident: ei.norm_sqr(),
        cross: 2.0 * (ei.conj() * es).re,
        scattered: es.norm_sqr(),
    }
}

/// `|⟨E⁽ⁱⁿ⁾⟩ + ⟨E⁽ˢ⁾⟩|²`; the cross terms are kept.
pub fn coherent_phi1(state: &CoherentState, det: &Detector, model: &ScattererModel) -> f64 {
    coherent_phi1_terms(state, det, model).total().max(0.0)
}

/// `Θ_ij = c_αβ e_α|i(s₁) e_β|j(s₂)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThetaTensor(pub CMat3);

impl ThetaTensor {
    pub fn matrix(&self) -> &CMat3 {
        &self.0
    }
}

pub fn theta_tensor(
    c: &[[Complex64; 2]; 2],
    basis1: &PolarizationBasis,
    basis2: &PolarizationBasis,
) -> ThetaTensor {
    let mut m = CMat3::zeros();
    for (a, row) in c.iter().enumerate() {
        for (b, cab) in row.iter().enumerate() {
            let outer = basis1.vector(a) * basis2.vector(b).transpose();
            m += outer.map(|v| cab * v);
        }
    }
    ThetaTensor(m)
}

fn transpose_pol(c: &[[Complex64; 2]; 2]) -> [[Complex64; 2]; 2] {
    [[c[0][0], c[1][0]], [c[0][1], c[1][1]]]
}

/// Response matrix of one photon (envelope `env`) at one detector, including
/// the envelope weight, or `None` when it does not contribute.
fn photon_response(
    env: &SpectralEnvelope,
    det: &Detector,
    model: &ScattererModel,
    kind: FieldKind,
) -> Option<CMat3> {
    let w = det.frequency;
    let z = env.amplitude_weight(w.abs());
    if z == 0.0 {
        return None;
    }
    let s = env.carrier_direction.vector();
    let m = match kind {
        FieldKind::Scattered => scattered_response(w, det, s, model),
        FieldKind::Incident => {
            if !incident_reaches(env, det) {
                return None;
            }
            CMat3::identity() * incident_factor(w, det, s)
        }
    };
    let m = m * Complex64::from(z);
    Some(if w < 0.0 { m.map(|v| v.conj()) } else { m })
}

/// Per-assignment amplitudes `[photon 1 → det1, photon 2 → det1]` of a
/// product two-photon state, each already multiplied by 2 and the scale.
/// `theta_carriers` selects the directions whose bases build `Θ`.
#[allow(clippy::too_many_arguments)]
fn assignment_terms(
    envelopes: &[SpectralEnvelope; 2],
    c: &[[Complex64; 2]; 2],
    scale: f64,
    theta_carriers: [&Direction; 2],
    det1: &Detector,
    det2: &Detector,
    model: &ScattererModel,
    kinds: (FieldKind, FieldKind),
) -> [Complex64; 2] {
    let (i1, i2) = (det1.component.index(), det2.component.index());
    let bases = theta_carriers.map(PolarizationBasis::for_direction);
    let mut out = [Complex64::new(0.0, 0.0); 2];
    for (slot, (a, b)) in [(0usize, 1usize), (1, 0)].into_iter().enumerate() {
        let Some(r1) = photon_response(&envelopes[a], det1, model, kinds.0) else {
            continue;
        };
        let Some(r2) = photon_response(&envelopes[b], det2, model, kinds.1) else {
            continue;
        };
        let cab = if a == 0 { *c } else { transpose_pol(c) };
        let theta = theta_tensor(&cab, &bases[a], &bases[b]);
        let row = r1.row(i1);
        let col = r2.row(i2).transpose();
        let v = (row * theta.matrix() * col)[(0, 0)];
        out[slot] = v * (2.0 * scale);
    }
    out
}

/// Amplitudes of the two photon-to-detector assignments, scattered fields
/// only. At degenerate frequencies both can be nonzero and interfere.
pub fn two_photon_assignment_terms(
    state: &TwoPhotonState,
    det1: &Detector,
    det2: &Detector,
    model: &ScattererModel,
) -> [Complex64; 2] {
    let [e0, e1] = &state.envelopes;
    assignment_terms(
        &state.envelopes,
        &state.pol_matrix,
        state.scale,
        [&e0.carrier_direction, &e1.carrier_direction],
        det1,
        det2,
        model,
        (FieldKind::Scattered, FieldKind::Scattered),
    )
}

/// `⟨0|E⁽ˢ⁾_{i₁}(ω₁, r₁) E⁽ˢ⁾_{i₂}(ω₂, r₂)|ψ₂⟩`.
pub fn two_photon_scattered_amp(
    state: &TwoPhotonState,
    det1: &Detector,
    det2: &Detector,
    model: &ScattererModel,
) -> Complex64 {
    two_photon_assignment_terms(state, det1, det2, model)
        .iter()
        .sum()
}

/// The (in,in), (s,in)+(in,s) and (s,s) two-photon amplitudes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoPhotonTerms {
    pub incident_incident: Complex64,
    pub mixed: Complex64,
    pub scattered_scattered: Complex64,
}

impl TwoPhotonTerms {
    pub fn total(&self) -> Complex64 {
        self.incident_incident + self.mixed + self.scattered_scattered
    }
}

pub fn two_photon_terms(
    state: &TwoPhotonState,
    det1: &Detector,
    det2: &Detector,
    model: &ScattererModel,
) -> TwoPhotonTerms {
    let [e0, e1] = &state.envelopes;
    let carriers = [&e0.carrier_direction, &e1.carrier_direction];
    let amp = |kinds| -> Complex64 {
        assignment_terms(
            &state.envelopes,
            &state.pol_matrix,
            state.scale,
            carriers,
            det1,
            det2,
            model,
            kinds,
        )
        .iter()
        .sum()
    };
    use FieldKind::{Incident as I, Scattered as S};
    TwoPhotonTerms {
        incident_incident: amp((I, I)),
        mixed: amp((S, I)) + amp((I, S)),
        scattered_scattered: amp((S, S)),
    }
}

/// Scattered-only coincidence signal `|⟨0|E⁽ˢ⁾E⁽ˢ⁾|ψ₂⟩|²`.
pub fn phi2(
    state: &TwoPhotonState,
    det1: &Detector,
    det2: &Detector,
    model: &ScattererModel,
) -> f64 {
    two_photon_scattered_amp(state, det1, det2, model).norm_sqr()
}

/// Scattered two-photon amplitude of the two-branch superposition.
pub fn entangled_scattered_amp(
    state: &EntangledBiphotonState,
    det1: &Detector,
    det2: &Detector,
    model: &ScattererModel,
) -> Result<Complex64> {
    let [w1, w2] = state.frequencies;
    if (w1 - w2).abs() <= 1e-12 * w1.abs().max(w2.abs()) {
        return Err(Error::invalid(
            "frequencies",
            "entangled biphotons need distinct carrier frequencies",
        ));
    }
    let mut total = Complex64::new(0.0, 0.0);
    for (k, branch) in state.branches().iter().enumerate() {
        let own = [
            branch.envelopes[0].carrier_direction,
            branch.envelopes[1].carrier_direction,
        ];
        let carriers = match (state.theta_convention, k) {
            (ThetaConvention::Shared, _) => [&state.branch_b[0], &state.branch_b[1]],
            (ThetaConvention::PerBranch, _) => [&own[0], &own[1]],
        };
        let terms = assignment_terms(
            &branch.envelopes,
            &branch.pol_matrix,
            branch.scale,
            carriers,
            det1,
            det2,
            model,
            (FieldKind::Scattered, FieldKind::Scattered),
        );
        total += terms[0] + terms[1];
    }
    Ok(total)
}

pub fn entangled_phi2(
    state: &EntangledBiphotonState,
    det1: &Detector,
    det2: &Detector,
    model: &ScattererModel,
) -> Result<f64> {
    Ok(entangled_scattered_amp(state, det1, det2, model)?.norm_sqr())
}

/// Scattered field of each laser mode (without its amplitude `A`) at each
/// detector: `[[X₁, Y₁], [X₂, Y₂]]`.
fn two_laser_fields(
    state: &TwoModeCoherentState,
    det1: &Detector,
    det2: &Detector,
    model: &ScattererModel,
) -> [[Complex64; 2]; 2] {
    let field = |det: &Detector, u: usize| {
        one_photon_scattered_amp(&state.modes[u].mode(), det, model).component(det.component)
    };
    [
        [field(det1, 0), field(det1, 1)],
        [field(det2, 0), field(det2, 1)],
    ]
}

/// Scattered-only coincidence signal `⟨|E₁|²|E₂|²⟩` for two independent
/// lasers, with `E_u = |A|(e^{iφ₁}X_u + e^{iφ₂}Y_u)`. Random phases are
/// averaged analytically: `|A|⁴(P₁P₂ + 2 Re K₁K₂*)`, `P_u = |X_u|² + |Y_u|²`,
/// `K_u = X_u Y_u*`.
pub fn two_laser_phi2(
    state: &TwoModeCoherentState,
    det1: &Detector,
    det2: &Detector,
    model: &ScattererModel,
) -> f64 {
    let f = two_laser_fields(state, det1, det2, model);
    let a4 = state.modulus().powi(4);
    match state.phase_mode {
        PhaseMode::Fixed { phases } => {
            let e = |u: usize| {
                f[u][0] * Complex64::from_polar(1.0, phases[0])
                    + f[u][1] * Complex64::from_polar(1.0, phases[1])
            };
            a4 * e(0).norm_sqr() * e(1).norm_sqr()
        }
        PhaseMode::Random => {
            let p = |u: usize| f[u][0].norm_sqr() + f[u][1].norm_sqr();
            let k = |u: usize| f[u][0] * f[u][1].conj();
            a4 * (p(0) * p(1) + 2.0 * (k(0) * k(1).conj()).re)
        }
    }
}

/// Monte Carlo phase average of the two-laser signal over `samples` seeded
/// draws of `(φ₁, φ₂)`; returns `(mean, standard error)`.
pub fn two_laser_phi2_monte_carlo(
    state: &TwoModeCoherentState,
    det1: &Detector,
    det2: &Detector,
    model: &ScattererModel,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if samples < 2 {
        return Err(Error::invalid("samples", "need at least 2 samples"));
    }
    let f = two_laser_fields(state, det1, det2, model);
    let a4 = state.modulus().powi(4);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..samples {
        let p1 = Complex64::from_polar(1.0, rng.random_range(0.0..2.0 * PI));
        let p2 = Complex64::from_polar(1.0, rng.random_range(0.0..2.0 * PI));
        let v = a4
            * (f[0][0] * p1 + f[0][1] * p2).norm_sqr()
            * (f[1][0] * p1 + f[1][1] * p2).norm_sqr();
        sum += v;
        sum_sq += v * v;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}
