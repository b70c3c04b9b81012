//! Incident-field states, encoded by their narrowband amplitude data.
//!
//! Every state carries a positive `scale` that absorbs its normalization
//! constants; correlators are therefore defined up to that constant.

use std::cell::Cell;
use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::geometry::{Direction, PolarizationBasis};
use crate::quadrature::gauss_legendre;
use crate::{CVec3, Complex64, Error, Result};

/// Amplitudes vanish beyond this many frequency widths from the carrier.
pub const BAND_SIGMAS: f64 = 3.0;

/// Envelopes count as narrowband when both relative widths are below this.
pub const NARROWBAND_RATIO: f64 = 0.1;

const ANGULAR_NODES: usize = 96;
const ANGULAR_CUTOFF_WIDTHS: f64 = 10.0;

fn solid_angle_integral(w: f64) -> f64 {
    let hi = (ANGULAR_CUTOFF_WIDTHS * w).min(PI);
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    let (x, wt) = RULE.get_or_init(|| gauss_legendre(ANGULAR_NODES));
    let half = 0.5 * hi;
    2.0 * PI
        * half
        * x.iter()
            .zip(wt)
            .map(|(x, wt)| {
                let t = half * (1.0 + x);
                wt * angular_gaussian(t, w) * t.sin()
            })
            .sum::<f64>()
}

fn default_scale() -> f64 {
    1.0
}

/// Gaussian envelope `C(ωm)` peaked at `ω̂ s`: `exp(−θ²/2w²)` in the angle
/// between `m` and `s`, times a Gaussian of width `frequency_width` in `ω − ω̂`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralEnvelope {
    pub carrier_frequency: f64,
    pub carrier_direction: Direction,
    pub angular_width: f64,
    pub frequency_width: f64,
}

impl SpectralEnvelope {
    pub fn new(
        carrier_frequency: f64,
        carrier_direction: Direction,
        angular_width: f64,
        frequency_width: f64,
    ) -> Result<Self> {
        let env = SpectralEnvelope {
            carrier_frequency,
            carrier_direction,
            angular_width,
            frequency_width,
        };
        env.validate()?;
        Ok(env)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.carrier_frequency > 0.0 && self.carrier_frequency.is_finite()) {
            return Err(Error::invalid(
                "carrier_frequency",
                format!("{} must be positive", self.carrier_frequency),
            ));
        }
        for (name, w) in [
            ("angular_width", self.angular_width),
            ("frequency_width", self.frequency_width),
        ] {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::invalid(name, format!("{w} must be positive")));
            }
        }
        Ok(())
    }

    pub fn is_narrowband(&self) -> bool {
        self.angular_width < NARROWBAND_RATIO
            && self.frequency_width < NARROWBAND_RATIO * self.carrier_frequency
    }

    pub fn in_band(&self, omega: f64) -> bool {
        (omega - self.carrier_frequency).abs() <= BAND_SIGMAS * self.frequency_width
    }

    /// Angular profile at direction `m`.
    pub fn angular_profile(&self, m: &Direction) -> f64 {
        let theta = self.carrier_direction.angle_to(m);
        angular_gaussian(theta, self.angular_width)
    }

    /// Frequency profile, zero outside the band.
    pub fn frequency_profile(&self, omega: f64) -> f64 {
        if !self.in_band(omega) {
            return 0.0;
        }
        let d = (omega - self.carrier_frequency) / self.frequency_width;
        (-0.5 * d * d).exp()
    }

    /// `∮ dΩ` of the angular profile.
    pub fn solid_angle_weight(&self) -> f64 {
        thread_local! {
            static LAST: Cell<(u64, f64)> = const { Cell::new((u64::MAX, 0.0)) };
        }
        let key = self.angular_width.to_bits();
        let (k, v) = LAST.with(Cell::get);
        if k == key {
            return v;
        }
        let v = solid_angle_integral(self.angular_width);
        LAST.with(|c| c.set((key, v)));
        v
    }

    /// The factor `∮ dΩ C(ωm)` multiplying the narrowband amplitudes.
    pub fn amplitude_weight(&self, omega: f64) -> f64 {
        let f = self.frequency_profile(omega);
        if f == 0.0 {
            0.0
        } else {
            f * self.solid_angle_weight()
        }
    }

    /// Same envelope with a new carrier frequency.
    pub fn retuned(&self, carrier_frequency: f64) -> Self {
        SpectralEnvelope {
            carrier_frequency,
            ..*self
        }
    }

    pub fn with_direction(&self, carrier_direction: Direction) -> Self {
        SpectralEnvelope {
            carrier_direction,
            ..*self
        }
    }
}

fn angular_gaussian(theta: f64, width: f64) -> f64 {
    (-(theta * theta) / (2.0 * width * width)).exp()
}

fn normalize_pair(c: [Complex64; 2]) -> Result<[Complex64; 2]> {
    let norm = (c[0].norm_sqr() + c[1].norm_sqr()).sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::invalid(
            "pol_coeffs",
            "polarization coefficients must not both be zero",
        ));
    }
    Ok([c[0] / norm, c[1] / norm])
}

/// `p(s) = c_α e_α(s)` in the Gram–Schmidt basis of `s`.
pub fn polarization_vector(s: &Direction, c: &[Complex64; 2]) -> CVec3 {
    let b = PolarizationBasis::for_direction(s);
    b.e1.map(|v| c[0] * v) + b.e2.map(|v| c[1] * v)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnePhotonState {
    pub envelope: SpectralEnvelope,
    pub pol_coeffs: [Complex64; 2],
    #[serde(default = "default_scale")]
    pub scale: f64,
}

impl OnePhotonState {
    pub fn polarization(&self) -> CVec3 {
        polarization_vector(&self.envelope.carrier_direction, &self.pol_coeffs)
    }

    fn validate(&self) -> Result<Self> {
        self.envelope.validate()?;
        check_scale(self.scale)?;
        Ok(OnePhotonState {
            pol_coeffs: normalize_pair(self.pol_coeffs)?,
            ..*self
        })
    }
}

/// One-photon state with unit-norm polarization coefficients.
pub fn make_one_photon(
    carrier_frequency: f64,
    direction: Direction,
    pol_coeffs: [Complex64; 2],
    angular_width: f64,
    frequency_width: f64,
) -> Result<OnePhotonState> {
    OnePhotonState {
        envelope: SpectralEnvelope::new(
            carrier_frequency,
            direction,
            angular_width,
            frequency_width,
        )?,
        pol_coeffs,
        scale: 1.0,
    }
    .validate()
}

/// Whether the measured Cartesian component of `p(s)` vanishes, so the
/// incident field is invisible to that detector component.
pub fn eliminated_component_exists(state: &OnePhotonState, component: usize) -> bool {
    state.polarization()[component].norm() < 1e-12
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoherentState {
    pub envelope: SpectralEnvelope,
    pub pol_coeffs: [Complex64; 2],
    pub amplitude: Complex64,
    #[serde(default = "default_scale")]
    pub scale: f64,
}

impl CoherentState {
    pub fn new(
        envelope: SpectralEnvelope,
        pol_coeffs: [Complex64; 2],
        amplitude: Complex64,
    ) -> Result<Self> {
        CoherentState {
            envelope,
            pol_coeffs,
            amplitude,
            scale: 1.0,
        }
        .validate()
    }

    fn validate(&self) -> Result<Self> {
        self.envelope.validate()?;
        check_scale(self.scale)?;
        if !(self.amplitude.re.is_finite() && self.amplitude.im.is_finite()) {
            return Err(Error::invalid("amplitude", "must be finite"));
        }
        Ok(CoherentState {
            pol_coeffs: normalize_pair(self.pol_coeffs)?,
            ..*self
        })
    }

    /// The one-photon state sharing this mode's envelope and polarization.
    pub fn mode(&self) -> OnePhotonState {
        OnePhotonState {
            envelope: self.envelope,
            pol_coeffs: self.pol_coeffs,
            scale: self.scale,
        }
    }
}

/// Product two-photon state: envelope `u` peaks at `ω̂_u s_u`, polarization
/// amplitude `c_αβ` is symmetric.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoPhotonState {
    pub envelopes: [SpectralEnvelope; 2],
    pub pol_matrix: [[Complex64; 2]; 2],
    #[serde(default = "default_scale")]
    pub scale: f64,
}

const DEGENERATE_TOLERANCE: f64 = 1e-12;

impl TwoPhotonState {
    /// Builds the bosonic-symmetric state from possibly asymmetric `c`.
    pub fn new(envelopes: [SpectralEnvelope; 2], pol_matrix: [[Complex64; 2]; 2]) -> Result<Self> {
        let s = TwoPhotonState {
            envelopes,
            pol_matrix,
            scale: 1.0,
        };
        s.check()?;
        Ok(symmetrize_two_photon(&s))
    }

    fn check(&self) -> Result<()> {
        for e in &self.envelopes {
            e.validate()?;
        }
        check_scale(self.scale)?;
        if self
            .pol_matrix
            .iter()
            .flatten()
            .any(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            return Err(Error::invalid("pol_matrix", "entries must be finite"));
        }
        Ok(())
    }

    /// `ω̂₁ = ω̂₂` up to a relative 1e-12.
    pub fn degenerate(&self) -> bool {
        let (a, b) = (
            self.envelopes[0].carrier_frequency,
            self.envelopes[1].carrier_frequency,
        );
        (a - b).abs() <= DEGENERATE_TOLERANCE * a.max(b)
    }

    pub fn is_symmetric(&self) -> bool {
        self.pol_matrix[0][1] == self.pol_matrix[1][0]
    }
}

/// Bosonic completion: `c → (c + cᵀ)/2`, which leaves the state unchanged
/// because creation operators commute, and a canonical envelope order (lower
/// carrier frequency first, ties broken by direction). Relabeling the photons
/// transposes `c`, which is a no-op once it is symmetric.
pub fn symmetrize_two_photon(state: &TwoPhotonState) -> TwoPhotonState {
    let c = state.pol_matrix;
    let off = (c[0][1] + c[1][0]) * 0.5;
    let sym = [[c[0][0], off], [off, c[1][1]]];
    let [e0, e1] = state.envelopes;
    let key = |e: &SpectralEnvelope| {
        let d: [f64; 3] = e.carrier_direction.into();
        (e.carrier_frequency, d[0], d[1], d[2])
    };
    let swap = key(&e1).partial_cmp(&key(&e0)) == Some(std::cmp::Ordering::Less);
    let envelopes = if swap { [e1, e0] } else { [e0, e1] };
    TwoPhotonState {
        envelopes,
        pol_matrix: sym,
        scale: state.scale,
    }
}

/// Which polarization tensor the second branch of an entangled state uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaConvention {
    /// Both branches use `Θ(s₁, s₂)`.
    #[default]
    Shared,
    /// Each branch uses the tensor of its own carriers.
    PerBranch,
}

/// Superposition of two product biphotons, peaked at `(ω̂₁q₁, ω̂₂q₂)` and
/// `(ω̂₁s₁, ω̂₂s₂)`, with a common Gaussian profile `R`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntangledBiphotonState {
    pub branch_a: [Direction; 2],
    pub branch_b: [Direction; 2],
    pub frequencies: [f64; 2],
    pub angular_width: f64,
    pub frequency_width: f64,
    pub pol_matrix: [[Complex64; 2]; 2],
    #[serde(default)]
    pub theta_convention: ThetaConvention,
    #[serde(default = "default_scale")]
    pub scale: f64,
}

impl EntangledBiphotonState {
    pub fn new(
        branch_a: [Direction; 2],
        branch_b: [Direction; 2],
        frequencies: [f64; 2],
        angular_width: f64,
        frequency_width: f64,
        pol_matrix: [[Complex64; 2]; 2],
    ) -> Result<Self> {
        EntangledBiphotonState {
            branch_a,
            branch_b,
            frequencies,
            angular_width,
            frequency_width,
            pol_matrix,
            theta_convention: ThetaConvention::Shared,
            scale: 1.0,
        }
        .validate()
    }

    fn validate(&self) -> Result<Self> {
        let [w1, w2] = self.frequencies;
        if (w1 - w2).abs() <= DEGENERATE_TOLERANCE * w1.abs().max(w2.abs()) {
            return Err(Error::invalid(
                "frequencies",
                "entangled biphotons need distinct carrier frequencies",
            ));
        }
        check_scale(self.scale)?;
        for b in self.branches() {
            b.check()?;
        }
        let c = self.pol_matrix;
        let off = (c[0][1] + c[1][0]) * 0.5;
        Ok(EntangledBiphotonState {
            pol_matrix: [[c[0][0], off], [off, c[1][1]]],
            ..*self
        })
    }

    fn envelope(&self, u: usize, d: Direction) -> SpectralEnvelope {
        SpectralEnvelope {
            carrier_frequency: self.frequencies[u],
            carrier_direction: d,
            angular_width: self.angular_width,
            frequency_width: self.frequency_width,
        }
    }

    /// The two product branches `(q₁, q₂)` and `(s₁, s₂)`.
    pub fn branches(&self) -> [TwoPhotonState; 2] {
        let make = |d: [Direction; 2]| TwoPhotonState {
            envelopes: [self.envelope(0, d[0]), self.envelope(1, d[1])],
            pol_matrix: self.pol_matrix,
            scale: self.scale,
        };
        [make(self.branch_a), make(self.branch_b)]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PhaseMode {
    /// `A_u = |A| e^{iφ_u}` with the given phases.
    Fixed { phases: [f64; 2] },
    /// Phases uniform on `[0, 2π)`, averaged.
    Random,
}

/// Two independent coherent modes with equal amplitude modulus.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoModeCoherentState {
    pub modes: [CoherentState; 2],
    pub phase_mode: PhaseMode,
}

impl TwoModeCoherentState {
    /// Both modes get amplitude `|A|`; phases come from `phase_mode`.
    pub fn new(
        envelopes: [SpectralEnvelope; 2],
        pol_coeffs: [[Complex64; 2]; 2],
        modulus: f64,
        phase_mode: PhaseMode,
    ) -> Result<Self> {
        if !(modulus >= 0.0 && modulus.is_finite()) {
            return Err(Error::invalid(
                "amplitude",
                format!("|A| = {modulus} must be ≥ 0"),
            ));
        }
        let phases = match phase_mode {
            PhaseMode::Fixed { phases } => phases,
            PhaseMode::Random => [0.0, 0.0],
        };
        let mode = |u: usize| {
            CoherentState::new(
                envelopes[u],
                pol_coeffs[u],
                Complex64::from_polar(modulus, phases[u]),
            )
        };
        TwoModeCoherentState {
            modes: [mode(0)?, mode(1)?],
            phase_mode,
        }
        .validate()
    }

    fn validate(&self) -> Result<Self> {
        let m0 = self.modes[0].validate()?;
        let m1 = self.modes[1].validate()?;
        let (a, b) = (m0.amplitude.norm(), m1.amplitude.norm());
        if (a - b).abs() > 1e-12 * a.max(b) {
            return Err(Error::invalid(
                "amplitude",
                format!("mode amplitudes must have equal modulus ({a} vs {b})"),
            ));
        }
        Ok(TwoModeCoherentState {
            modes: [m0, m1],
            phase_mode: self.phase_mode,
        })
    }

    pub fn modulus(&self) -> f64 {
        self.modes[0].amplitude.norm()
    }
}

fn check_scale(scale: f64) -> Result<()> {
    if scale > 0.0 && scale.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("scale", format!("{scale} must be positive")))
    }
}

/// Any supported incident state. JSON form: an object with a `kind` tag
/// (`one_photon`, `coherent`, `two_photon`, `two_mode_coherent`,
/// `entangled`) plus the variant's fields; complex numbers are `[re, im]`,
/// directions `[x, y, z]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IncidentState {
    OnePhoton(OnePhotonState),
    Coherent(CoherentState),
    TwoPhoton(TwoPhotonState),
    TwoModeCoherent(TwoModeCoherentState),
    Entangled(EntangledBiphotonState),
}

impl IncidentState {
    pub fn kind(&self) -> &'static str {
        match self {
            IncidentState::OnePhoton(_) => "one_photon",
            IncidentState::Coherent(_) => "coherent",
            IncidentState::TwoPhoton(_) => "two_photon",
            IncidentState::TwoModeCoherent(_) => "two_mode_coherent",
            IncidentState::Entangled(_) => "entangled",
        }
    }

    /// Re-establishes every invariant (normalization, symmetry).
    pub fn validated(&self) -> Result<Self> {
        Ok(match self {
            IncidentState::OnePhoton(s) => IncidentState::OnePhoton(s.validate()?),
            IncidentState::Coherent(s) => IncidentState::Coherent(s.validate()?),
            IncidentState::TwoPhoton(s) => {
                s.check()?;
                IncidentState::TwoPhoton(symmetrize_two_photon(s))
            }
            IncidentState::TwoModeCoherent(s) => IncidentState::TwoModeCoherent(s.validate()?),
            IncidentState::Entangled(s) => IncidentState::Entangled(s.validate()?),
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: IncidentState = serde_json::from_str(text)?;
        raw.validated()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
