//! Direct solid-angle quadrature of the un-factorized amplitudes, used to
//! validate the narrowband closed forms.
//!
//! Each photon is integrated on a composite rule around its carrier:
//! Gauss–Legendre in `cos θ` on a cap of half-angle `cap_widths · w` plus a
//! second panel for the rest of the sphere, times a uniform azimuth grid.
//! Only scattered fields are integrated; the frequency delta is consumed
//! analytically, so quadrature runs over directions at fixed `ω`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlators::{self, scattered_response, Detector};
use crate::geometry::{Direction, PolarizationBasis};
use crate::quadrature::gauss_legendre_on;
use crate::scatterer::ScattererModel;
use crate::states::{OnePhotonState, SpectralEnvelope, TwoPhotonState};
use crate::{CMat3, CVec3, Complex64, Error, Result, Vec3};

pub const MIN_NODES: usize = 8;

/// Relative change on node doubling above which a result is rejected.
pub const CONVERGENCE_TOLERANCE: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Gauss–Legendre nodes in `cos θ` per panel.
    pub n_theta: usize,
    /// Uniform azimuth nodes.
    pub n_phi: usize,
    /// Cap half-angle in units of the envelope's angular width.
    pub cap_widths: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            n_theta: 24,
            n_phi: 24,
            cap_widths: 10.0,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_theta < MIN_NODES || self.n_phi < MIN_NODES {
            return Err(Error::invalid(
                "quadrature",
                format!(
                    "n_theta = {}, n_phi = {}: both must be at least {MIN_NODES}",
                    self.n_theta, self.n_phi
                ),
            ));
        }
        if !(self.cap_widths > 0.0 && self.cap_widths.is_finite()) {
            return Err(Error::invalid("cap_widths", "must be positive"));
        }
        Ok(())
    }

    pub fn doubled(&self) -> Self {
        QuadratureSpec {
            n_theta: 2 * self.n_theta,
            n_phi: 2 * self.n_phi,
            ..*self
        }
    }
}

#[derive(Clone, Debug)]
pub struct SphereRule {
    pub nodes: Vec<Direction>,
    pub weights: Vec<f64>,
}

impl SphereRule {
    /// Composite rule centred on `axis` with cap half-angle
    /// `min(π, cap_widths · width)`.
    pub fn around(axis: &Direction, width: f64, spec: &QuadratureSpec) -> Result<Self> {
        spec.validate()?;
        let cap = (spec.cap_widths * width).min(PI);
        let mu_cap = cap.cos();
        let mut panels = vec![gauss_legendre_on(spec.n_theta, mu_cap, 1.0)];
        if mu_cap > -1.0 {
            panels.push(gauss_legendre_on(spec.n_theta, -1.0, mu_cap));
        }
        let dphi = 2.0 * PI / spec.n_phi as f64;
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for (mus, ws) in &panels {
            for (mu, w) in mus.iter().zip(ws) {
                for k in 0..spec.n_phi {
                    nodes.push(Direction::from_axis(axis, *mu, k as f64 * dphi)?);
                    weights.push(w * dphi);
                }
            }
        }
        Ok(SphereRule { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(&Direction) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(m, w)| w * f(m))
            .sum()
    }
}

fn relative_change(coarse: f64, fine: f64) -> f64 {
    let scale = coarse.abs().max(fine.abs());
    if scale == 0.0 {
        0.0
    } else {
        (fine - coarse).abs() / scale
    }
}

/// Runs `eval` at `spec` and at doubled node counts; returns the fine value.
fn converged<F: Fn(&QuadratureSpec) -> Result<f64>>(spec: &QuadratureSpec, eval: F) -> Result<f64> {
    let coarse = eval(spec)?;
    let fine = eval(&spec.doubled())?;
    let rel_change = relative_change(coarse, fine);
    if rel_change > CONVERGENCE_TOLERANCE {
        return Err(Error::NotConverged {
            rel_change,
            coarse,
            fine,
        });
    }
    Ok(fine)
}

/// Per-node data for one photon at one detector: envelope-weighted response
/// matrix and the polarization basis at the node.
struct NodeData {
    weight: f64,
    response: CMat3,
    basis: PolarizationBasis,
}

fn node_data(
    env: &SpectralEnvelope,
    det: &Detector,
    model: &ScattererModel,
    spec: &QuadratureSpec,
) -> Result<Vec<NodeData>> {
    let w = det.frequency.abs();
    let f = env.frequency_profile(w);
    if f == 0.0 {
        return Ok(Vec::new());
    }
    let rule = SphereRule::around(&env.carrier_direction, env.angular_width, spec)?;
    Ok(rule
        .nodes
        .par_iter()
        .zip(rule.weights.par_iter())
        .map(|(m, wt)| NodeData {
            weight: wt * f * env.angular_profile(m),
            response: scattered_response(w, det, m.vector(), model),
            basis: PolarizationBasis::for_direction(m),
        })
        .collect())
}

fn maybe_conj(z: Complex64, omega: f64) -> Complex64 {
    if omega < 0.0 {
        z.conj()
    } else {
        z
    }
}

fn one_photon_amp(
    state: &OnePhotonState,
    det: &Detector,
    model: &ScattererModel,
    spec: &QuadratureSpec,
) -> Result<Complex64> {
    let i = det.component.index();
    let c = state.pol_coeffs;
    let nodes = node_data(&state.envelope, det, model, spec)?;
    let parts: Vec<Complex64> = nodes
        .par_iter()
        .map(|n| {
            let p: CVec3 = n.basis.e1.map(|v| c[0] * v) + n.basis.e2.map(|v| c[1] * v);
            (n.response.row(i) * p)[(0, 0)] * n.weight
        })
        .collect();
    let sum: Complex64 = parts.iter().sum();
    Ok(maybe_conj(sum * state.scale, det.frequency))
}

/// Scattered-only `Φ⁽¹⁾` by direct quadrature over the photon's directions.
pub fn phi1_bruteforce(
    state: &OnePhotonState,
    det: &Detector,
    model: &ScattererModel,
    spec: &QuadratureSpec,
) -> Result<f64> {
    converged(spec, |s| {
        Ok(one_photon_amp(state, det, model, s)?.norm_sqr())
    })
}

/// Double quadrature for one photon-to-detector assignment: an explicit loop
/// over node pairs with `Θ(m₁, m₂)` rebuilt per pair.
fn assignment_double_sum(
    first: &[NodeData],
    second: &[NodeData],
    c: &[[Complex64; 2]; 2],
    i1: usize,
    i2: usize,
) -> Complex64 {
    let partial: Vec<Complex64> = first
        .par_iter()
        .map(|a| {
            let row = a.response.row(i1);
            let mut acc = Complex64::new(0.0, 0.0);
            for b in second {
                let mut theta = CMat3::zeros();
                for (al, row_c) in c.iter().enumerate() {
                    for (be, cab) in row_c.iter().enumerate() {
                        theta +=
                            (a.basis.vector(al) * b.basis.vector(be).transpose()).map(|v| cab * v);
                    }
                }
                let col = b.response.row(i2).transpose();
                acc += (row * theta * col)[(0, 0)] * (a.weight * b.weight);
            }
            acc
        })
        .collect();
    partial.iter().sum()
}

fn transpose_pol(c: &[[Complex64; 2]; 2]) -> [[Complex64; 2]; 2] {
    [[c[0][0], c[1][0]], [c[0][1], c[1][1]]]
}

fn two_photon_amp(
    state: &TwoPhotonState,
    det1: &Detector,
    det2: &Detector,
    model: &ScattererModel,
    spec: &QuadratureSpec,
) -> Result<Complex64> {
    let (i1, i2) = (det1.component.index(), det2.component.index());
    let mut total = Complex64::new(0.0, 0.0);
    for (a, b) in [(0usize, 1usize), (1, 0)] {
        let first = node_data(&state.envelopes[a], det1, model, spec)?;
        let second = node_data(&state.envelopes[b], det2, model, spec)?;
        if first.is_empty() || second.is_empty() {
            continue;
        }
        let c = if a == 0 {
            state.pol_matrix
        } else {
            transpose_pol(&state.pol_matrix)
        };
        let mut v = assignment_double_sum(&first, &second, &c, i1, i2);
        if det1.frequency < 0.0 {
            v = v.conj();
        }
        if det2.frequency < 0.0 {
            v = v.conj();
        }
        total += v;
    }
    Ok(total * (2.0 * state.scale))
}

/// Scattered-only `Φ⁽²⁾` by double solid-angle quadrature.
pub fn phi2_bruteforce(
    state: &TwoPhotonState,
    det1: &Detector,
    det2: &Detector,
    model: &ScattererModel,
    spec: &QuadratureSpec,
) -> Result<f64> {
    converged(spec, |s| {
        Ok(two_photon_amp(state, det1, det2, model, s)?.norm_sqr())
    })
}

/// `Φ⁽²⁾` with photon `narrow` in its narrowband closed form and the other
/// photon integrated: the limit of [`phi2_bruteforce`] as that photon's
/// angular width goes to zero.
pub fn phi2_semi_factorized(
    state: &TwoPhotonState,
    det1: &Detector,
    det2: &Detector,
    model: &ScattererModel,
    spec: &QuadratureSpec,
    narrow: usize,
) -> Result<f64> {
    if narrow > 1 {
        return Err(Error::invalid("narrow", "photon index must be 0 or 1"));
    }
    let (i1, i2) = (det1.component.index(), det2.component.index());
    let eval = |s: &QuadratureSpec| -> Result<f64> {
        let mut total = Complex64::new(0.0, 0.0);
        for (a, b) in [(0usize, 1usize), (1, 0)] {
            let point = |env: &SpectralEnvelope, det: &Detector| -> Vec<NodeData> {
                let w = det.frequency.abs();
                let z = env.amplitude_weight(w);
                if z == 0.0 {
                    return Vec::new();
                }
                vec![NodeData {
                    weight: z,
                    response: scattered_response(w, det, env.carrier_direction.vector(), model),
                    basis: PolarizationBasis::for_direction(&env.carrier_direction),
                }]
            };
            let first = if a == narrow {
                point(&state.envelopes[a], det1)
            } else {
                node_data(&state.envelopes[a], det1, model, s)?
            };
            let second = if b == narrow {
                point(&state.envelopes[b], det2)
            } else {
                node_data(&state.envelopes[b], det2, model, s)?
            };
            if first.is_empty() || second.is_empty() {
                continue;
            }
            let c = if a == 0 {
                state.pol_matrix
            } else {
                transpose_pol(&state.pol_matrix)
            };
            total += assignment_double_sum(&first, &second, &c, i1, i2);
        }
        Ok((total * (2.0 * state.scale)).norm_sqr())
    };
    converged(spec, eval)
}

/// One row of a width sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub angular_width: f64,
    pub closed_form: f64,
    pub bruteforce: f64,
    pub relative_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub rows: Vec<SweepRow>,
    /// Relative error strictly decreases as the width shrinks.
    pub monotone: bool,
}

fn relative_error(closed: f64, brute: f64) -> f64 {
    if closed == 0.0 && brute == 0.0 {
        0.0
    } else {
        (brute - closed).abs() / closed.abs().max(brute.abs())
    }
}

fn report(rows: Vec<SweepRow>) -> ConvergenceReport {
    let mut sorted = rows.clone();
    sorted.sort_by(|a, b| b.angular_width.total_cmp(&a.angular_width));
    let all_zero = sorted.iter().all(|r| r.relative_error == 0.0);
    let monotone = all_zero
        || sorted
            .windows(2)
            .all(|w| w[1].relative_error < w[0].relative_error);
    ConvergenceReport { rows, monotone }
}

/// Closed form against quadrature for each angular width, scattered only.
pub fn phi1_width_sweep(
    state: &OnePhotonState,
    det: &Detector,
    model: &ScattererModel,
    widths: &[f64],
    spec: &QuadratureSpec,
) -> Result<ConvergenceReport> {
    let mut rows = Vec::with_capacity(widths.len());
    for &w in widths {
        let mut s = *state;
        s.envelope.angular_width = w;
        s.envelope.validate()?;
        let closed = correlators::phi1(&s, det, model, false).value;
        let brute = phi1_bruteforce(&s, det, model, spec)?;
        rows.push(SweepRow {
            angular_width: w,
            closed_form: closed,
            bruteforce: brute,
            relative_error: relative_error(closed, brute),
        });
    }
    Ok(report(rows))
}

/// Two-photon analogue of [`phi1_width_sweep`]; both photons get width `w`.
pub fn phi2_width_sweep(
    state: &TwoPhotonState,
    det1: &Detector,
    det2: &Detector,
    model: &ScattererModel,
    widths: &[f64],
    spec: &QuadratureSpec,
) -> Result<ConvergenceReport> {
    let mut rows = Vec::with_capacity(widths.len());
    for &w in widths {
        let mut s = *state;
        for e in &mut s.envelopes {
            e.angular_width = w;
            e.validate()?;
        }
        let closed = correlators::phi2(&s, det1, det2, model);
        let brute = phi2_bruteforce(&s, det1, det2, model, spec)?;
        rows.push(SweepRow {
            angular_width: w,
            closed_form: closed,
            bruteforce: brute,
            relative_error: relative_error(closed, brute),
        });
    }
    Ok(report(rows))
}

/// `∮ dΩ m` under a rule, for checking first moments.
pub fn first_moment(rule: &SphereRule) -> Vec3 {
    rule.nodes
        .iter()
        .zip(&rule.weights)
        .map(|(m, w)| m.vector() * *w)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlators::{phi1, phi2, Axis};
    use crate::scatterer::{Lambda, TwoPointCenters};
    use crate::states::make_one_photon;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn model(lambda: Lambda, a: f64) -> ScattererModel {
        TwoPointCenters::new(lambda, Vec3::new(0.0, 0.0, a)).into()
    }

    fn aniso() -> Lambda {
        Lambda::from_upper(1.0, 0.6, 0.8, 0.3, 0.0, 0.0)
    }

    #[test]
    fn rule_weights_and_moments() {
        for (axis, w) in [
            (Direction::Z, 0.01),
            (Direction::new(0.3, -0.5, 0.8).unwrap(), 0.2),
            (Direction::Y, 1.0),
        ] {
            let rule = SphereRule::around(&axis, w, &QuadratureSpec::default()).unwrap();
            let total: f64 = rule.weights.iter().sum();
            assert!((total - 4.0 * PI).abs() < 1e-10);
            assert!(first_moment(&rule).norm() < 1e-10);
        }
        let bad = QuadratureSpec {
            n_theta: 4,
            ..QuadratureSpec::default()
        };
        assert!(SphereRule::around(&Direction::Z, 0.1, &bad).is_err());
    }

    #[test]
    fn rule_reproduces_envelope_weight() {
        let env =
            SpectralEnvelope::new(1.0, Direction::new(0.2, 0.1, 0.9).unwrap(), 0.03, 0.01).unwrap();
        let rule =
            SphereRule::around(&env.carrier_direction, 0.03, &QuadratureSpec::default()).unwrap();
        let got = rule.integrate(|m| env.angular_profile(m));
        assert!((got / env.solid_angle_weight() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn phi1_matches_closed_form() {
        let s = make_one_photon(1.0, Direction::Z, [c(1.0), c(0.0)], 0.01, 0.05).unwrap();
        let det = Detector::new(-Direction::Z, 100.0, Axis::Y, 1.0).unwrap();
        let m = model(aniso(), 0.45);
        let closed = phi1(&s, &det, &m, false).value;
        let brute = phi1_bruteforce(&s, &det, &m, &QuadratureSpec::default()).unwrap();
        assert!((brute / closed - 1.0).abs() < 1e-2);
        let zero = phi1_bruteforce(
            &s,
            &det,
            &model(Lambda::zero(), 0.45),
            &QuadratureSpec::default(),
        )
        .unwrap();
        assert_eq!(zero, 0.0);
    }

    #[test]
    fn phi1_sweep_is_monotone() {
        let s = make_one_photon(1.0, Direction::Z, [c(1.0), c(0.0)], 0.04, 0.05).unwrap();
        let det = Detector::new(-Direction::Z, 100.0, Axis::Y, 1.0).unwrap();
        let r = phi1_width_sweep(
            &s,
            &det,
            &model(aniso(), 0.45),
            &[0.04, 0.02, 0.01],
            &QuadratureSpec::default(),
        )
        .unwrap();
        assert!(r.monotone, "{r:?}");
        let z = phi1_width_sweep(
            &s,
            &det,
            &model(Lambda::zero(), 0.45),
            &[0.04, 0.02],
            &QuadratureSpec::default(),
        )
        .unwrap();
        assert!(z.rows.iter().all(|r| r.relative_error == 0.0));
    }

    fn two_photon(w: f64) -> (TwoPhotonState, Detector, Detector) {
        let dir = |cos: f64, az: f64| Direction::from_axis(&Direction::Z, cos, az).unwrap();
        let env = |f: f64, d| SpectralEnvelope::new(f, d, w, 0.02).unwrap();
        let st = TwoPhotonState::new(
            [env(1.0, dir(0.95, 0.0)), env(0.8, dir(0.6, 0.0))],
            [[c(1.0), c(0.2)], [c(0.2), c(0.3)]],
        )
        .unwrap();
        let d1 = Detector::new(dir(-0.85, PI / 2.0), 100.0, Axis::X, 1.0).unwrap();
        let d2 = Detector::new(dir(-0.525, PI / 2.0), 100.0, Axis::X, 0.8).unwrap();
        (st, d1, d2)
    }

    #[test]
    fn phi2_matches_closed_form() {
        let (st, d1, d2) = two_photon(0.02);
        let m = model(Lambda::isotropic(0.5), 0.6);
        let spec = QuadratureSpec {
            n_theta: 12,
            n_phi: 12,
            ..QuadratureSpec::default()
        };
        let closed = phi2(&st, &d1, &d2, &m);
        let brute = phi2_bruteforce(&st, &d1, &d2, &m, &spec).unwrap();
        assert!((brute / closed - 1.0).abs() < 2e-2, "{brute} vs {closed}");
        let mut none = st;
        none.pol_matrix = [[c(0.0); 2]; 2];
        assert_eq!(phi2_bruteforce(&none, &d1, &d2, &m, &spec).unwrap(), 0.0);
    }

    #[test]
    fn narrow_photon_reduces_to_single_integral() {
        let (mut st, d1, d2) = two_photon(0.03);
        st.envelopes[0].angular_width = 1e-4;
        let spec = QuadratureSpec {
            n_theta: 16,
            n_phi: 16,
            ..QuadratureSpec::default()
        };
        let m = model(aniso(), 0.8);
        let full = phi2_bruteforce(&st, &d1, &d2, &m, &spec).unwrap();
        let semi = phi2_semi_factorized(&st, &d1, &d2, &m, &spec, 0).unwrap();
        assert!((full / semi - 1.0).abs() < 1e-5, "{full} vs {semi}");
    }

    #[test]
    fn non_convergence_is_reported() {
        let s = make_one_photon(1.0, Direction::Z, [c(1.0), c(0.0)], 0.5, 0.05).unwrap();
        let det = Detector::new(-Direction::Z, 100.0, Axis::Y, 1.0).unwrap();
        let spec = QuadratureSpec {
            n_theta: 8,
            n_phi: 8,
            cap_widths: 10.0,
        };
        let r = phi1_bruteforce(&s, &det, &model(aniso(), 40.0), &spec);
        assert!(matches!(r, Err(Error::NotConverged { .. })), "{r:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn weights_sum_to_sphere(x in -1.0..1.0f64, y in -1.0..1.0f64, z in -1.0..1.0f64, w in 0.001..2.0f64) {
            prop_assume!(x * x + y * y + z * z > 1e-3);
            let axis = Direction::new(x, y, z).unwrap();
            let rule = SphereRule::around(&axis, w, &QuadratureSpec::default()).unwrap();
            prop_assert!((rule.weights.iter().sum::<f64>() - 4.0 * PI).abs() < 1e-10);
            prop_assert!(first_moment(&rule).norm() < 1e-10);
        }
    }
}
