//! Separation recovery from a scanned signal.
//!
//! For fixed `a` the model is linear in an overall scale, so the scale is
//! eliminated in closed form and the remaining 1-D objective is searched on a
//! coarse grid, then refined by golden section around each local minimum.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{domain_dn, Signal1D};
use crate::scenario::Scenario;
use crate::{Error, Result};

pub const DEFAULT_COARSE_NODES: usize = 256;
pub const MIN_COARSE_NODES: usize = 200;
/// Objectives varying less than this (relative) are unidentifiable.
pub const FLAT_OBJECTIVE: f64 = 1e-9;
/// Relative objective tolerance for ties when no noise level is declared.
pub const DEFAULT_TIE_TOLERANCE: f64 = 1e-8;
const REFINED_MINIMA: usize = 4;
const GOLDEN_MAX_ITER: usize = 200;

/// A family of signals `y(x; a)` up to an overall scale.
pub trait ForwardModel: Sync {
    fn evaluate(&self, a: f64, x: f64) -> Result<f64>;
    /// Period of the signal in `aω`, when it is periodic.
    fn period(&self) -> Option<f64>;
    fn chi(&self) -> Option<f64> {
        None
    }
}

/// Scenario frequency scans: `x = ω`.
impl ForwardModel for Scenario {
    fn evaluate(&self, a: f64, x: f64) -> Result<f64> {
        Scenario::evaluate(self, a, x)
    }
    fn period(&self) -> Option<f64> {
        Some(Scenario::period(self))
    }
    fn chi(&self) -> Option<f64> {
        self.chi
    }
}

/// A closure-backed model, mostly for tests and quick experiments.
pub struct FnModel<F> {
    pub f: F,
    pub period: Option<f64>,
    pub chi: Option<f64>,
}

impl<F: Fn(f64, f64) -> f64 + Sync> ForwardModel for FnModel<F> {
    fn evaluate(&self, a: f64, x: f64) -> Result<f64> {
        Ok((self.f)(a, x))
    }
    fn period(&self) -> Option<f64> {
        self.period
    }
    fn chi(&self) -> Option<f64> {
        self.chi
    }
}

pub struct FitProblem<'m> {
    pub observed: Signal1D,
    pub model: &'m dyn ForwardModel,
    pub bounds: (f64, f64),
    /// Restrict `a·ω̄` to this `Dₙ`.
    pub prior_domain: Option<i64>,
    /// Relative measurement precision; sets the tolerance for ties.
    pub noise_level: Option<f64>,
    pub coarse_nodes: usize,
}

impl<'m> FitProblem<'m> {
    pub fn new(
        observed: Signal1D,
        model: &'m dyn ForwardModel,
        bounds: (f64, f64),
    ) -> Result<Self> {
        let p = FitProblem {
            observed,
            model,
            bounds,
            prior_domain: None,
            noise_level: None,
            coarse_nodes: DEFAULT_COARSE_NODES,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_prior(mut self, n: Option<i64>) -> Self {
        self.prior_domain = n;
        self
    }

    pub fn with_noise_level(mut self, level: Option<f64>) -> Self {
        self.noise_level = level;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.bounds;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::invalid(
                "bounds",
                format!("need 0 < lo < hi, got ({lo}, {hi})"),
            ));
        }
        if self.coarse_nodes < MIN_COARSE_NODES {
            return Err(Error::invalid(
                "coarse_nodes",
                format!(
                    "{} is below the minimum {MIN_COARSE_NODES}",
                    self.coarse_nodes
                ),
            ));
        }
        if let Some(s) = self.noise_level {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::invalid("noise_level", format!("{s} must be >= 0")));
            }
        }
        if self.observed.y().iter().all(|&y| y == 0.0) {
            return Err(Error::invalid("observed", "signal is identically zero"));
        }
        Ok(())
    }

    /// Midpoint of the scanned `ω` range.
    pub fn reference_frequency(&self) -> f64 {
        let x = self.observed.x();
        0.5 * (x[0] + x[x.len() - 1])
    }

    /// Bounds after applying the prior domain.
    pub fn search_bounds(&self) -> Result<(f64, f64)> {
        let (lo, hi) = self.bounds;
        let Some(n) = self.prior_domain else {
            return Ok((lo, hi));
        };
        let chi = self.model.chi().ok_or_else(|| {
            Error::invalid("prior_domain", "model has no resolution parameter chi")
        })?;
        let w = self.reference_frequency();
        let (d_lo, d_hi) = domain_dn(chi, n)?;
        let (s_lo, s_hi) = (lo.max(d_lo / w), hi.min(d_hi / w));
        if s_lo >= s_hi {
            return Err(Error::invalid(
                "prior_domain",
                format!(
                    "D_{n}/omega = [{}, {}] misses the bounds ({lo}, {hi})",
                    d_lo / w,
                    d_hi / w
                ),
            ));
        }
        Ok((s_lo, s_hi))
    }

    fn sum_y2(&self) -> f64 {
        self.observed.y().iter().map(|y| y * y).sum()
    }

    /// Residual sum of squares with the optimal scale, and that scale.
    pub fn objective(&self, a: f64) -> Result<(f64, f64)> {
        let (mut ym, mut mm, mut yy) = (0.0, 0.0, 0.0);
        for (&x, &y) in self.observed.x().iter().zip(self.observed.y()) {
            let m = self.model.evaluate(a, x).map_err(|e| Error::AtPoint {
                x,
                source: Box::new(e),
            })?;
            ym += y * m;
            mm += m * m;
            yy += y * y;
        }
        if mm == 0.0 {
            return Ok((yy, 0.0));
        }
        let scale = ym / mm;
        Ok(((yy - ym * scale).max(0.0), scale))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub a_hat: f64,
    pub scale_hat: f64,
    pub residual_rms: f64,
    pub bracket: (f64, f64),
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    #[serde(flatten)]
    pub best: FitResult,
    /// Other minima fit the data as well as the best one, within tolerance.
    pub ambiguous: bool,
    /// All minima within tolerance of the best, best first.
    pub candidates: Vec<FitResult>,
    pub search_bounds: (f64, f64),
    pub aliases: AliasReport,
}

struct Refined {
    a: f64,
    s: f64,
    scale: f64,
    bracket: (f64, f64),
    iterations: usize,
}

fn golden_section(p: &FitProblem, lo: f64, hi: f64) -> Result<Refined> {
    const R: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - R * (b - a);
    let mut d = a + R * (b - a);
    let mut fc = p.objective(c)?.0;
    let mut fd = p.objective(d)?.0;
    let tol = 1e-10 * (1.0 + lo.abs().max(hi.abs()));
    let mut iterations = 0;
    while b - a > tol && iterations < GOLDEN_MAX_ITER {
        iterations += 1;
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - R * (b - a);
            fc = p.objective(c)?.0;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + R * (b - a);
            fd = p.objective(d)?.0;
        }
    }
    let x = 0.5 * (a + b);
    let (s, scale) = p.objective(x)?;
    Ok(Refined {
        a: x,
        s,
        scale,
        bracket: (a, b),
        iterations,
    })
}

/// Least-squares separation and scale. Deterministic and independent of the
/// thread count: the coarse grid is evaluated in parallel, refinement is
/// sequential.
pub fn fit(problem: &FitProblem) -> Result<FitReport> {
    problem.validate()?;
    let (lo, hi) = problem.search_bounds()?;
    let n = problem.coarse_nodes;
    let step = (hi - lo) / (n - 1) as f64;
    let grid: Vec<f64> = (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
        .collect();
    let coarse: Vec<(f64, f64)> = grid
        .par_iter()
        .map(|&a| problem.objective(a))
        .collect::<Result<_>>()?;
    let s: Vec<f64> = coarse.iter().map(|c| c.0).collect();

    let s_max = s.iter().cloned().fold(f64::MIN, f64::max);
    let s_min = s.iter().cloned().fold(f64::MAX, f64::min);
    let yy = problem.sum_y2();
    let variation = (s_max - s_min) / yy;
    if variation < FLAT_OBJECTIVE {
        return Err(Error::Unidentifiable {
            relative_variation: variation,
        });
    }

    let mut minima: Vec<usize> = (0..n)
        .filter(|&i| (i == 0 || s[i] <= s[i - 1]) && (i == n - 1 || s[i] <= s[i + 1]))
        .collect();
    minima.sort_by(|&i, &j| s[i].total_cmp(&s[j]).then(i.cmp(&j)));
    let rel_tol = problem
        .noise_level
        .map(|s| s * s)
        .unwrap_or(DEFAULT_TIE_TOLERANCE);
    // the best few, plus every coarse minimum already tied with the best
    let keep = minima
        .iter()
        .enumerate()
        .take_while(|(k, &i)| *k < REFINED_MINIMA || s[i] <= s_min + 2.0 * rel_tol * yy)
        .count();
    minima.truncate(keep);

    let mut refined = Vec::with_capacity(minima.len());
    for &i in &minima {
        let (l, h) = (grid[i.saturating_sub(1)], grid[(i + 1).min(n - 1)]);
        let mut r = golden_section(problem, l, h)?;
        // never worse than the coarse node it started from
        if coarse[i].0 < r.s {
            r.a = grid[i];
            r.s = coarse[i].0;
            r.scale = coarse[i].1;
        }
        refined.push(r);
    }
    refined.sort_by(|x, y| x.s.total_cmp(&y.s).then(x.a.total_cmp(&y.a)));
    let mut distinct: Vec<Refined> = Vec::new();
    for r in refined {
        if distinct.iter().all(|d| (d.a - r.a).abs() > 2.0 * step) {
            distinct.push(r);
        }
    }

    let best_s = distinct[0].s;
    let m = problem.observed.len() as f64;
    let candidates: Vec<FitResult> = distinct
        .iter()
        .filter(|r| r.s <= best_s + rel_tol * yy)
        .map(|r| FitResult {
            a_hat: r.a,
            scale_hat: r.scale,
            residual_rms: (r.s / m).sqrt(),
            bracket: r.bracket,
            iterations: r.iterations,
        })
        .collect();
    let best = candidates[0].clone();
    let aliases = identifiability_report(problem, best.a_hat);
    Ok(FitReport {
        ambiguous: candidates.len() > 1,
        best,
        candidates,
        search_bounds: (lo, hi),
        aliases,
    })
}

/// Separations producing the same signal at the reference frequency.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AliasReport {
    /// Period in `aω`, `None` for aperiodic models.
    pub period: Option<f64>,
    pub reference_frequency: f64,
    /// Alias spacing in `a`.
    pub spacing: Option<f64>,
    /// `a + k·spacing` inside the bounds, ascending.
    pub aliases: Vec<f64>,
}

/// The alias set `{a + k·P/ω̄}` of `a` within the problem bounds.
pub fn identifiability_report(problem: &FitProblem, a: f64) -> AliasReport {
    let w = problem.reference_frequency();
    let period = problem.model.period();
    let (lo, hi) = problem.bounds;
    let Some(p) = period.filter(|p| *p > 0.0) else {
        return AliasReport {
            period,
            reference_frequency: w,
            spacing: None,
            aliases: vec![a],
        };
    };
    let spacing = p / w;
    let k_lo = ((lo - a) / spacing).ceil() as i64;
    let k_hi = ((hi - a) / spacing).floor() as i64;
    let mut aliases: Vec<f64> = (k_lo..=k_hi).map(|k| a + k as f64 * spacing).collect();
    if aliases.is_empty() {
        aliases.push(a);
    }
    AliasReport {
        period,
        reference_frequency: w,
        spacing: Some(spacing),
        aliases,
    }
}

/// Multiplicative Gaussian noise `y(1 + level·ξ)`, clamped at zero.
pub fn add_noise(signal: &Signal1D, level: f64, seed: u64) -> Result<Signal1D> {
    let normal =
        Normal::new(0.0, level).map_err(|e| Error::invalid("noise_level", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y = signal
        .y()
        .iter()
        .map(|&y| (y * (1.0 + normal.sample(&mut rng))).max(0.0))
        .collect();
    Signal1D::new(signal.x().to_vec(), y, signal.metadata.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{linspace, SignalMetadata};
    use std::f64::consts::PI;

    fn cos4() -> FnModel<impl Fn(f64, f64) -> f64 + Sync> {
        FnModel {
            f: |a: f64, w: f64| 1.0 + (4.0 * a * w).cos(),
            period: Some(PI / 2.0),
            chi: None,
        }
    }

    fn synth(model: &dyn ForwardModel, a: f64, grid: &[f64]) -> Signal1D {
        let y = grid
            .iter()
            .map(|&w| model.evaluate(a, w).unwrap())
            .collect();
        Signal1D::new(grid.to_vec(), y, SignalMetadata::default()).unwrap()
    }

    #[test]
    fn noiseless_recovery() {
        let m = cos4();
        let obs = synth(&m, 1.3, &linspace(1.0, 4.0, 200))
            .scaled(3.5)
            .unwrap();
        let r = fit(&FitProblem::new(obs, &m, (0.5, 2.5)).unwrap()).unwrap();
        assert!((r.best.a_hat / 1.3 - 1.0).abs() < 1e-6);
        assert!((r.best.scale_hat - 3.5).abs() < 1e-6);
        assert!(!r.ambiguous);
    }

    #[test]
    fn noisy_recovery() {
        let m = cos4();
        let clean = synth(&m, 1.3, &linspace(1.0, 4.0, 200));
        let obs = add_noise(&clean, 0.01, 7).unwrap();
        let r = fit(&FitProblem::new(obs, &m, (0.5, 2.5)).unwrap()).unwrap();
        assert!((r.best.a_hat / 1.3 - 1.0).abs() < 0.02);
    }

    #[test]
    fn scale_equivariance() {
        let m = cos4();
        let obs = add_noise(&synth(&m, 0.9, &linspace(1.0, 3.0, 150)), 0.05, 1).unwrap();
        let r1 = fit(&FitProblem::new(obs.clone(), &m, (0.5, 2.0)).unwrap()).unwrap();
        let r2 = fit(&FitProblem::new(obs.scaled(17.0).unwrap(), &m, (0.5, 2.0)).unwrap()).unwrap();
        assert!((r1.best.a_hat - r2.best.a_hat).abs() < 1e-9);
        assert!((r2.best.scale_hat / r1.best.scale_hat - 17.0).abs() < 1e-9);
    }

    #[test]
    fn best_beats_every_coarse_node() {
        let m = cos4();
        let obs = add_noise(&synth(&m, 1.1, &linspace(1.0, 3.0, 150)), 0.05, 3).unwrap();
        let p = FitProblem::new(obs, &m, (0.5, 2.0)).unwrap();
        let r = fit(&p).unwrap();
        let best = p.objective(r.best.a_hat).unwrap().0;
        for a in linspace(0.5, 2.0, p.coarse_nodes) {
            assert!(best <= p.objective(a).unwrap().0);
        }
        assert!(r.best.a_hat >= 0.5 && r.best.a_hat <= 2.0);
    }

    #[test]
    fn short_window_is_not_identified() {
        // ±1 % around the zero 4aω = 3π: a with 4aω̄ = 5π shows nearly the
        // same bowl
        let m = cos4();
        let w = 3.0 * PI / (4.0 * 1.3);
        let obs = synth(&m, 1.3, &linspace(0.99 * w, 1.01 * w, 101));
        let p = FitProblem::new(obs, &m, (0.3, 2.5))
            .unwrap()
            .with_noise_level(Some(0.01));
        match fit(&p) {
            Ok(r) => {
                assert!(r.ambiguous, "{r:?}");
                let alias = 1.3 * 5.0 / 3.0;
                assert!(r.candidates.iter().any(|c| (c.a_hat - alias).abs() < 1e-3));
            }
            Err(e) => assert!(matches!(e, Error::Unidentifiable { .. })),
        }
    }

    #[test]
    fn flat_objective_is_unidentifiable() {
        let m = FnModel {
            f: |_a: f64, w: f64| w,
            period: None,
            chi: None,
        };
        let obs = synth(&m, 1.0, &linspace(1.0, 2.0, 30));
        let err = fit(&FitProblem::new(obs, &m, (0.5, 2.5)).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Unidentifiable { .. }));
    }

    #[test]
    fn alias_spacing() {
        let m = cos4();
        let obs = synth(&m, 1.3, &linspace(1.0, 1.1, 20));
        let p = FitProblem::new(obs.clone(), &m, (0.1, 4.5)).unwrap();
        let r = identifiability_report(&p, 1.3);
        let w = 1.05;
        assert!((r.spacing.unwrap() * w - PI / 2.0).abs() < 1e-12);
        assert!(r.aliases.len() >= 3);
        assert!(r.aliases.iter().any(|&x| (x - 1.3).abs() < 1e-12));

        let tight = FitProblem::new(obs, &m, (1.2, 1.4)).unwrap();
        assert_eq!(identifiability_report(&tight, 1.3).aliases, vec![1.3]);

        let tp = Scenario::preset("two-photon-chi09").unwrap();
        assert!((ForwardModel::period(&tp).unwrap() - PI / 0.9).abs() < 1e-12);
    }

    #[test]
    fn prior_domain_restricts_search() {
        let tp = Scenario::preset("two-photon-chi09").unwrap();
        let obs = synth(&m_dummy(), 1.0, &linspace(3.9, 4.1, 10));
        let p = FitProblem::new(obs, &tp, (0.3, 2.6))
            .unwrap()
            .with_prior(Some(1));
        let (lo, hi) = p.search_bounds().unwrap();
        assert!((lo * 4.0 - (PI / 4.0 + PI) / 0.9).abs() < 1e-12);
        assert!((hi * 4.0 - (3.0 * PI / 4.0 + PI) / 0.9).abs() < 1e-12);
        let far = FitProblem::new(p.observed.clone(), &tp, (0.3, 2.6))
            .unwrap()
            .with_prior(Some(9));
        assert!(far.search_bounds().is_err());
    }

    fn m_dummy() -> FnModel<impl Fn(f64, f64) -> f64 + Sync> {
        FnModel {
            f: |_a: f64, _w: f64| 1.0,
            period: None,
            chi: None,
        }
    }

    #[test]
    fn noise_is_seeded_and_nonnegative() {
        let m = cos4();
        let clean = synth(&m, 1.3, &linspace(1.0, 3.0, 100));
        let a = add_noise(&clean, 0.5, 11).unwrap();
        let b = add_noise(&clean, 0.5, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.y().iter().all(|&y| y >= 0.0));
        assert_ne!(a, add_noise(&clean, 0.5, 12).unwrap());
    }

    #[test]
    fn bounds_validated() {
        let m = cos4();
        let obs = synth(&m, 1.0, &linspace(1.0, 2.0, 10));
        assert!(FitProblem::new(obs.clone(), &m, (2.0, 1.0)).is_err());
        assert!(FitProblem::new(obs, &m, (-1.0, 1.0)).is_err());
    }
}
