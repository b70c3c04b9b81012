//! Scans, visibility, extrema spacing and the `Dₙ` domain bookkeeping.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::{BufRead, Write};

use nalgebra::{Matrix5, Vector5};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::GeometryScenario;
use crate::{Error, Result};

/// Spacing spread above which a window is flagged as mixing resolutions.
pub const SPREAD_FLAG: f64 = 0.1;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SignalMetadata {
    /// Which correlator produced the signal, e.g. `one_photon`.
    pub kind: String,
    /// Meaning of `x`, e.g. `a*omega` or `omega`.
    pub x_label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, String>,
}

/// A sampled signal: `x` strictly increasing, `y ≥ 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSignal")]
pub struct Signal1D {
    x: Vec<f64>,
    y: Vec<f64>,
    pub metadata: SignalMetadata,
}

#[derive(Deserialize)]
struct RawSignal {
    x: Vec<f64>,
    y: Vec<f64>,
    #[serde(default)]
    metadata: SignalMetadata,
}

impl TryFrom<RawSignal> for Signal1D {
    type Error = Error;
    fn try_from(r: RawSignal) -> Result<Self> {
        Signal1D::new(r.x, r.y, r.metadata)
    }
}

impl Signal1D {
    pub fn new(x: Vec<f64>, y: Vec<f64>, metadata: SignalMetadata) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::Empty("signal has no samples"));
        }
        if x.len() != y.len() {
            return Err(Error::invalid(
                "signal",
                format!("{} x values but {} y values", x.len(), y.len()),
            ));
        }
        if let Some(w) = x.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(Error::invalid(
                "x",
                format!("grid must be strictly increasing ({} then {})", w[0], w[1]),
            ));
        }
        for (&xi, &yi) in x.iter().zip(&y) {
            if !xi.is_finite() || !yi.is_finite() {
                return Err(Error::invalid(
                    "signal",
                    format!("non-finite sample at x = {xi}"),
                ));
            }
            if yi < 0.0 {
                return Err(Error::NegativeSignal { x: xi, value: yi });
            }
        }
        Ok(Signal1D { x, y, metadata })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Same grid, `y` multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Signal1D::new(
            self.x.clone(),
            self.y.iter().map(|v| v * c).collect(),
            self.metadata.clone(),
        )
    }

    /// Two-column CSV preceded by a `#` comment documenting units and `x`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "# units: c = hbar = eps0 = 1; x = {}; y = {} (up to a state constant)",
            if self.metadata.x_label.is_empty() {
                "x"
            } else {
                &self.metadata.x_label
            },
            if self.metadata.kind.is_empty() {
                "signal"
            } else {
                &self.metadata.kind
            },
        )?;
        writeln!(w, "x,y")?;
        for (x, y) in self.x.iter().zip(&self.y) {
            writeln!(w, "{x:e},{y:e}")?;
        }
        Ok(())
    }

    /// Reads the CSV written by [`Signal1D::write_csv`]; `#` lines are skipped.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut x = Vec::new();
        let mut y = Vec::new();
        let mut header_seen = false;
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            if !header_seen {
                if t.replace(' ', "") != "x,y" {
                    return Err(Error::Format(format!(
                        "signal csv line {}: expected header `x,y`",
                        i + 1
                    )));
                }
                header_seen = true;
                continue;
            }
            let fields: Vec<&str> = t.split(',').map(str::trim).collect();
            if fields.len() != 2 {
                return Err(Error::Format(format!(
                    "signal csv line {}: expected 2 fields, got {}",
                    i + 1,
                    fields.len()
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Format(format!("signal csv line {}: `{s}`: {e}", i + 1)))
            };
            x.push(parse(fields[0])?);
            y.push(parse(fields[1])?);
        }
        if !header_seen {
            return Err(Error::Format("signal csv: missing header `x,y`".into()));
        }
        Signal1D::new(x, y, SignalMetadata::default())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// `n` evenly spaced points on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n)
                .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
                .collect()
        }
    }
}

/// Evaluates `f` on `grid` in parallel. Errors carry the offending `x`
/// (the first one in grid order).
pub fn scan<F>(f: F, grid: &[f64], metadata: SignalMetadata) -> Result<Signal1D>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let y: Vec<f64> = grid
        .par_iter()
        .map(|&x| {
            f(x).map_err(|e| Error::AtPoint {
                x,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    Signal1D::new(grid.to_vec(), y, metadata)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtremumKind {
    Max,
    Min,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub x: f64,
    pub y: f64,
    pub kind: ExtremumKind,
}

/// Interior discrete extrema as `(first, last, kind)` index runs; plateaus
/// span several samples.
fn discrete_extrema(y: &[f64]) -> Vec<(usize, usize, ExtremumKind)> {
    let n = y.len();
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        let mut j = i;
        while j + 1 < n && y[j + 1] == y[i] {
            j += 1;
        }
        if j + 1 >= n {
            break;
        }
        let (before, after) = (y[i - 1], y[j + 1]);
        if y[i] > before && y[i] > after {
            out.push((i, j, ExtremumKind::Max));
        } else if y[i] < before && y[i] < after {
            out.push((i, j, ExtremumKind::Min));
        }
        i = j + 1;
    }
    out
}

/// Vertex of the parabola through three points, or `None` when degenerate.
fn parabola_vertex(x: [f64; 3], y: [f64; 3]) -> Option<(f64, f64)> {
    let (d1, d2) = (x[1] - x[0], x[1] - x[2]);
    let (e1, e2) = (y[1] - y[2], y[1] - y[0]);
    let den = d1 * e1 - d2 * e2;
    if den == 0.0 {
        return None;
    }
    let xv = x[1] - 0.5 * (d1 * d1 * e1 - d2 * d2 * e2) / den;
    if !(xv >= x[0] && xv <= x[2]) {
        return None;
    }
    // Lagrange form evaluated at the vertex
    let l = |k: usize| {
        (0..3)
            .filter(|&m| m != k)
            .map(|m| (xv - x[m]) / (x[k] - x[m]))
            .product::<f64>()
    };
    Some((xv, y[0] * l(0) + y[1] * l(1) + y[2] * l(2)))
}

/// Extrema located by neighbour comparison and refined by a 3-point
/// parabola; plateaus resolve to their midpoint.
pub fn find_extrema(signal: &Signal1D) -> Vec<Extremum> {
    let (x, y) = (signal.x(), signal.y());
    discrete_extrema(y)
        .into_iter()
        .map(|(i, j, kind)| {
            if i != j {
                return Extremum {
                    x: 0.5 * (x[i] + x[j]),
                    y: y[i],
                    kind,
                };
            }
            let (xv, yv) = parabola_vertex([x[i - 1], x[i], x[i + 1]], [y[i - 1], y[i], y[i + 1]])
                .unwrap_or((x[i], y[i]));
            Extremum { x: xv, y: yv, kind }
        })
        .collect()
}

/// Extremal value near sample `i` from the quartic through five samples,
/// or `None` when too close to the ends.
fn quartic_extremum(x: &[f64], y: &[f64], i: usize) -> Option<f64> {
    if i < 2 || i + 2 >= x.len() {
        return None;
    }
    let h = 0.5 * (x[i + 1] - x[i - 1]);
    let t: Vec<f64> = (0..5).map(|k| (x[i + k - 2] - x[i]) / h).collect();
    let vander = Matrix5::from_fn(|r, c| t[r].powi(c as i32));
    let rhs = Vector5::from_fn(|r, _| y[i + r - 2]);
    let coef = vander.lu().solve(&rhs)?;
    let p = |s: f64| coef.iter().rev().fold(0.0, |acc, c| acc * s + c);
    let dp =
        |s: f64| coef[1] + 2.0 * coef[2] * s + 3.0 * coef[3] * s * s + 4.0 * coef[4] * s * s * s;
    let ddp = |s: f64| 2.0 * coef[2] + 6.0 * coef[3] * s + 12.0 * coef[4] * s * s;
    let mut s = 0.0;
    for _ in 0..50 {
        let d2 = ddp(s);
        if d2 == 0.0 {
            break;
        }
        let step = dp(s) / d2;
        s -= step;
        if !(-1.0..=1.0).contains(&s) {
            return Some(y[i]);
        }
        if step.abs() < 1e-15 {
            break;
        }
    }
    Some(p(s))
}

/// `(max − min)/(max + min)` over the signal, with interior extrema refined
/// by a local quartic; `0` for an identically zero signal.
pub fn visibility(signal: &Signal1D) -> Result<f64> {
    let (x, y) = (signal.x(), signal.y());
    if let Some((i, v)) = y.iter().enumerate().find(|(_, v)| **v < 0.0) {
        return Err(Error::NegativeSignal { x: x[i], value: *v });
    }
    let mut hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut lo = y.iter().copied().fold(f64::INFINITY, f64::min);
    for (i, j, kind) in discrete_extrema(y) {
        if i != j {
            continue;
        }
        if let Some(v) = quartic_extremum(x, y, i) {
            match kind {
                ExtremumKind::Max => hi = hi.max(v),
                ExtremumKind::Min => lo = lo.min(v.max(0.0)),
            }
        }
    }
    if hi + lo == 0.0 {
        return Ok(0.0);
    }
    Ok(((hi - lo) / (hi + lo)).clamp(0.0, 1.0))
}

/// Adjacent max–min spacings inside a window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpacingReport {
    pub mean: f64,
    /// `max |d − mean| / mean` over the spacings.
    pub spread: f64,
    /// `spread` exceeds [`SPREAD_FLAG`].
    pub flagged: bool,
    pub spacings: Vec<f64>,
    pub extrema: Vec<Extremum>,
}

/// Mean spacing between adjacent extrema inside `[lo, hi]`. Extrema whose
/// refined position lies within half a grid step of the window are kept.
pub fn extrema_spacing(signal: &Signal1D, window: (f64, f64)) -> Result<SpacingReport> {
    let (lo, hi) = (window.0.min(window.1), window.0.max(window.1));
    let x = signal.x();
    let step = if x.len() > 1 {
        (x[x.len() - 1] - x[0]) / (x.len() - 1) as f64
    } else {
        0.0
    };
    let tol = 0.5 * step;
    let inside: Vec<Extremum> = find_extrema(signal)
        .into_iter()
        .filter(|e| e.x >= lo - tol && e.x <= hi + tol)
        .collect();
    let has = |k| inside.iter().any(|e| e.kind == k);
    if !has(ExtremumKind::Max) || !has(ExtremumKind::Min) {
        return Err(Error::NoExtrema { lo, hi });
    }
    let spacings: Vec<f64> = inside
        .windows(2)
        .filter(|w| w[0].kind != w[1].kind)
        .map(|w| (w[1].x - w[0].x).abs())
        .collect();
    let mean = spacings.iter().sum::<f64>() / spacings.len() as f64;
    let spread = spacings
        .iter()
        .map(|d| (d - mean).abs() / mean)
        .fold(0.0, f64::max);
    Ok(SpacingReport {
        mean,
        spread,
        flagged: spread > SPREAD_FLAG,
        spacings,
        extrema: inside,
    })
}

/// `Dₙ = (1/χ)[π/4 + πn, 3π/4 + πn]`, returned with `lo ≤ hi`.
pub fn domain_dn(chi: f64, n: i64) -> Result<(f64, f64)> {
    if chi == 0.0 || !chi.is_finite() {
        return Err(Error::invalid("chi", "must be nonzero"));
    }
    let a = (PI / 4.0 + PI * n as f64) / chi;
    let b = (3.0 * PI / 4.0 + PI * n as f64) / chi;
    Ok((a.min(b), a.max(b)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum DomainClass {
    InsideDn { n: i64 },
    OutsideDn,
    NotApplicable,
}

/// Which `Dₙ`, if any, contains `x = aω`.
pub fn classify_domain(x: f64, chi: Option<f64>) -> DomainClass {
    let Some(chi) = chi.filter(|c| *c != 0.0 && c.is_finite()) else {
        return DomainClass::NotApplicable;
    };
    let t = x * chi.abs() / PI;
    let n = t.floor();
    let frac = t - n;
    if (0.25..=0.75).contains(&frac) {
        let n = if chi > 0.0 { n as i64 } else { -(n as i64) - 1 };
        DomainClass::InsideDn { n }
    } else {
        DomainClass::OutsideDn
    }
}

/// Windows `[start, start + length]` whose mean extrema spacing is at most
/// `threshold`; windows without extrema count as failing.
pub fn windows_achieving(
    signal: &Signal1D,
    starts: &[f64],
    length: f64,
    threshold: f64,
) -> Vec<bool> {
    starts
        .par_iter()
        .map(|&s| {
            extrema_spacing(signal, (s, s + length))
                .map(|r| r.mean <= threshold)
                .unwrap_or(false)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolutionReport {
    pub visibility: f64,
    pub extrema_spacing: f64,
    pub spacing_spread: f64,
    pub spacing_flagged: bool,
    pub domain: DomainClass,
    pub chi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fitted_separation: Option<f64>,
}

/// Visibility of the whole signal plus spacing and domain of `window`
/// (classified at its midpoint).
pub fn resolution_report(
    signal: &Signal1D,
    window: (f64, f64),
    chi: Option<f64>,
) -> Result<ResolutionReport> {
    let spacing = extrema_spacing(signal, window)?;
    Ok(ResolutionReport {
        visibility: visibility(signal)?,
        extrema_spacing: spacing.mean,
        spacing_spread: spacing.spread,
        spacing_flagged: spacing.flagged,
        domain: classify_domain(0.5 * (window.0 + window.1), chi),
        chi,
        fitted_separation: None,
    })
}

/// The three resolution curves: red `cos²(2χx)cos²(χx)`, black `cos²(2χx)`,
/// green `cos²(2χx)cos²(χx)cos²(χx/2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fig1Curves {
    pub chi: f64,
    pub x: Vec<f64>,
    pub red: Vec<f64>,
    pub black: Vec<f64>,
    pub green: Vec<f64>,
}

pub fn fig1_curves(chi: f64, x: &[f64]) -> Result<Fig1Curves> {
    GeometryScenario::check_resolution_constraint(chi)?;
    let mut red = Vec::with_capacity(x.len());
    let mut black = Vec::with_capacity(x.len());
    let mut green = Vec::with_capacity(x.len());
    for &v in x {
        let b = (2.0 * chi * v).cos().powi(2);
        let r = b * (chi * v).cos().powi(2);
        black.push(b);
        red.push(r);
        green.push(r * (0.5 * chi * v).cos().powi(2));
    }
    Ok(Fig1Curves {
        chi,
        x: x.to_vec(),
        red,
        black,
        green,
    })
}

impl Fig1Curves {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "# units: c = hbar = eps0 = 1; x = a*omega; chi = {}",
            self.chi
        )?;
        writeln!(w, "x,red,black,green")?;
        for i in 0..self.x.len() {
            writeln!(
                w,
                "{:e},{:e},{:e},{:e}",
                self.x[i], self.red[i], self.black[i], self.green[i]
            )?;
        }
        Ok(())
    }

    pub fn signal(&self, curve: &str) -> Result<Signal1D> {
        let y = match curve {
            "red" => &self.red,
            "black" => &self.black,
            "green" => &self.green,
            other => return Err(Error::invalid("curve", format!("unknown curve `{other}`"))),
        };
        Signal1D::new(
            self.x.clone(),
            y.clone(),
            SignalMetadata {
                kind: format!("fig1_{curve}"),
                x_label: "a*omega".into(),
                chi: Some(self.chi),
                params: BTreeMap::new(),
            },
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn signal(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> Signal1D {
        let x = linspace(lo, hi, n);
        let y = x.iter().map(|v| f(*v)).collect();
        Signal1D::new(x, y, SignalMetadata::default()).unwrap()
    }

    #[test]
    fn signal_validation() {
        let m = SignalMetadata::default();
        assert!(Signal1D::new(vec![], vec![], m.clone()).is_err());
        assert!(Signal1D::new(vec![0.0, 0.0], vec![1.0, 1.0], m.clone()).is_err());
        assert!(matches!(
            Signal1D::new(vec![0.0, 1.0], vec![1.0, -1.0], m.clone()),
            Err(Error::NegativeSignal { .. })
        ));
        assert!(Signal1D::new(vec![0.0], vec![1.0], m).is_ok());
    }

    #[test]
    fn visibility_examples() {
        let s = signal(|x| 1.0 + (4.0 * x).cos(), 0.0, 4.0 * PI, 2000);
        assert!((visibility(&s).unwrap() - 1.0).abs() < 1e-9);
        let s = signal(|_| 3.0, 0.0, 1.0, 50);
        assert_eq!(visibility(&s).unwrap(), 0.0);
        let s = signal(|x| 2.0 + x.cos(), 0.0, 4.0 * PI, 2000);
        // (3 − 1)/(3 + 1)
        assert!((visibility(&s).unwrap() - 0.5).abs() < 1e-9);
        let s = signal(|_| 0.0, 0.0, 1.0, 10);
        assert_eq!(visibility(&s).unwrap(), 0.0);
    }

    #[test]
    fn spacing_examples() {
        let s = signal(|x| 1.0 + (4.0 * x).cos(), 0.0, 4.0 * PI, 2000);
        for lo in [0.3, 1.0, 5.0] {
            let r = extrema_spacing(&s, (lo, lo + PI / 2.0 + 0.01)).unwrap();
            assert!((r.mean - PI / 4.0).abs() < 1e-4, "{r:?}");
            assert!(!r.flagged);
        }
        let chi = 0.9;
        let x = linspace(0.0, 4.0 * PI / chi, 10_000);
        let f = fig1_curves(chi, &x).unwrap();
        let red = f.signal("red").unwrap();
        let d0 = domain_dn(chi, 0).unwrap();
        let inside = extrema_spacing(&red, d0).unwrap();
        assert!(
            (inside.mean / (PI / (8.0 * chi)) - 1.0).abs() < 0.02,
            "{inside:?}"
        );
        let outside = extrema_spacing(&red, (3.0 * PI / 4.0 / chi, 5.0 * PI / 4.0 / chi)).unwrap();
        assert!(
            (outside.mean / (PI / (4.0 * chi)) - 1.0).abs() < 0.02,
            "{outside:?}"
        );
        let flat = signal(|_| 1.0, 0.0, 1.0, 20);
        assert!(matches!(
            extrema_spacing(&flat, (0.0, 1.0)),
            Err(Error::NoExtrema { .. })
        ));
    }

    #[test]
    fn plateau_midpoint() {
        let x: Vec<f64> = (0..9).map(|i| i as f64).collect();
        let y = vec![0.0, 1.0, 2.0, 3.0, 3.0, 3.0, 2.0, 1.0, 0.0];
        let s = Signal1D::new(x, y, SignalMetadata::default()).unwrap();
        let e = find_extrema(&s);
        assert_eq!(e.len(), 1);
        assert_eq!(e[0].x, 4.0);
        assert_eq!(e[0].kind, ExtremumKind::Max);
    }

    #[test]
    fn domain_examples() {
        let (a, b) = domain_dn(1.0, 0).unwrap();
        assert!((a - PI / 4.0).abs() < 1e-15 && (b - 3.0 * PI / 4.0).abs() < 1e-15);
        let (a, b) = domain_dn(0.9, 0).unwrap();
        assert!((a - 0.8727).abs() < 5e-5 && (b - 2.618).abs() < 5e-4);
        let (a1, b1) = domain_dn(0.9, 1).unwrap();
        assert!((a1 - a - PI / 0.9).abs() < 1e-12 && (b1 - b - PI / 0.9).abs() < 1e-12);
        assert!(domain_dn(0.0, 0).is_err());
        assert_eq!(
            classify_domain(1.5, Some(0.9)),
            DomainClass::InsideDn { n: 0 }
        );
        assert_eq!(classify_domain(0.1, Some(0.9)), DomainClass::OutsideDn);
        assert_eq!(classify_domain(1.5, None), DomainClass::NotApplicable);
        let (lo, hi) = domain_dn(-0.9, 0).unwrap();
        assert_eq!(
            classify_domain(0.5 * (lo + hi), Some(-0.9)),
            DomainClass::InsideDn { n: 0 }
        );
    }

    #[test]
    fn scan_examples() {
        let one = scan(|x| Ok(x * x), &[2.0], SignalMetadata::default()).unwrap();
        assert_eq!(one.y(), &[4.0]);
        let dense = scan(
            |x| Ok(1.5 + x.sin()),
            &linspace(0.0, 10.0, 2001),
            SignalMetadata::default(),
        )
        .unwrap();
        let half = scan(
            |x| Ok(1.5 + x.sin()),
            &linspace(0.0, 10.0, 1001),
            SignalMetadata::default(),
        )
        .unwrap();
        assert!((visibility(&dense).unwrap() - visibility(&half).unwrap()).abs() < 1e-3);
        assert!(dense.x().windows(2).all(|w| w[1] > w[0]));
        let err = scan(
            |x| {
                if x > 0.5 {
                    Err(Error::Empty("boom"))
                } else {
                    Ok(1.0)
                }
            },
            &[0.0, 0.7, 0.9],
            SignalMetadata::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::AtPoint { x, .. } if x == 0.7));
    }

    #[test]
    fn fig1_examples() {
        let chi = 0.9;
        let f = fig1_curves(chi, &[0.0, PI / (4.0 * chi)]).unwrap();
        assert_eq!((f.red[0], f.black[0], f.green[0]), (1.0, 1.0, 1.0));
        assert!(f.red[1] < 1e-30 && f.black[1] < 1e-30 && f.green[1] < 1e-30);
        assert!(fig1_curves(0.4, &[0.0]).is_err());
        assert!(fig1_curves(1.0, &[0.0]).is_err());
        let x = linspace(0.0, 4.0 * PI / chi, 10_000);
        let f = fig1_curves(chi, &x).unwrap();
        for i in 0..x.len() {
            assert!(f.green[i] <= f.red[i] + 1e-12 && f.red[i] <= f.black[i] + 1e-12);
        }
    }

    #[test]
    fn csv_and_json() {
        let s = signal(|x| 1.0 + x, 0.0, 1.0, 5);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# units"));
        let back = Signal1D::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.y(), s.y());
        assert!(Signal1D::read_csv("a,b\n1,2\n".as_bytes()).is_err());
        assert!(Signal1D::read_csv("x,y\n".as_bytes()).is_err());
        let json = s.to_json().unwrap();
        assert_eq!(Signal1D::from_json(&json).unwrap(), s);
        assert!(Signal1D::from_json(r#"{"x":[0,1],"y":[1,-1]}"#).is_err());
    }

    proptest! {
        #[test]
        fn visibility_scale_invariant(c in 0.01..100.0f64, off in 0.0..3.0f64) {
            let s = signal(|x| off + 1.0 + (3.0 * x).cos(), 0.0, 6.0, 800);
            let v = visibility(&s).unwrap();
            let w = visibility(&s.scaled(c).unwrap()).unwrap();
            prop_assert!((v - w).abs() < 1e-12);
        }

        #[test]
        fn spacing_affine_and_translation_invariant(c in 0.1..10.0f64, b in 0.0..5.0f64, shift in -3.0..3.0f64) {
            let base = signal(|x| 1.0 + (4.0 * x).cos(), 0.0, 6.0, 1500);
            let r0 = extrema_spacing(&base, (0.5, 4.5)).unwrap();
            let y: Vec<f64> = base.y().iter().map(|v| c * v + b).collect();
            let affine = Signal1D::new(base.x().to_vec(), y, SignalMetadata::default()).unwrap();
            let r1 = extrema_spacing(&affine, (0.5, 4.5)).unwrap();
            prop_assert!((r0.mean - r1.mean).abs() < 1e-9);
            let x: Vec<f64> = base.x().iter().map(|v| v + shift).collect();
            let moved = Signal1D::new(x, base.y().to_vec(), SignalMetadata::default()).unwrap();
            let r2 = extrema_spacing(&moved, (0.5 + shift, 4.5 + shift)).unwrap();
            prop_assert!((r0.mean - r2.mean).abs() < 1e-9);
        }
    }
}
