use std::f64::consts::PI;
use std::path::Path;

use anyhow::{anyhow, bail, Context};
use qscatter::analysis::{fig1_curves, linspace, resolution_report, Signal1D};
use qscatter::correlators::{Axis, Detector};
use qscatter::geometry::Direction;
use qscatter::inverse::{add_noise, fit, FitProblem, DEFAULT_COARSE_NODES};
use qscatter::oracle::{phi1_width_sweep, phi2_width_sweep, QuadratureSpec};
use qscatter::scatterer::Lambda;
use qscatter::scenario::Scenario;
use qscatter::states::IncidentState;

use crate::config::{Config, ConfigError};
use crate::Format;

/// Rendered output plus whether it reports an ambiguous fit.
pub struct Output {
    pub bytes: Vec<u8>,
    pub ambiguous: bool,
}

impl Output {
    fn plain(bytes: Vec<u8>) -> Self {
        Output {
            bytes,
            ambiguous: false,
        }
    }
}

fn json<T: serde::Serialize>(value: &T) -> anyhow::Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s.into_bytes())
}

struct Grid {
    lo: f64,
    hi: f64,
    points: usize,
}

fn grid(cfg: &Config, lo: f64, hi: f64, points: usize) -> Result<Grid, ConfigError> {
    let g = Grid {
        lo: cfg.get_or("grid.lo", lo)?,
        hi: cfg.get_or("grid.hi", hi)?,
        points: cfg.get_or("grid.points", points)?,
    };
    if !g.lo.is_finite() || !g.hi.is_finite() || g.lo >= g.hi {
        let key = if cfg.has("grid.hi") {
            "grid.hi"
        } else {
            "grid.lo"
        };
        return Err(cfg.error(
            key,
            format!("grid bounds must be ordered, got [{}, {}]", g.lo, g.hi),
        ));
    }
    if g.points < 2 {
        return Err(cfg.error("grid.points", "need at least 2 points"));
    }
    Ok(g)
}

fn direction(cfg: &Config, key: &str) -> anyhow::Result<Option<Direction>> {
    match cfg.list(key, Some(3))? {
        None => Ok(None),
        Some(v) => Direction::new(v[0], v[1], v[2])
            .map(Some)
            .map_err(|e| cfg.error(key, e.to_string()).into()),
    }
}

fn lambda(cfg: &Config) -> anyhow::Result<Option<Lambda>> {
    Ok(cfg
        .list("lambda", Some(6))?
        .map(|v| Lambda::from_upper(v[0], v[1], v[2], v[3], v[4], v[5])))
}

fn detector(cfg: &Config, prefix: &str) -> anyhow::Result<Detector> {
    let key = |k: &str| format!("{prefix}.{k}");
    let dir = direction(cfg, &key("direction"))?
        .ok_or_else(|| cfg.error(&key("direction"), "required for an explicit scenario"))?;
    let component: Axis = cfg
        .get(&key("component"))?
        .ok_or_else(|| cfg.error(&key("component"), "required (x, y or z)"))?;
    let frequency: f64 = cfg
        .get(&key("frequency"))?
        .ok_or_else(|| cfg.error(&key("frequency"), "required"))?;
    let distance: f64 = cfg.get_or(&key("distance"), 100.0)?;
    Detector::new(dir, distance, component, frequency)
        .map_err(|e| cfg.error(&key("direction"), e.to_string()).into())
}

/// Exactly one of `preset` or `state` (a JSON state file) selects the scenario.
pub fn scenario(cfg: &Config, base: &Path) -> anyhow::Result<Scenario> {
    let mut s = match (cfg.str("preset"), cfg.str("state")) {
        (Some(_), Some(_)) => {
            return Err(cfg
                .error("state", "give either `preset` or `state`, not both")
                .into())
        }
        (None, None) => {
            return Err(ConfigError {
                line: None,
                field: Some("preset".into()),
                message: "a `preset` or an explicit `state` is required".into(),
            }
            .into())
        }
        (Some(name), None) => {
            Scenario::preset(name).map_err(|e| cfg.error("preset", e.to_string()))?
        }
        (None, Some(path)) => {
            let path = base.join(path);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| cfg.error("state", format!("cannot read {}: {e}", path.display())))?;
            let state =
                IncidentState::from_json(&text).map_err(|e| cfg.error("state", e.to_string()))?;
            let n = match state {
                IncidentState::OnePhoton(_) | IncidentState::Coherent(_) => 1,
                _ => 2,
            };
            let detectors = (1..=n)
                .map(|i| detector(cfg, &format!("detector{i}")))
                .collect::<anyhow::Result<Vec<_>>>()?;
            let lambda = lambda(cfg)?
                .ok_or_else(|| cfg.error("lambda", "required for an explicit scenario"))?;
            let axis = direction(cfg, "axis")?.unwrap_or(Direction::Z);
            let include = cfg.get_or("include_incident", true)?;
            let name = cfg.str("name").unwrap_or("custom").to_string();
            Scenario::custom(&name, state, detectors, lambda, axis, include)
                .map_err(|e| cfg.error("state", e.to_string()))?
        }
    };
    if cfg.has("preset") {
        if let Some(l) = lambda(cfg)? {
            s.lambda = l;
        }
        if let Some(a) = direction(cfg, "axis")? {
            s.axis = a;
        }
    }
    Ok(s)
}

pub fn fig1(
    cfg: &Config,
    chi_flag: Option<f64>,
    points_flag: Option<usize>,
    format: Format,
) -> anyhow::Result<Output> {
    let chi = match chi_flag {
        Some(c) => c,
        None => cfg.get_or("chi", 0.9)?,
    };
    let g = grid(cfg, 0.0, 4.0 * PI, 10_000)?;
    let points = points_flag.unwrap_or(g.points);
    cfg.finish()?;
    let curves = fig1_curves(chi, &linspace(g.lo, g.hi, points))?;
    Ok(Output::plain(match format {
        Format::Csv => {
            let mut buf = Vec::new();
            curves.write_csv(&mut buf)?;
            buf
        }
        Format::Json => json(&curves)?,
    }))
}

pub fn scan(cfg: &Config, base: &Path, seed: u64, format: Format) -> anyhow::Result<Output> {
    let s = scenario(cfg, base)?;
    let kind = cfg.get_or("scan", "separation".to_string())?;
    let noise: f64 = cfg.get_or("noise", 0.0)?;
    if noise.is_nan() || noise < 0.0 {
        return Err(cfg.error("noise", "must be >= 0").into());
    }
    let signal = match kind.as_str() {
        "separation" => {
            let g = grid(cfg, 0.0, 4.0 * PI, 2000)?;
            let omega = cfg.get_or("omega", 1.0)?;
            cfg.finish()?;
            s.separation_scan(&linspace(g.lo, g.hi, g.points), omega)?
        }
        "frequency" => {
            let d = s.fit_design();
            let g = grid(cfg, d.omega_range.0, d.omega_range.1, d.points)?;
            let a = cfg.get_or("separation", d.true_separation)?;
            cfg.finish()?;
            if g.lo <= 0.0 {
                return Err(cfg.error("grid.lo", "frequencies must be positive").into());
            }
            s.frequency_scan(a, &linspace(g.lo, g.hi, g.points))?
        }
        other => {
            return Err(cfg
                .error(
                    "scan",
                    format!("`{other}`: expected `separation` or `frequency`"),
                )
                .into())
        }
    };
    let signal = if noise > 0.0 {
        add_noise(&signal, noise, seed)?
    } else {
        signal
    };
    write_signal(&signal, format)
}

fn write_signal(signal: &Signal1D, format: Format) -> anyhow::Result<Output> {
    Ok(Output::plain(match format {
        Format::Csv => {
            let mut buf = Vec::new();
            signal.write_csv(&mut buf)?;
            buf
        }
        Format::Json => {
            let mut s = signal.to_json()?;
            s.push('\n');
            s.into_bytes()
        }
    }))
}

pub fn read_signal(path: &Path) -> anyhow::Result<Signal1D> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read data file {}", path.display()))?;
    let is_json =
        path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
    let signal = if is_json {
        Signal1D::from_json(&text)
    } else {
        Signal1D::read_csv(text.as_bytes())
    };
    signal.with_context(|| format!("data file {}", path.display()))
}

pub fn fit_cmd(cfg: &Config, base: &Path, data: &Path, format: Format) -> anyhow::Result<Output> {
    if format == Format::Csv {
        bail!(ConfigError {
            line: None,
            field: Some("format".into()),
            message: "fit reports are JSON only".into(),
        });
    }
    let s = scenario(cfg, base)?;
    let design = s.fit_design();
    let bounds = match cfg.list("bounds", Some(2))? {
        Some(b) => (b[0], b[1]),
        None if cfg.has("preset") => design.bounds,
        None => {
            return Err(cfg
                .error("bounds", "required for an explicit scenario")
                .into())
        }
    };
    let prior: Option<i64> = cfg.get("prior_domain")?;
    let noise_level: Option<f64> = match cfg.get("noise_level")? {
        Some(v) => Some(v),
        None if cfg.has("preset") => Some(design.noise_level),
        None => None,
    };
    let coarse = cfg.get_or("coarse_nodes", DEFAULT_COARSE_NODES)?;
    cfg.finish()?;

    let observed = read_signal(data)?;
    let meta = &observed.metadata;
    if !meta.x_label.is_empty() && meta.x_label != "omega" {
        bail!(qscatter::Error::Format(format!(
            "fit needs a frequency scan (x = omega), data has x = {}",
            meta.x_label
        )));
    }
    if !meta.kind.is_empty() && meta.kind != s.state.kind() {
        bail!(qscatter::Error::Format(format!(
            "data is a `{}` signal but the scenario is `{}`",
            meta.kind,
            s.state.kind()
        )));
    }
    let mut problem = FitProblem::new(observed, &s, bounds)
        .map_err(|e| anyhow!(cfg.error("bounds", e.to_string())))?
        .with_prior(prior)
        .with_noise_level(noise_level);
    problem.coarse_nodes = coarse;
    let report = fit(&problem)?;
    Ok(Output {
        bytes: json(&report)?,
        ambiguous: report.ambiguous,
    })
}

pub fn oracle(cfg: &Config, base: &Path, format: Format) -> anyhow::Result<Output> {
    let s = scenario(cfg, base)?;
    let a: f64 = cfg.get_or("separation", 1.0)?;
    let widths = cfg
        .list("widths", None)?
        .unwrap_or_else(|| vec![0.04, 0.02, 0.01]);
    let spec = QuadratureSpec {
        n_theta: cfg.get_or("n_theta", QuadratureSpec::default().n_theta)?,
        n_phi: cfg.get_or("n_phi", QuadratureSpec::default().n_phi)?,
        cap_widths: cfg.get_or("cap_widths", QuadratureSpec::default().cap_widths)?,
    };
    cfg.finish()?;
    spec.validate().map_err(|e| {
        cfg.error(
            if cfg.has("n_phi") { "n_phi" } else { "n_theta" },
            e.to_string(),
        )
    })?;
    let model = s.model(a);
    let report = match &s.state {
        IncidentState::OnePhoton(st) => {
            phi1_width_sweep(st, &s.detectors[0], &model, &widths, &spec)?
        }
        IncidentState::TwoPhoton(st) => {
            phi2_width_sweep(st, &s.detectors[0], &s.detectors[1], &model, &widths, &spec)?
        }
        other => bail!(ConfigError {
            line: cfg.line_of("preset").or(cfg.line_of("state")),
            field: Some("preset".into()),
            message: format!(
                "the oracle covers one_photon and two_photon states, not {}",
                other.kind()
            ),
        }),
    };
    Ok(Output::plain(match format {
        Format::Json => json(&report)?,
        Format::Csv => {
            let mut s = String::from("angular_width,closed_form,bruteforce,relative_error\n");
            for r in &report.rows {
                s += &format!(
                    "{:e},{:e},{:e},{:e}\n",
                    r.angular_width, r.closed_form, r.bruteforce, r.relative_error
                );
            }
            s.into_bytes()
        }
    }))
}

pub fn visibility(
    cfg: &Config,
    data: &Path,
    window: Option<(f64, f64)>,
    format: Format,
) -> anyhow::Result<Output> {
    if format == Format::Csv {
        bail!(ConfigError {
            line: None,
            field: Some("format".into()),
            message: "visibility reports are JSON only".into(),
        });
    }
    let window = match window {
        Some(w) => Some(w),
        None => cfg.list("window", Some(2))?.map(|w| (w[0], w[1])),
    };
    let chi_cfg: Option<f64> = cfg.get("chi")?;
    cfg.finish()?;
    let signal = read_signal(data)?;
    let x = signal.x();
    let window = window.unwrap_or((x[0], x[x.len() - 1]));
    let chi = chi_cfg.or(signal.metadata.chi);
    let report = resolution_report(&signal, window, chi)?;
    Ok(Output::plain(json(&report)?))
}
