//! Scenario files: TOML with `[domain]`, `[coefficients]`, `[exponents]`,
//! `[initial]`, `[run]`, `[bounds]` and an optional `[sweep]` section.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use quenchlab_core::bounds::EpsilonMode;
use quenchlab_core::{Coefficients, DomainDescriptor, Profile};
use serde::Deserialize;

/// A schema or validation error anchored to a line of the source file.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ConfigError {
    pub path: Option<PathBuf>,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(p) = &self.path {
            write!(f, "{}:", p.display())?;
        }
        if let Some(l) = self.line {
            write!(f, "{l}:")?;
        }
        if self.path.is_some() || self.line.is_some() {
            write!(f, " ")?;
        }
        write!(f, "{}", self.message)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: Option<String>,
    domain: RawDomain,
    coefficients: Option<RawCoefficients>,
    exponents: RawExponents,
    initial: Option<RawInitial>,
    run: Option<RawRun>,
    bounds: Option<RawBounds>,
    sweep: Option<RawSweep>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDomain {
    shape: String,
    dimension: Option<usize>,
    radius: Option<f64>,
    lx: Option<f64>,
    ly: Option<f64>,
    resolution: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum RawProfile {
    Constant(f64),
    Table(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCoefficients {
    delta: Option<RawProfile>,
    delta1: Option<RawProfile>,
    delta2: Option<RawProfile>,
    h: Option<RawProfile>,
    h1: Option<RawProfile>,
    h2: Option<RawProfile>,
    k: Option<RawProfile>,
    k1: Option<RawProfile>,
    k2: Option<RawProfile>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExponents {
    p: f64,
    q: f64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    u: Option<String>,
    v: Option<String>,
    amplitude: Option<f64>,
    amplitude_u: Option<f64>,
    amplitude_v: Option<f64>,
    u_file: Option<String>,
    v_file: Option<String>,
    scale: Option<String>,
    scale_factor: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    horizon: Option<f64>,
    dt_max: Option<f64>,
    safety: Option<f64>,
    blowup_threshold: Option<f64>,
    max_steps: Option<usize>,
    fit_window: Option<usize>,
    outputs: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBounds {
    epsilon: Option<String>,
    horizon: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    amplitude: Option<Vec<f64>>,
    scale_factor: Option<Vec<f64>>,
    p: Option<Vec<f64>>,
    q: Option<Vec<f64>>,
    k: Option<Vec<f64>>,
    delta: Option<Vec<f64>>,
    h: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    /// `(1 - (r/R)²)²` on balls, `(16 x(lx-x) y(ly-y) / (lx² ly²))²` on rectangles.
    Bump,
    /// `φ₁ / max φ₁`.
    Eigen,
    Zero,
    /// Grid file, see [`crate::gridfile`].
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleMode {
    None,
    /// Ψ₀ = factor × the largest zero of H (which lies right of η_m).
    HAdmissible,
    /// Ψ₀ = factor × the corollary threshold (p = q only).
    CorollaryThreshold,
}

impl ScaleMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScaleMode::None => "none",
            ScaleMode::HAdmissible => "h-admissible",
            ScaleMode::CorollaryThreshold => "corollary-threshold",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialSpec {
    pub u: ProfileKind,
    pub v: ProfileKind,
    pub amplitude_u: f64,
    pub amplitude_v: f64,
    pub u_file: Option<PathBuf>,
    pub v_file: Option<PathBuf>,
    pub scale: ScaleMode,
    pub scale_factor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outputs {
    pub csv: bool,
    pub json: bool,
    pub svg: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    /// `None` selects the horizon from the bounds.
    pub horizon: Option<f64>,
    pub dt_max: Option<f64>,
    pub safety: f64,
    pub blowup_threshold: f64,
    pub max_steps: usize,
    pub fit_window: usize,
    pub outputs: Outputs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsSpec {
    pub epsilon: EpsilonMode,
    /// Horizon for envelope suprema; defaults to the run horizon or 1.
    pub horizon: Option<f64>,
}

/// Parameter overrides swept as a cartesian product.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepSpec {
    pub axes: Vec<(SweepAxis, Vec<f64>)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SweepAxis {
    Amplitude,
    ScaleFactor,
    P,
    Q,
    K,
    Delta,
    H,
}

impl SweepAxis {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepAxis::Amplitude => "amplitude",
            SweepAxis::ScaleFactor => "scale_factor",
            SweepAxis::P => "p",
            SweepAxis::Q => "q",
            SweepAxis::K => "k",
            SweepAxis::Delta => "delta",
            SweepAxis::H => "h",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub domain: DomainDescriptor,
    pub coefficients: Coefficients,
    pub p: f64,
    pub q: f64,
    pub initial: InitialSpec,
    pub run: RunSpec,
    pub bounds: BoundsSpec,
    pub sweep: SweepSpec,
}

/// Line (1-based) of `key` inside `[section]`, or of the section header.
fn line_of(src: &str, section: Option<&str>, key: Option<&str>) -> Option<usize> {
    let mut current: Option<String> = None;
    let mut header_line = None;
    for (i, raw) in src.lines().enumerate() {
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.trim_end_matches(']').trim().to_string();
            if Some(name.as_str()) == section {
                header_line = Some(i + 1);
            }
            current = Some(name);
            continue;
        }
        let in_section = current.as_deref() == section;
        if let (true, Some(k)) = (in_section, key) {
            if let Some((lhs, _)) = line.split_once('=') {
                if lhs.trim() == k {
                    return Some(i + 1);
                }
            }
        }
    }
    header_line
}

struct Ctx<'a> {
    src: &'a str,
    path: Option<&'a Path>,
}

impl Ctx<'_> {
    fn err(
        &self,
        section: Option<&str>,
        key: Option<&str>,
        message: impl Into<String>,
    ) -> ConfigError {
        ConfigError {
            path: self.path.map(Path::to_path_buf),
            line: line_of(self.src, section, key),
            message: message.into(),
        }
    }
}

fn profile(p: &RawProfile) -> Result<Profile, String> {
    match p {
        RawProfile::Constant(v) => Ok(Profile::Constant(*v)),
        RawProfile::Table(t) => Profile::table(t.clone()).map_err(|e| e.to_string()),
    }
}

fn coefficients(ctx: &Ctx, raw: &RawCoefficients) -> Result<Coefficients, ConfigError> {
    let sec = Some("coefficients");
    let pick = |shared: &Option<RawProfile>,
                own: &Option<RawProfile>,
                shared_key: &str,
                own_key: &str,
                default: f64|
     -> Result<Profile, ConfigError> {
        let (src, key) = match (own, shared) {
            (Some(p), _) => (Some(p), own_key),
            (None, Some(p)) => (Some(p), shared_key),
            (None, None) => (None, shared_key),
        };
        match src {
            Some(p) => profile(p).map_err(|m| ctx.err(sec, Some(key), m)),
            None => Ok(Profile::Constant(default)),
        }
    };
    let c = Coefficients {
        delta: [
            pick(&raw.delta, &raw.delta1, "delta", "delta1", 1.0)?,
            pick(&raw.delta, &raw.delta2, "delta", "delta2", 1.0)?,
        ],
        h: [
            pick(&raw.h, &raw.h1, "h", "h1", 0.0)?,
            pick(&raw.h, &raw.h2, "h", "h2", 0.0)?,
        ],
        k: [
            pick(&raw.k, &raw.k1, "k", "k1", 1.0)?,
            pick(&raw.k, &raw.k2, "k", "k2", 1.0)?,
        ],
    };
    type Rule<'a> = (&'a str, &'a str, &'a Profile, fn(f64) -> bool, &'a str);
    let checks: [Rule; 6] = [
        (
            "delta",
            "delta1",
            &c.delta[0],
            |v| v > 0.0,
            "δ₁ must be positive",
        ),
        (
            "delta",
            "delta2",
            &c.delta[1],
            |v| v > 0.0,
            "δ₂ must be positive",
        ),
        ("h", "h1", &c.h[0], |v| v >= 0.0, "h₁ must be nonnegative"),
        ("h", "h2", &c.h[1], |v| v >= 0.0, "h₂ must be nonnegative"),
        ("k", "k1", &c.k[0], |v| v >= 0.0, "k₁ must be nonnegative"),
        ("k", "k2", &c.k[1], |v| v >= 0.0, "k₂ must be nonnegative"),
    ];
    for (shared, own, prof, ok, msg) in checks {
        let values: Vec<f64> = match prof {
            Profile::Constant(v) => vec![*v],
            Profile::Table(t) => t.iter().map(|&(_, v)| v).collect(),
        };
        if values.iter().any(|&v| !ok(v) || !v.is_finite()) {
            let key = if line_of(ctx.src, sec, Some(own)).is_some() {
                own
            } else {
                shared
            };
            return Err(ctx.err(sec, Some(key), msg));
        }
    }
    Ok(c)
}

fn profile_kind(ctx: &Ctx, key: &str, value: Option<&str>) -> Result<ProfileKind, ConfigError> {
    match value.unwrap_or("bump") {
        "bump" => Ok(ProfileKind::Bump),
        "eigen" => Ok(ProfileKind::Eigen),
        "zero" => Ok(ProfileKind::Zero),
        "file" => Ok(ProfileKind::File),
        other => Err(ctx.err(
            Some("initial"),
            Some(key),
            format!("unknown profile `{other}` (expected bump, eigen, zero or file)"),
        )),
    }
}

fn positive(
    ctx: &Ctx,
    section: &str,
    key: &str,
    v: Option<f64>,
) -> Result<Option<f64>, ConfigError> {
    match v {
        Some(x) if !(x > 0.0) || !x.is_finite() => Err(ctx.err(
            Some(section),
            Some(key),
            format!("`{key}` must be positive and finite"),
        )),
        other => Ok(other),
    }
}

fn parse(src: &str, path: Option<&Path>) -> Result<Scenario, ConfigError> {
    let ctx = Ctx { src, path };
    let raw: RawScenario = toml::from_str(src).map_err(|e| ConfigError {
        path: path.map(Path::to_path_buf),
        line: e
            .span()
            .map(|s| src[..s.start.min(src.len())].matches('\n').count() + 1),
        message: e.message().trim().to_string(),
    })?;

    let d = &raw.domain;
    let dsec = Some("domain");
    if d.resolution < 8 {
        return Err(ctx.err(dsec, Some("resolution"), "resolution must be at least 8"));
    }
    let domain = match d.shape.as_str() {
        "ball" => {
            let radius = positive(&ctx, "domain", "radius", d.radius)?.unwrap_or(1.0);
            let dimension = d.dimension.unwrap_or(2);
            if dimension < 2 {
                return Err(ctx.err(dsec, Some("dimension"), "ball dimension must be at least 2"));
            }
            if d.lx.is_some() || d.ly.is_some() {
                return Err(ctx.err(dsec, Some("lx"), "`lx`/`ly` apply to rectangles only"));
            }
            DomainDescriptor::ball(dimension, radius, d.resolution)
        }
        "rectangle" => {
            if d.dimension.is_some_and(|n| n != 2) {
                return Err(ctx.err(dsec, Some("dimension"), "rectangles are two-dimensional"));
            }
            if d.radius.is_some() {
                return Err(ctx.err(dsec, Some("radius"), "`radius` applies to balls only"));
            }
            let lx = positive(&ctx, "domain", "lx", d.lx)?.unwrap_or(1.0);
            let ly = positive(&ctx, "domain", "ly", d.ly)?.unwrap_or(1.0);
            DomainDescriptor::rectangle(lx, ly, d.resolution)
        }
        other => {
            return Err(ctx.err(
                dsec,
                Some("shape"),
                format!("unknown shape `{other}` (expected ball or rectangle)"),
            ))
        }
    };

    let coeffs = coefficients(&ctx, &raw.coefficients.clone().unwrap_or_default())?;

    let e = &raw.exponents;
    let esec = Some("exponents");
    if !(e.p > 1.0) {
        return Err(ctx.err(esec, Some("p"), "hypothesis violated: p must exceed 1"));
    }
    if !(e.q > 1.0) {
        return Err(ctx.err(esec, Some("q"), "hypothesis violated: q must exceed 1"));
    }
    if e.p < e.q {
        return Err(ctx.err(esec, Some("p"), "hypothesis violated: p must be at least q"));
    }

    let i = raw.initial.clone().unwrap_or_default();
    let isec = "initial";
    let amp = i.amplitude.unwrap_or(1.0);
    let amplitude_u = i.amplitude_u.unwrap_or(amp);
    let amplitude_v = i.amplitude_v.unwrap_or(amp);
    for (key, v) in [
        ("amplitude", amp),
        ("amplitude_u", amplitude_u),
        ("amplitude_v", amplitude_v),
    ] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(ctx.err(
                Some(isec),
                Some(key),
                "hypothesis violated: initial data must be nonnegative",
            ));
        }
    }
    let u = profile_kind(&ctx, "u", i.u.as_deref())?;
    let v = profile_kind(&ctx, "v", i.v.as_deref())?;
    let base = path
        .and_then(Path::parent)
        .unwrap_or_else(|| Path::new("."));
    let file_for = |kind: ProfileKind,
                    key: &str,
                    f: &Option<String>|
     -> Result<Option<PathBuf>, ConfigError> {
        match (kind, f) {
            (ProfileKind::File, Some(p)) => Ok(Some(base.join(p))),
            (ProfileKind::File, None) => Err(ctx.err(
                Some(isec),
                Some(key.trim_end_matches("_file")),
                format!("profile `file` requires `{key}`"),
            )),
            (_, Some(_)) => Err(ctx.err(
                Some(isec),
                Some(key),
                format!("`{key}` needs profile `file`"),
            )),
            (_, None) => Ok(None),
        }
    };
    let u_file = file_for(u, "u_file", &i.u_file)?;
    let v_file = file_for(v, "v_file", &i.v_file)?;
    let scale =
        match i.scale.as_deref().unwrap_or("none") {
            "none" => ScaleMode::None,
            "h-admissible" => ScaleMode::HAdmissible,
            "corollary-threshold" => {
                if e.p != e.q {
                    return Err(ctx.err(
                        Some(isec),
                        Some("scale"),
                        "`corollary-threshold` scaling needs p = q",
                    ));
                }
                ScaleMode::CorollaryThreshold
            }
            other => return Err(ctx.err(
                Some(isec),
                Some("scale"),
                format!(
                    "unknown scale `{other}` (expected none, h-admissible or corollary-threshold)"
                ),
            )),
        };
    let scale_factor = positive(&ctx, isec, "scale_factor", i.scale_factor)?.unwrap_or(1.0);

    let r = raw.run.clone().unwrap_or_default();
    let horizon = positive(&ctx, "run", "horizon", r.horizon)?;
    let dt_max = positive(&ctx, "run", "dt_max", r.dt_max)?;
    let safety = positive(&ctx, "run", "safety", r.safety)?
        .unwrap_or(quenchlab_core::evolution::DEFAULT_SAFETY);
    let blowup_threshold = positive(&ctx, "run", "blowup_threshold", r.blowup_threshold)?
        .unwrap_or(quenchlab_core::evolution::DEFAULT_BLOWUP_THRESHOLD);
    let fit_window = r
        .fit_window
        .unwrap_or(quenchlab_core::evolution::DEFAULT_FIT_WINDOW);
    if fit_window < 5 {
        return Err(ctx.err(
            Some("run"),
            Some("fit_window"),
            "`fit_window` must be at least 5",
        ));
    }
    let mut outputs = Outputs {
        csv: true,
        json: true,
        svg: true,
    };
    if let Some(list) = &r.outputs {
        outputs = Outputs {
            csv: false,
            json: false,
            svg: false,
        };
        for o in list {
            match o.as_str() {
                "trajectory-csv" | "csv" => outputs.csv = true,
                "summary-json" | "json" => outputs.json = true,
                "plots-svg" | "svg" => outputs.svg = true,
                other => {
                    return Err(ctx.err(
                        Some("run"),
                        Some("outputs"),
                        format!("unknown output `{other}`"),
                    ))
                }
            }
        }
    }

    let b = raw.bounds.clone().unwrap_or_default();
    let epsilon = match b.epsilon.as_deref().unwrap_or("equal-split") {
        "equal-split" | "equal" => EpsilonMode::EqualSplit,
        "optimized" => EpsilonMode::Optimized,
        other => {
            return Err(ctx.err(
                Some("bounds"),
                Some("epsilon"),
                format!("unknown epsilon mode `{other}` (expected equal-split or optimized)"),
            ))
        }
    };
    let bounds_horizon = positive(&ctx, "bounds", "horizon", b.horizon)?;

    let mut sweep = SweepSpec::default();
    if let Some(s) = &raw.sweep {
        let axes = [
            (SweepAxis::Amplitude, &s.amplitude),
            (SweepAxis::ScaleFactor, &s.scale_factor),
            (SweepAxis::P, &s.p),
            (SweepAxis::Q, &s.q),
            (SweepAxis::K, &s.k),
            (SweepAxis::Delta, &s.delta),
            (SweepAxis::H, &s.h),
        ];
        let mut seen = BTreeMap::new();
        for (axis, vals) in axes {
            if let Some(v) = vals {
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(ctx.err(
                        Some("sweep"),
                        Some(axis.as_str()),
                        "sweep values must be finite",
                    ));
                }
                seen.insert(axis, v.clone());
            }
        }
        sweep.axes = seen.into_iter().collect();
    }

    let name = raw.name.clone().unwrap_or_else(|| {
        path.and_then(|p| p.file_stem())
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "scenario".into())
    });
    Ok(Scenario {
        name,
        domain,
        coefficients: coeffs,
        p: e.p,
        q: e.q,
        initial: InitialSpec {
            u,
            v,
            amplitude_u,
            amplitude_v,
            u_file,
            v_file,
            scale,
            scale_factor,
        },
        run: RunSpec {
            horizon,
            dt_max,
            safety,
            blowup_threshold,
            max_steps: r.max_steps.unwrap_or(2_000_000),
            fit_window,
            outputs,
        },
        bounds: BoundsSpec {
            epsilon,
            horizon: bounds_horizon,
        },
        sweep,
    })
}

impl std::str::FromStr for Scenario {
    type Err = ConfigError;

    fn from_str(src: &str) -> Result<Self, ConfigError> {
        parse(src, None)
    }
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let src = std::fs::read_to_string(path).map_err(|e| ConfigError {
            path: Some(path.to_path_buf()),
            line: None,
            message: e.to_string(),
        })?;
        parse(&src, Some(path))
    }

    /// Applies one sweep override.
    pub fn with_override(&self, axis: SweepAxis, value: f64) -> Scenario {
        let mut s = self.clone();
        match axis {
            SweepAxis::Amplitude => {
                s.initial.amplitude_u = value;
                s.initial.amplitude_v = value;
            }
            SweepAxis::ScaleFactor => s.initial.scale_factor = value,
            SweepAxis::P => s.p = value,
            SweepAxis::Q => s.q = value,
            SweepAxis::K => s.coefficients.k = [Profile::Constant(value), Profile::Constant(value)],
            SweepAxis::Delta => {
                s.coefficients.delta = [Profile::Constant(value), Profile::Constant(value)]
            }
            SweepAxis::H => s.coefficients.h = [Profile::Constant(value), Profile::Constant(value)],
        }
        s
    }
}
