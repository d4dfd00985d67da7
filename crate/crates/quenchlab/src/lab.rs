//! Scenario pipeline: spectrum, embedding constants, bounds, simulation and
//! the verification checks.

use std::path::PathBuf;

use quenchlab_core::bounds::{compute_bounds, BoundInputs, BoundReport};
use quenchlab_core::domain::Shape;
use quenchlab_core::evolution::{
    default_dt_max, estimate_tstar, phi_exponent, psi_exponent, run, RunOptions, SystemSpec,
    Trajectory, TstarEstimate,
};
use quenchlab_core::ode::majorant_value;
use quenchlab_core::spectrum::{
    embedding_range, embedding_ratio, first_eigenpair, sobolev_constant, verify_positivity,
    EigenPair, EmbeddingRange, PositivityReport, SobolevEstimate, EIGEN_TOL,
};
use quenchlab_core::{Discretization, Field};

use crate::config::{ConfigError, ProfileKind, ScaleMode, Scenario};
use crate::gridfile::{self, GridFileError};

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Core(#[from] quenchlab_core::Error),
    #[error("{path}: {source}")]
    GridFile {
        path: PathBuf,
        source: GridFileError,
    },
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Invalid(String),
}

impl LabError {
    /// 1 for validation problems, 2 for numerical failures.
    pub fn exit_code(&self) -> u8 {
        use quenchlab_core::Error as E;
        match self {
            LabError::Core(
                E::NotPositiveDefinite { .. } | E::NoConvergence { .. } | E::NonFinite,
            ) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Check {
    Pass,
    Fail,
    NotApplicable,
}

impl Check {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Check::Pass
        } else {
            Check::Fail
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Check::Pass => "pass",
            Check::Fail => "fail",
            Check::NotApplicable => "not-applicable",
        }
    }
}

/// Everything computed before time stepping.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub scenario: Scenario,
    pub disc: Discretization,
    pub eig: EigenPair,
    pub positivity: PositivityReport,
    /// Embedding constants at `2p` and `2q` (one entry when they agree).
    pub sobolev: Vec<SobolevEstimate>,
    pub embedding: [EmbeddingRange; 2],
    pub lower_applicable: bool,
    /// Factor applied to the configured amplitudes by the scaling mode.
    pub amplitude_factor: f64,
    pub u0: Field,
    pub v0: Field,
    pub phi0: f64,
    pub psi0: f64,
    pub report: BoundReport,
    pub envelope_horizon: f64,
    pub run_horizon: f64,
    pub diagnostics: Vec<String>,
}

fn bump(disc: &Discretization) -> Field {
    let grid = &disc.grid;
    match grid.descriptor().shape {
        Shape::Ball { radius } => grid.sample_clamped(|x| {
            let s = x[0] / radius;
            (1.0 - s * s).powi(2)
        }),
        Shape::Rectangle { lx, ly } => grid.sample_clamped(|x| {
            (16.0 * x[0] * (lx - x[0]) * x[1] * (ly - x[1]) / (lx * lx * ly * ly)).powi(2)
        }),
    }
}

fn base_field(
    disc: &Discretization,
    eig: &EigenPair,
    kind: ProfileKind,
    file: Option<&PathBuf>,
) -> Result<Field, LabError> {
    match kind {
        ProfileKind::Bump => Ok(bump(disc)),
        ProfileKind::Zero => Ok(disc.grid.sample(|_| 0.0)),
        ProfileKind::Eigen => {
            // the plate mode of a square dips below zero near the corners
            let f = eig.field(&disc.grid)?;
            let peak = f.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            Ok(f.map(|v| v.max(0.0) / peak))
        }
        ProfileKind::File => {
            let path = file.expect("file profiles carry a path");
            let values = gridfile::load(path, disc.grid.node_count()).map_err(|source| {
                LabError::GridFile {
                    path: path.clone(),
                    source,
                }
            })?;
            let field = Field {
                desc: *disc.grid.descriptor(),
                values,
            };
            let interior = disc.grid.interior_values(&field)?;
            let rebuilt = disc.grid.field_from_interior(&interior)?;
            if rebuilt.values != field.values {
                return Err(LabError::Invalid(format!(
                    "{}: boundary nodes must be zero for clamped data",
                    path.display()
                )));
            }
            Ok(field)
        }
    }
}

fn functional_pair(
    disc: &Discretization,
    eig: &EigenPair,
    u: &Field,
    v: &Field,
) -> Result<(f64, f64), LabError> {
    let ui = disc.grid.interior_values(u)?;
    let vi = disc.grid.interior_values(v)?;
    let f = quenchlab_core::evolution::functionals(disc, eig, &ui, &vi);
    Ok((f.phi, f.psi))
}

pub fn prepare(scenario: &Scenario) -> Result<Prepared, LabError> {
    let s = scenario;
    let mut diagnostics = Vec::new();
    let disc = Discretization::new(&s.domain)?;
    let eig = first_eigenpair(&disc.bilaplacian, EIGEN_TOL)?;
    let positivity = verify_positivity(&eig, &disc.grid);
    if !positivity.pass {
        diagnostics.push(format!(
            "φ₁ is not positive (min {:e})",
            positivity.min_value
        ));
    }
    let i = &s.initial;
    let u_base = base_field(&disc, &eig, i.u, i.u_file.as_ref())?.map(|x| x * i.amplitude_u);
    let v_base = base_field(&disc, &eig, i.v, i.v_file.as_ref())?.map(|x| x * i.amplitude_v);

    let dim = s.domain.dimension;
    let embedding = [
        embedding_range(dim, 2.0 * s.p),
        embedding_range(dim, 2.0 * s.q),
    ];
    let lower_applicable = embedding.iter().all(|r| *r != EmbeddingRange::Inadmissible);
    if embedding.contains(&EmbeddingRange::OutsideLemma) {
        diagnostics.push(String::from(
            "N = 4: embedding exponents accepted but outside the lemma",
        ));
    }
    let mut sobolev: Vec<SobolevEstimate> = Vec::new();
    if lower_applicable {
        let ui = disc.grid.interior_values(&u_base)?;
        let vi = disc.grid.interior_values(&v_base)?;
        let mut rs = vec![2.0 * s.p];
        if s.q != s.p {
            rs.push(2.0 * s.q);
        }
        for r in rs {
            let mut est = sobolev_constant(&disc, &eig, r)?;
            if !est.converged {
                diagnostics.push(format!(
                    "embedding ascent at r = {r} stopped before convergence"
                ));
            }
            for w in [&ui, &vi] {
                if let Ok(ratio) = embedding_ratio(&disc, w, r) {
                    est.absorb_ratio(ratio);
                }
            }
            sobolev.push(est);
        }
    } else {
        diagnostics.push(String::from(
            "2p or 2q lies outside the embedding range: lower bounds not applicable",
        ));
    }
    let s_at = |r: f64| sobolev.iter().find(|e| e.r == r).map_or(f64::NAN, |e| e.s);
    let (s2p, s2q) = (s_at(2.0 * s.p), s_at(2.0 * s.q));

    let envelope_horizon = s.bounds.horizon.or(s.run.horizon).unwrap_or(1.0);
    let (phi_base, psi_base) = functional_pair(&disc, &eig, &u_base, &v_base)?;
    let inputs = |phi0: f64, psi0: f64| BoundInputs {
        p: s.p,
        q: s.q,
        phi0,
        psi0,
        lambda1: eig.lambda1,
        measure: disc.quad.measure,
        s2p: if lower_applicable { s2p } else { 1.0 },
        s2q: if lower_applicable { s2q } else { 1.0 },
        coefficients: s.coefficients.clone(),
        horizon: envelope_horizon,
        is_ball: s.domain.is_ball(),
    };
    let mode = s.bounds.epsilon;
    let amplitude_factor = match i.scale {
        ScaleMode::None => i.scale_factor,
        ScaleMode::HAdmissible | ScaleMode::CorollaryThreshold => {
            let unit = compute_bounds(&inputs(phi_base.max(f64::MIN_POSITIVE), psi_base), mode)?;
            let target = match i.scale {
                ScaleMode::HAdmissible => unit.h_root,
                _ => unit.corollary_threshold,
            };
            let target = target.ok_or_else(|| {
                LabError::Invalid(format!(
                    "`{}` scaling needs the upper bounds to apply: {}",
                    i.scale.as_str(),
                    unit.diagnostics.join("; ")
                ))
            })?;
            if !(psi_base > 0.0) {
                return Err(LabError::Invalid(String::from(
                    "scaling needs initial data with Ψ₀ > 0",
                )));
            }
            i.scale_factor * target / psi_base
        }
    };
    let u0 = u_base.map(|x| x * amplitude_factor);
    let v0 = v_base.map(|x| x * amplitude_factor);
    let (phi0, psi0) = functional_pair(&disc, &eig, &u0, &v0)?;
    let mut report = compute_bounds(&inputs(phi0, psi0), mode)?;
    if !lower_applicable {
        report.t_lower = None;
        report.t_tilde = None;
    }
    if !s.domain.is_ball() {
        diagnostics.push(String::from(
            "rectangle: upper bounds not applicable (ball required)",
        ));
    }

    let run_horizon = match s.run.horizon {
        Some(h) => h,
        None => {
            let upper = [report.t0_upper, report.tbar_upper]
                .into_iter()
                .flatten()
                .fold(f64::INFINITY, f64::min);
            if upper.is_finite() {
                1.5 * upper
            } else if let Some(t) = report.t_lower.filter(|t| t.is_finite()) {
                t
            } else {
                return Err(LabError::Invalid(String::from(
                    "no finite bound to choose a horizon from: set [run] horizon",
                )));
            }
        }
    };
    Ok(Prepared {
        scenario: s.clone(),
        disc,
        eig,
        positivity,
        sobolev,
        embedding,
        lower_applicable,
        amplitude_factor,
        u0,
        v0,
        phi0,
        psi0,
        report,
        envelope_horizon,
        run_horizon,
        diagnostics,
    })
}

impl Prepared {
    pub fn delta_max(&self) -> f64 {
        let c = &self.scenario.coefficients;
        c.sup_over(self.run_horizon, |t| c.delta[0].at(t).max(c.delta[1].at(t)))
    }

    pub fn run_options(&self) -> RunOptions {
        let r = &self.scenario.run;
        let dt_max = r.dt_max.unwrap_or_else(|| {
            default_dt_max(self.run_horizon, self.delta_max(), self.eig.lambda1)
        });
        let mut o = RunOptions::new(dt_max);
        o.safety = r.safety;
        o.max_steps = r.max_steps;
        o
    }

    pub fn system(&self) -> SystemSpec {
        let s = &self.scenario;
        SystemSpec {
            domain: s.domain,
            coefficients: s.coefficients.clone(),
            p: s.p,
            q: s.q,
            u0: self.u0.clone(),
            v0: self.v0.clone(),
            horizon: self.run_horizon,
            blowup_threshold: s.run.blowup_threshold,
        }
    }

    pub fn simulate(&self) -> Result<Simulation, LabError> {
        let traj = run(&self.system(), &self.disc, &self.eig, &self.run_options())?;
        let (p, q) = (self.scenario.p, self.scenario.q);
        let window = self.scenario.run.fit_window;
        let (tstar, tstar_phi, extrapolation) = if traj.verdict.is_blowup() {
            let a = estimate_tstar(&traj.psi_series(), psi_exponent(p, q), window);
            let b = estimate_tstar(&traj.phi_series(), phi_exponent(p, q), window);
            let note = a.err().map(|e| e.as_str().to_string());
            (a.ok(), b.ok(), note)
        } else {
            (None, None, None)
        };
        Ok(Simulation {
            traj,
            tstar,
            tstar_phi,
            extrapolation_note: extrapolation,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub traj: Trajectory,
    /// Extrapolation from `Ψ`.
    pub tstar: Option<TstarEstimate>,
    /// Extrapolation from `Φ`; reported alongside, not compared.
    pub tstar_phi: Option<TstarEstimate>,
    pub extrapolation_note: Option<String>,
}

/// Slack of the sample-wise `||u||² + ||v||² <= Λ₁⁻¹ Φ` check.
pub const REMARK_REL_TOL: f64 = 1e-9;
/// Allowance on the majorant comparison.
pub const MAJORANT_TOL: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct Verification {
    pub sandwich: Check,
    /// `t*` bracket below `T̄` (p = q).
    pub corollary: Check,
    pub remark1: Check,
    pub majorant: Check,
    /// No blow-up before `T_lower`.
    pub safe_interval: Check,
    pub positivity: Check,
    pub monotone_psi: Check,
    pub left_nonnegative: bool,
    pub remark1_worst: f64,
    pub majorant_worst: f64,
    pub notes: Vec<String>,
}

impl Verification {
    pub fn passed(&self) -> bool {
        [
            self.sandwich,
            self.corollary,
            self.remark1,
            self.majorant,
            self.safe_interval,
            self.positivity,
            self.monotone_psi,
        ]
        .iter()
        .all(|c| *c != Check::Fail)
    }

    pub fn entries(&self) -> [(&'static str, Check); 7] {
        [
            ("sandwich", self.sandwich),
            ("corollary", self.corollary),
            ("remark1", self.remark1),
            ("majorant", self.majorant),
            ("safe_interval", self.safe_interval),
            ("positivity", self.positivity),
            ("monotone_psi", self.monotone_psi),
        ]
    }
}

pub fn verify(prep: &Prepared, sim: &Simulation) -> Verification {
    let r = &prep.report;
    let traj = &sim.traj;
    let mut notes = Vec::new();
    let blew_up = traj.verdict.is_blowup();
    let reached = traj.last().t;

    let sandwich = match (r.t_lower, r.t0_upper) {
        (Some(tl), Some(t0)) => match &sim.tstar {
            Some(est) => Check::from_bool(tl <= est.low && est.high <= t0),
            None if blew_up => {
                notes.push(format!(
                    "blow-up detected but t* could not be extrapolated: {}",
                    sim.extrapolation_note.as_deref().unwrap_or("unknown")
                ));
                Check::Fail
            }
            None if reached >= t0 => {
                notes.push(String::from("no blow-up although the run passed T₀"));
                Check::Fail
            }
            None => Check::NotApplicable,
        },
        _ => Check::NotApplicable,
    };

    let corollary = match (r.tbar_upper, &sim.tstar) {
        (Some(tb), Some(est)) => Check::from_bool(est.high <= tb),
        (Some(tb), None) if !blew_up && reached >= tb => Check::Fail,
        _ => Check::NotApplicable,
    };

    let lambda = prep.eig.lambda1;
    let mut remark_worst = f64::NEG_INFINITY;
    let mut remark_ok = true;
    for s in &traj.samples {
        let bound = s.f.phi / lambda;
        // denormal states carry no relative precision
        let ok = s.f.l2_sq <= bound * (1.0 + REMARK_REL_TOL) + 1e-280;
        remark_ok &= ok;
        if bound > 0.0 {
            remark_worst = remark_worst.max(s.f.l2_sq / bound - 1.0);
        }
    }
    let remark1 = Check::from_bool(remark_ok);

    let (majorant, majorant_worst) = match r.t_lower {
        Some(tl) if prep.phi0 > 0.0 => {
            let k = &r.constants;
            let mut worst = f64::NEG_INFINITY;
            let mut ok = true;
            for s in traj.samples.iter().filter(|s| s.t < tl) {
                if let Some(m) = majorant_value(k.lead, k.b, prep.scenario.p, prep.phi0, s.t) {
                    worst = worst.max(s.f.phi / m - 1.0);
                    ok &= s.f.phi <= m * (1.0 + MAJORANT_TOL);
                }
            }
            (Check::from_bool(ok), worst)
        }
        _ => (Check::NotApplicable, f64::NAN),
    };

    let safe_interval = match r.t_lower {
        Some(tl) => {
            let early = blew_up && sim.tstar.map_or(reached, |e| e.low) < tl;
            Check::from_bool(!early && traj.samples.iter().all(|s| s.f.phi.is_finite()))
        }
        None => Check::NotApplicable,
    };

    let positivity = if prep.positivity.informational {
        Check::NotApplicable
    } else {
        Check::from_bool(prep.positivity.pass)
    };

    let monotone_psi = if blew_up && prep.scenario.domain.is_ball() && r.flags.h_positive_on_ray {
        Check::from_bool(traj.samples.windows(2).all(|w| w[1].f.psi > w[0].f.psi))
    } else {
        Check::NotApplicable
    };

    if traj.left_nonnegative {
        notes.push(String::from(
            "solution left the nonnegative cone (min < -1e-6 sup)",
        ));
    }
    Verification {
        sandwich,
        corollary,
        remark1,
        majorant,
        safe_interval,
        positivity,
        monotone_psi,
        left_nonnegative: traj.left_nonnegative,
        remark1_worst: remark_worst,
        majorant_worst,
        notes,
    }
}
