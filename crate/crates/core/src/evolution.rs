//! Linearly implicit time stepping of the coupled system, functionals
//! `Φ`, `Ψ` along the trajectory, and blow-up time extrapolation.

use alloc::vec;
use alloc::vec::Vec;

use crate::banded::BandCholesky;
use crate::coefficients::Coefficients;
use crate::domain::{Discretization, DomainDescriptor, Field};
use crate::error::{Error, Result};
use crate::spectrum::EigenPair;

/// Default blow-up threshold on `||u||_∞ + ||v||_∞`.
pub const DEFAULT_BLOWUP_THRESHOLD: f64 = 1e8;
pub const DEFAULT_SAFETY: f64 = 0.1;
/// Largest accepted growth factor of `Φ` over one step.
pub const MAX_PHI_GROWTH: f64 = 4.0;
const REFRESH_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    pub domain: DomainDescriptor,
    pub coefficients: Coefficients,
    pub p: f64,
    pub q: f64,
    pub u0: Field,
    pub v0: Field,
    pub horizon: f64,
    pub blowup_threshold: f64,
}

impl SystemSpec {
    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        if !(self.q > 1.0) || !(self.p >= self.q) {
            return Err(Error::Hypothesis("exponents must satisfy p >= q > 1"));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::InvalidArgument(
                "horizon must be positive and finite",
            ));
        }
        if !(self.blowup_threshold > 0.0) {
            return Err(Error::InvalidArgument("blow-up threshold must be positive"));
        }
        self.coefficients.validate(self.horizon)?;
        for f in [&self.u0, &self.v0] {
            if f.desc != self.domain {
                return Err(Error::InvalidArgument(
                    "initial field does not match the domain",
                ));
            }
            if f.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument("initial data must be finite"));
            }
            if f.values.iter().any(|&v| v < 0.0) {
                return Err(Error::Hypothesis("initial data must be nonnegative"));
            }
        }
        Ok(())
    }
}

/// Time step controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub dt_max: f64,
    pub safety: f64,
    pub max_steps: usize,
    /// Smallest step before the run is reported as a step underflow.
    pub dt_min: f64,
}

impl RunOptions {
    pub fn new(dt_max: f64) -> Self {
        Self {
            dt_max,
            safety: DEFAULT_SAFETY,
            max_steps: 2_000_000,
            dt_min: dt_max * 1e-14,
        }
    }
}

/// `min(horizon / 200, 0.01 / (δ Λ₁))`: resolves the horizon and the decay
/// of the slowest clamped mode.
pub fn default_dt_max(horizon: f64, delta_max: f64, lambda1: f64) -> f64 {
    (horizon / 200.0).min(0.01 / (delta_max * lambda1))
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Functionals {
    pub phi: f64,
    pub phi1: f64,
    pub phi2: f64,
    pub psi: f64,
    pub psi1: f64,
    pub psi2: f64,
    /// `||u||_2² + ||v||_2²`.
    pub l2_sq: f64,
}

/// `Φᵢ = ||Δ_h w||²`, `Ψᵢ = ∫ w φ₁` on interior vectors.
pub fn functionals(disc: &Discretization, eig: &EigenPair, u: &[f64], v: &[f64]) -> Functionals {
    let phi1 = disc.laplacian_energy(u);
    let phi2 = disc.laplacian_energy(v);
    let psi1 = disc.inner(u, &eig.phi1);
    let psi2 = disc.inner(v, &eig.phi1);
    Functionals {
        phi: phi1 + phi2,
        phi1,
        phi2,
        psi: psi1 + psi2,
        psi1,
        psi2,
        l2_sq: disc.inner(u, u) + disc.inner(v, v),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub f: Functionals,
    pub sup_u: f64,
    pub sup_v: f64,
    pub min_u: f64,
    pub min_v: f64,
    /// Step that produced this sample; the initial sample carries the first step.
    pub dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    CompletedHorizon,
    BlowupDetected,
    /// The step size collapsed before the threshold was reached; treated as
    /// blow-up for extrapolation.
    StepUnderflow,
    StepLimit,
}

impl Verdict {
    pub fn is_blowup(&self) -> bool {
        matches!(self, Verdict::BlowupDetected | Verdict::StepUnderflow)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::CompletedHorizon => "completed-horizon",
            Verdict::BlowupDetected => "blowup-detected",
            Verdict::StepUnderflow => "step-underflow",
            Verdict::StepLimit => "step-limit",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub verdict: Verdict,
    pub rejected_steps: usize,
    pub factorizations: usize,
    /// Some sample had `min < -1e-6 ||·||_∞`.
    pub left_nonnegative: bool,
    /// Final interior state.
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl Trajectory {
    pub fn last(&self) -> &Sample {
        self.samples
            .last()
            .expect("trajectory always holds the initial sample")
    }

    pub fn psi_series(&self) -> Vec<(f64, f64)> {
        self.samples.iter().map(|s| (s.t, s.f.psi)).collect()
    }

    pub fn phi_series(&self) -> Vec<(f64, f64)> {
        self.samples.iter().map(|s| (s.t, s.f.phi)).collect()
    }
}

struct CachedFactor {
    damping: f64,
    diffusion: f64,
    fact: BandCholesky,
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= REFRESH_TOL * a.abs().max(b.abs())
}

/// Backward Euler for the linear part, explicit sources.
pub struct Stepper<'a> {
    disc: &'a Discretization,
    coefficients: &'a Coefficients,
    p: f64,
    q: f64,
    cache: Vec<CachedFactor>,
    factorizations: usize,
}

impl<'a> Stepper<'a> {
    pub fn new(disc: &'a Discretization, coefficients: &'a Coefficients, p: f64, q: f64) -> Self {
        Self {
            disc,
            coefficients,
            p,
            q,
            cache: Vec::new(),
            factorizations: 0,
        }
    }

    pub fn factorizations(&self) -> usize {
        self.factorizations
    }

    fn factor_for(&mut self, damping: f64, diffusion: f64) -> Result<usize> {
        if let Some(i) = self
            .cache
            .iter()
            .position(|c| close(c.damping, damping) && close(c.diffusion, diffusion))
        {
            return Ok(i);
        }
        let k = self.disc.bilaplacian.weighted_matrix();
        let kl = self.disc.laplacian.weighted_matrix();
        let mut m = k.combine(damping, kl, -diffusion);
        m.add_diagonal(self.disc.mass(), 1.0);
        let fact = m.cholesky()?;
        self.factorizations += 1;
        if self.cache.len() >= 4 {
            self.cache.remove(0);
        }
        self.cache.push(CachedFactor {
            damping,
            diffusion,
            fact,
        });
        Ok(self.cache.len() - 1)
    }

    /// One step from `(u, v, t)`: solves
    /// `(W + dt δᵢ(t+dt) K - dt hᵢ(t+dt) W L) w' = W (w + dt kᵢ(t) f)`
    /// with `f₁ = max(v, 0)^p`, `f₂ = max(u, 0)^q`.
    pub fn step(&mut self, u: &[f64], v: &[f64], t: f64, dt: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument("time step must be positive"));
        }
        let c = self.coefficients;
        let (p, q) = (self.p, self.q);
        let w = self.disc.mass();
        let t1 = t + dt;
        let mut out: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        let sources = [(u, v, p), (v, u, q)];
        for (i, &(own, other, e)) in sources.iter().enumerate() {
            let k = c.k[i].at(t);
            let mut rhs: Vec<f64> = own
                .iter()
                .zip(other)
                .zip(w)
                .map(|((&a, &b), &m)| {
                    let src = if k == 0.0 {
                        0.0
                    } else {
                        k * libm::pow(b.max(0.0), e)
                    };
                    m * (a + dt * src)
                })
                .collect();
            let idx = self.factor_for(dt * c.delta[i].at(t1), dt * c.h[i].at(t1))?;
            self.cache[idx].fact.solve_in_place(&mut rhs);
            if rhs.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite);
            }
            out[i] = rhs;
        }
        let [a, b] = out;
        Ok((a, b))
    }
}

fn extremes(x: &[f64]) -> (f64, f64) {
    x.iter().fold((0.0f64, f64::INFINITY), |(s, m), &v| {
        (s.max(v.abs()), m.min(v))
    })
}

fn sample(disc: &Discretization, eig: &EigenPair, u: &[f64], v: &[f64], t: f64, dt: f64) -> Sample {
    let (sup_u, min_u) = extremes(u);
    let (sup_v, min_v) = extremes(v);
    Sample {
        t,
        f: functionals(disc, eig, u, v),
        sup_u,
        sup_v,
        min_u,
        min_v,
        dt,
    }
}

/// Relative growth rate `max(k₁ ||v||^p / ||u||, k₂ ||u||^q / ||v||)` of the
/// explicit sources; equals `||u||^{p-1}` when `u = v`, `p = q`, `k = 1`.
fn source_rate(c: &Coefficients, t: f64, p: f64, q: f64, sup_u: f64, sup_v: f64) -> f64 {
    let floor = (1e-3 * sup_u.max(sup_v)).max(f64::MIN_POSITIVE);
    let ru = c.k[0].at(t) * libm::pow(sup_v, p) / sup_u.max(floor);
    let rv = c.k[1].at(t) * libm::pow(sup_u, q) / sup_v.max(floor);
    ru.max(rv)
}

/// Largest `dt_max 2^{-j}` not above `safety / (1 + rate)`, so that
/// factorizations are reused across steps.
fn quantized_step(opts: &RunOptions, rate: f64) -> f64 {
    let target = opts.safety / (1.0 + rate);
    let mut dt = opts.dt_max;
    while dt > target && dt > opts.dt_min {
        dt *= 0.5;
    }
    dt
}

/// Integrates the system until the horizon or the blow-up threshold.
pub fn run(
    spec: &SystemSpec,
    disc: &Discretization,
    eig: &EigenPair,
    opts: &RunOptions,
) -> Result<Trajectory> {
    spec.validate()?;
    if disc.grid.descriptor() != &spec.domain {
        return Err(Error::InvalidArgument(
            "discretization does not match the domain",
        ));
    }
    if !(opts.dt_max > 0.0) || !(opts.safety > 0.0) {
        return Err(Error::InvalidArgument(
            "time step controls must be positive",
        ));
    }
    let mut u = disc.grid.interior_values(&spec.u0)?;
    let mut v = disc.grid.interior_values(&spec.v0)?;
    let mut stepper = Stepper::new(disc, &spec.coefficients, spec.p, spec.q);
    let mut t = 0.0;
    let first = sample(disc, eig, &u, &v, t, 0.0);
    let mut current = first;
    let mut samples = vec![first];
    let mut rejected = 0;
    let mut verdict = Verdict::StepLimit;
    let tiny = 1e-12 * spec.horizon;
    for _ in 0..opts.max_steps {
        if current.sup_u + current.sup_v >= spec.blowup_threshold {
            verdict = Verdict::BlowupDetected;
            break;
        }
        if t >= spec.horizon - tiny {
            verdict = Verdict::CompletedHorizon;
            break;
        }
        let rate = source_rate(
            &spec.coefficients,
            t,
            spec.p,
            spec.q,
            current.sup_u,
            current.sup_v,
        );
        let mut dt = quantized_step(opts, rate);
        let remaining = spec.horizon - t;
        if dt >= remaining - tiny {
            dt = remaining;
        }
        let accepted = loop {
            if dt < opts.dt_min {
                break None;
            }
            match stepper.step(&u, &v, t, dt) {
                Ok((un, vn)) => {
                    // land on the horizon exactly rather than one rounding short
                    let t_next = if dt == remaining {
                        spec.horizon
                    } else {
                        t + dt
                    };
                    let s = sample(disc, eig, &un, &vn, t_next, dt);
                    let grew = current.f.phi > 0.0 && s.f.phi > MAX_PHI_GROWTH * current.f.phi;
                    if s.f.phi.is_finite() && !grew {
                        break Some((un, vn, s));
                    }
                }
                Err(Error::NonFinite) => {}
                Err(e) => return Err(e),
            }
            rejected += 1;
            dt *= 0.5;
        };
        match accepted {
            Some((un, vn, s)) => {
                u = un;
                v = vn;
                t = s.t;
                if samples.len() == 1 {
                    samples[0].dt = dt;
                }
                samples.push(s);
                current = s;
            }
            None => {
                verdict = Verdict::StepUnderflow;
                break;
            }
        }
    }
    let left_nonnegative = samples
        .iter()
        .any(|s| s.min_u < -1e-6 * s.sup_u || s.min_v < -1e-6 * s.sup_v);
    Ok(Trajectory {
        samples,
        verdict,
        rejected_steps: rejected,
        factorizations: stepper.factorizations(),
        left_nonnegative,
        u,
        v,
    })
}

/// Growth exponent `p_eff` for which `Ψ^{1-p_eff}` is affine near blow-up:
/// `1 + (pq - 1)/(p + 1)`, equal to `p` when `p = q`.
pub fn psi_exponent(p: f64, q: f64) -> f64 {
    1.0 + (p * q - 1.0) / (p + 1.0)
}

/// The corresponding exponent for `Φ`, which grows like `Ψ²`.
pub fn phi_exponent(p: f64, q: f64) -> f64 {
    1.0 + 0.5 * (p * q - 1.0) / (p + 1.0)
}

pub const DEFAULT_FIT_WINDOW: usize = 8;
const MIN_FIT_SAMPLES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TstarEstimate {
    pub tstar: f64,
    pub low: f64,
    pub high: f64,
    /// Raw zero crossing of the fitted line.
    pub crossing: f64,
    pub stderr: f64,
    pub samples_used: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtrapolationFailure {
    TooFewSamples,
    NotIncreasing,
    NoTrend,
}

impl ExtrapolationFailure {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExtrapolationFailure::TooFewSamples => "fewer than 5 trailing samples",
            ExtrapolationFailure::NotIncreasing => "trailing samples are not increasing",
            ExtrapolationFailure::NoTrend => "fitted slope is nonnegative: no blow-up trend",
        }
    }
}

/// Least-squares line through `(t, x^{1-γ})` over the last `window`
/// samples; its zero crossing estimates the blow-up time. The bracket is
/// `[last t, crossing + stderr]`.
pub fn estimate_tstar(
    series: &[(f64, f64)],
    exponent: f64,
    window: usize,
) -> core::result::Result<TstarEstimate, ExtrapolationFailure> {
    let m = window.max(MIN_FIT_SAMPLES).min(series.len());
    if m < MIN_FIT_SAMPLES {
        return Err(ExtrapolationFailure::TooFewSamples);
    }
    let tail = &series[series.len() - m..];
    // noise may break monotonicity between neighbours; only the trend matters
    if tail.windows(2).any(|w| !(w[1].0 > w[0].0))
        || tail.iter().any(|p| !(p.1 > 0.0))
        || !(tail[m - 1].1 > tail[0].1)
    {
        return Err(ExtrapolationFailure::NotIncreasing);
    }
    let pts: Vec<(f64, f64)> = tail
        .iter()
        .map(|&(t, x)| (t, libm::pow(x, 1.0 - exponent)))
        .collect();
    let mf = m as f64;
    let tbar = pts.iter().map(|p| p.0).sum::<f64>() / mf;
    let ybar = pts.iter().map(|p| p.1).sum::<f64>() / mf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - tbar) * (p.0 - tbar)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - tbar) * (p.1 - ybar)).sum();
    let slope = sxy / sxx;
    if !(slope < 0.0) {
        return Err(ExtrapolationFailure::NoTrend);
    }
    // y = ybar + slope (t - tbar)
    let crossing = tbar - ybar / slope;
    let rss: f64 = pts
        .iter()
        .map(|p| {
            let r = p.1 - ybar - slope * (p.0 - tbar);
            r * r
        })
        .sum();
    let s2 = rss / (mf - 2.0);
    let var_ybar = s2 / mf;
    let var_slope = s2 / sxx;
    // crossing = tbar - ybar/slope; ybar and slope are uncorrelated
    let var_c =
        var_ybar / (slope * slope) + ybar * ybar * var_slope / (slope * slope * slope * slope);
    let stderr = libm::sqrt(var_c.max(0.0));
    let last = tail[m - 1].0;
    let tstar = crossing.max(last);
    Ok(TstarEstimate {
        tstar,
        low: last,
        high: tstar.max(crossing + stderr),
        crossing,
        stderr,
        samples_used: m,
    })
}
