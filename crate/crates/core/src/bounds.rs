//! Envelope constants and blow-up time bounds.
//!
//! Lower bounds control `Φ = ||Δu||² + ||Δv||²` from above through the
//! majorant `Φ' <= a Φ^p + B Φ`; upper bounds control the eigenfunction
//! moment `Ψ = ∫(u + v) φ₁` from below through `Ψ' >= H(Ψ)`.

use alloc::string::String;
use alloc::vec::Vec;

use crate::coefficients::Coefficients;
use crate::error::{Error, Result};
use crate::quad;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsilonMode {
    EqualSplit,
    Optimized,
}

/// Young splitting `h/ε_even = 2θδ`, `k/ε_odd = 2(1-θ)δ`, which makes the
/// `||Δ²u||²` terms cancel. `θ = 1/2` is the equal split. Where `h(t) = 0`
/// the even parameter drops out and `ε_odd = k/(2δ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonSplit {
    pub theta: f64,
}

impl EpsilonSplit {
    pub fn equal() -> Self {
        Self { theta: 0.5 }
    }

    pub fn with_theta(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::InvalidArgument("theta must lie in (0, 1)"));
        }
        Ok(Self { theta })
    }

    /// `[ε₁, ε₂, ε₃, ε₄]` at time `t`; `ε₁, ε₂` belong to the first equation.
    pub fn at(&self, coeffs: &Coefficients, t: f64) -> [f64; 4] {
        let mut eps = [0.0; 4];
        for i in 0..2 {
            let d = coeffs.delta[i].at(t);
            let h = coeffs.h[i].at(t);
            let k = coeffs.k[i].at(t);
            if h == 0.0 {
                eps[2 * i] = k / (2.0 * d);
                eps[2 * i + 1] = 0.0;
            } else {
                eps[2 * i] = k / (2.0 * (1.0 - self.theta) * d);
                eps[2 * i + 1] = h / (2.0 * self.theta * d);
            }
        }
        eps
    }

    /// Residuals of `h₁/ε₂ + k₁/ε₁ - 2δ₁` and the second-equation analogue.
    pub fn vanishing_residuals(&self, coeffs: &Coefficients, t: f64) -> [f64; 2] {
        let e = self.at(coeffs, t);
        let mut out = [0.0; 2];
        for i in 0..2 {
            let d = coeffs.delta[i].at(t);
            let h = coeffs.h[i].at(t);
            let k = coeffs.k[i].at(t);
            let hpart = if h == 0.0 { 0.0 } else { h / e[2 * i + 1] };
            let kpart = if k == 0.0 { 2.0 * d } else { k / e[2 * i] };
            out[i] = hpart + kpart - 2.0 * d;
        }
        out
    }
}

/// Data the bounds are computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundInputs {
    pub p: f64,
    pub q: f64,
    pub phi0: f64,
    pub psi0: f64,
    pub lambda1: f64,
    pub measure: f64,
    /// Embedding constants at `r = 2p` and `r = 2q`.
    pub s2p: f64,
    pub s2q: f64,
    pub coefficients: Coefficients,
    /// Horizon over which coefficient suprema/infima are taken.
    pub horizon: f64,
    pub is_ball: bool,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 1.0) {
            return Err(Error::Hypothesis("p must exceed 1"));
        }
        if !(self.q > 1.0) {
            return Err(Error::Hypothesis("q must exceed 1"));
        }
        if self.p < self.q {
            return Err(Error::Hypothesis("p must be at least q"));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::InvalidArgument("envelope horizon must be positive"));
        }
        self.coefficients.validate(self.horizon)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeConstants {
    pub theta: f64,
    pub a1: f64,
    pub a2: f64,
    /// `max{A₁, A₂}`.
    pub a: f64,
    /// `p = q` branch constant, absent when `p > q`.
    pub atilde: Option<f64>,
    pub b: f64,
    /// Leading coefficient of the majorant: `2A` for `p > q`, `Ã` for `p = q`.
    pub lead: f64,
    pub k: f64,
    pub c1: f64,
    pub c2: f64,
    pub c: f64,
    pub cbar: f64,
    pub delta: f64,
    /// Young constant; zero when `p = q`.
    pub q_const: f64,
    pub s2p: f64,
    pub s2q: f64,
    pub lambda1: f64,
    pub measure: f64,
    pub phi0: f64,
    pub psi0: f64,
}

/// `Q = ((p-q)/p) (q/p)^{q/(p-q)}`, zero for `p = q`.
pub fn young_constant(p: f64, q: f64) -> f64 {
    if p == q {
        return 0.0;
    }
    (p - q) / p * libm::pow(q / p, q / (p - q))
}

pub fn envelope_constants(inputs: &BoundInputs, split: EpsilonSplit) -> EnvelopeConstants {
    let c = &inputs.coefficients;
    let hz = inputs.horizon;
    let (p, q) = (inputs.p, inputs.q);
    let eps = |t: f64| split.at(c, t);
    let b1 = c.sup_over(hz, |t| c.h[0].at(t) * eps(t)[1]);
    let b2 = c.sup_over(hz, |t| c.h[1].at(t) * eps(t)[3]);
    let b = b1.max(b2);
    let s2p_pow = libm::pow(inputs.s2p, 2.0 * p);
    let s2q_pow = libm::pow(inputs.s2q, 2.0 * q);
    // ε₁ pairs with k₁ and the 2p-embedding, ε₃ with k₂ and the 2q one
    let sup_k2e3 = c.sup_over(hz, |t| c.k[1].at(t) * eps(t)[2]);
    let sup_k1e1 = c.sup_over(hz, |t| c.k[0].at(t) * eps(t)[0]);
    let a1 = sup_k2e3 * s2q_pow * libm::pow(inputs.phi0, q - p);
    let a2 = sup_k1e1 * s2p_pow;
    let a = a1.max(a2);
    let (atilde, lead) = if p == q {
        let at = s2p_pow * sup_k2e3.max(sup_k1e1);
        (Some(at), at)
    } else {
        (None, 2.0 * a)
    };
    let k = lead + b * libm::pow(inputs.phi0, 1.0 - p);
    let c1 = c.inf_over(hz, |t| c.k[0].at(t)) * libm::pow(inputs.measure, -(p - 1.0) / 2.0);
    let c2 = c.inf_over(hz, |t| c.k[1].at(t)) * libm::pow(inputs.measure, -(q - 1.0) / 2.0);
    let cmin = c1.min(c2);
    let delta = c.sup_over(hz, |t| c.delta[0].at(t).max(c.delta[1].at(t)));
    EnvelopeConstants {
        theta: split.theta,
        a1,
        a2,
        a,
        atilde,
        b,
        lead,
        k,
        c1,
        c2,
        c: cmin,
        cbar: libm::pow(2.0, 1.0 - p) * cmin,
        delta,
        q_const: young_constant(p, q),
        s2p: inputs.s2p,
        s2q: inputs.s2q,
        lambda1: inputs.lambda1,
        measure: inputs.measure,
        phi0: inputs.phi0,
        psi0: inputs.psi0,
    }
}

fn check_lower(lead: f64, b: f64, p: f64, phi0: f64) -> Result<()> {
    if !(p > 1.0) {
        return Err(Error::Hypothesis("p must exceed 1"));
    }
    if !(phi0 > 0.0) {
        return Err(Error::Hypothesis("initial energy Φ₀ must be positive"));
    }
    if !(lead >= 0.0) || !(b >= 0.0) {
        return Err(Error::InvalidArgument(
            "envelope constants must be nonnegative",
        ));
    }
    Ok(())
}

/// Blow-up time of `Φ' = lead Φ^p + B Φ`, `Φ(0) = Φ₀`:
/// `ln(1 + B Φ₀^{1-p} / lead) / (B (p-1))`, with its `B → 0` limit
/// `Φ₀^{1-p} / (lead (p-1))`. Infinite when `lead = 0`.
pub fn lower_bound_t(lead: f64, b: f64, p: f64, phi0: f64) -> Result<f64> {
    check_lower(lead, b, p, phi0)?;
    if lead == 0.0 {
        return Ok(f64::INFINITY);
    }
    let y0 = libm::pow(phi0, 1.0 - p);
    let base = y0 / (lead * (p - 1.0));
    let x = b * y0 / lead;
    if x == 0.0 {
        return Ok(base);
    }
    Ok(base * libm::log1p(x) / x)
}

/// `Φ₀^{1-p} / ((p-1) K)` with `K = lead + B Φ₀^{1-p}`.
pub fn lower_bound_t_tilde(lead: f64, b: f64, p: f64, phi0: f64) -> Result<f64> {
    check_lower(lead, b, p, phi0)?;
    let y0 = libm::pow(phi0, 1.0 - p);
    let k = lead + b * y0;
    if k == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(y0 / ((p - 1.0) * k))
}

/// `H(η) = -rate η + 2^{1-q} c η^q - c Q` with `rate = Λ₁ δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HFunction {
    pub rate: f64,
    pub c: f64,
    pub q: f64,
    pub q_const: f64,
}

impl HFunction {
    pub fn from_constants(k: &EnvelopeConstants, q: f64) -> Self {
        Self {
            rate: k.lambda1 * k.delta,
            c: k.c,
            q,
            q_const: k.q_const,
        }
    }

    pub fn leading(&self) -> f64 {
        libm::pow(2.0, 1.0 - self.q) * self.c
    }

    pub fn eval(&self, eta: f64) -> f64 {
        -self.rate * eta + self.leading() * libm::pow(eta, self.q) - self.c * self.q_const
    }

    /// Minimiser `η_m = (rate / (2^{1-q} c q))^{1/(q-1)}` of the convex `H`.
    pub fn stationary_point(&self) -> f64 {
        libm::pow(self.rate / (self.leading() * self.q), 1.0 / (self.q - 1.0))
    }

    /// `min_{η >= ψ} H(η)`.
    pub fn min_on_ray(&self, psi: f64) -> f64 {
        self.eval(psi.max(self.stationary_point()))
    }

    /// Largest zero of `H`, the smallest `Ψ₀` from which `H` stays positive.
    pub fn upper_root(&self) -> f64 {
        let mut lo = self.stationary_point();
        if self.eval(lo) > 0.0 {
            return 0.0;
        }
        let mut hi = lo.max(1.0) * 2.0;
        while self.eval(hi) <= 0.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.eval(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    pub fn as_rhs(&self) -> crate::ode::ScalarRhs {
        crate::ode::ScalarRhs::HFlow {
            rate: self.rate,
            a: self.leading(),
            q: self.q,
            cq: self.c * self.q_const,
        }
    }
}

/// Absolute tolerance of the `T₀` quadrature.
pub const T0_TOL: f64 = 1e-10;

/// `T₀ = ∫_{Ψ₀}^∞ dη / H(η)`.
///
/// With `s = η^{1-q}` the integral becomes
/// `(1/(q-1)) ∫_0^{Ψ₀^{1-q}} ds / (2^{1-q} c - rate s - c Q s^{q/(q-1)})`,
/// whose integrand is bounded at the tail end `s → 0`.
pub fn upper_bound_t0(h: &HFunction, psi0: f64) -> Result<f64> {
    if !(h.q > 1.0) {
        return Err(Error::Hypothesis("q must exceed 1"));
    }
    if !(psi0 > 0.0) || !(h.min_on_ray(psi0) > 0.0) {
        return Err(Error::Hypothesis("H is not positive on [Ψ₀, ∞)"));
    }
    let q = h.q;
    let lead = h.leading();
    let cq = h.c * h.q_const;
    let s0 = libm::pow(psi0, 1.0 - q);
    let integrand = |s: f64| {
        let tail = if s > 0.0 {
            libm::pow(s, q / (q - 1.0))
        } else {
            0.0
        };
        1.0 / (lead - h.rate * s - cq * tail)
    };
    let r = quad::integrate(integrand, 0.0, s0, T0_TOL, 1e-13, 4000)?;
    Ok(r.value / (q - 1.0))
}

/// Threshold `(δΛ₁ / c̄)^{1/(p-1)}` of the `p = q` corollary.
pub fn corollary_threshold(rate: f64, cbar: f64, p: f64) -> f64 {
    libm::pow(rate / cbar, 1.0 / (p - 1.0))
}

/// `T̄ = -ln(1 - δΛ₁ / (c̄ Ψ₀^{p-1})) / ((p-1) δΛ₁)`.
pub fn upper_bound_tbar(rate: f64, cbar: f64, p: f64, psi0: f64) -> Result<f64> {
    if !(p > 1.0) {
        return Err(Error::Hypothesis("p must exceed 1"));
    }
    if !(psi0 > corollary_threshold(rate, cbar, p)) {
        return Err(Error::Hypothesis(
            "Ψ₀ does not exceed the corollary threshold",
        ));
    }
    let x = rate / (cbar * libm::pow(psi0, p - 1.0));
    Ok(-libm::log1p(-x) / ((p - 1.0) * rate))
}

/// `ℋ(t) = e^{(p-1)δΛ₁ t} (Ψ₀^{1-p} - c̄/(δΛ₁)) + c̄/(δΛ₁)`, which bounds
/// `Ψ^{1-p}` from above; its zero is `T̄`.
pub fn corollary_majorant(rate: f64, cbar: f64, p: f64, psi0: f64, t: f64) -> f64 {
    let ratio = cbar / rate;
    libm::exp((p - 1.0) * rate * t) * (libm::pow(psi0, 1.0 - p) - ratio) + ratio
}

/// Exact zero of [`corollary_majorant`].
pub fn corollary_majorant_zero(rate: f64, cbar: f64, p: f64, psi0: f64) -> Option<f64> {
    let ratio = cbar / rate;
    let gap = libm::pow(psi0, 1.0 - p) - ratio;
    (gap < 0.0).then(|| libm::log(ratio / -gap) / ((p - 1.0) * rate))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct UpperFlags {
    pub h_positive_at_psi0: bool,
    pub h_positive_on_ray: bool,
    pub corollary_condition: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub constants: EnvelopeConstants,
    pub t_lower: Option<f64>,
    pub t_tilde: Option<f64>,
    pub t0_upper: Option<f64>,
    pub tbar_upper: Option<f64>,
    /// Stationary point of `H` and its largest zero.
    pub eta_m: Option<f64>,
    pub h_root: Option<f64>,
    pub corollary_threshold: Option<f64>,
    pub flags: UpperFlags,
    /// Whether the upper-bound theorem applies to the geometry/coefficients.
    pub upper_applicable: bool,
    pub diagnostics: Vec<String>,
}

fn lower_for(inputs: &BoundInputs, split: EpsilonSplit) -> f64 {
    let k = envelope_constants(inputs, split);
    lower_bound_t(k.lead, k.b, inputs.p, inputs.phi0).unwrap_or(0.0)
}

/// Golden-section search on `θ` maximizing the lower bound.
pub fn optimize_theta(inputs: &BoundInputs) -> EpsilonSplit {
    if inputs.coefficients.h_vanishes() {
        return EpsilonSplit::equal();
    }
    let golden = 0.5 * (libm::sqrt(5.0) - 1.0);
    let (mut lo, mut hi) = (1e-4, 1.0 - 1e-4);
    let eval = |t: f64| lower_for(inputs, EpsilonSplit { theta: t });
    let mut x1 = hi - golden * (hi - lo);
    let mut x2 = lo + golden * (hi - lo);
    let (mut f1, mut f2) = (eval(x1), eval(x2));
    for _ in 0..120 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + golden * (hi - lo);
            f2 = eval(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - golden * (hi - lo);
            f1 = eval(x1);
        }
    }
    let best = 0.5 * (lo + hi);
    // never do worse than the equal split
    if eval(best) >= eval(0.5) {
        EpsilonSplit { theta: best }
    } else {
        EpsilonSplit::equal()
    }
}

pub fn select_epsilons(inputs: &BoundInputs, mode: EpsilonMode) -> EpsilonSplit {
    match mode {
        EpsilonMode::EqualSplit => EpsilonSplit::equal(),
        EpsilonMode::Optimized => optimize_theta(inputs),
    }
}

/// Every constant and bound for one scenario.
pub fn compute_bounds(inputs: &BoundInputs, mode: EpsilonMode) -> Result<BoundReport> {
    inputs.validate()?;
    let split = select_epsilons(inputs, mode);
    let constants = envelope_constants(inputs, split);
    let mut diagnostics = Vec::new();
    let (p, q) = (inputs.p, inputs.q);

    let (t_lower, t_tilde) = if inputs.phi0 > 0.0 {
        (
            Some(lower_bound_t(constants.lead, constants.b, p, inputs.phi0)?),
            Some(lower_bound_t_tilde(
                constants.lead,
                constants.b,
                p,
                inputs.phi0,
            )?),
        )
    } else {
        diagnostics.push(String::from("Φ₀ = 0: lower bounds are not defined"));
        (None, None)
    };

    let mut flags = UpperFlags::default();
    let mut t0_upper = None;
    let mut tbar_upper = None;
    let mut eta_m = None;
    let mut h_root = None;
    let mut threshold = None;
    let mut upper_applicable = true;
    if !inputs.is_ball {
        upper_applicable = false;
        diagnostics.push(String::from("upper bounds require Ω to be a ball"));
    }
    if !inputs.coefficients.h_vanishes() {
        upper_applicable = false;
        diagnostics.push(String::from("upper bounds require h₁ = h₂ = 0"));
    }
    if !(constants.c > 0.0) {
        upper_applicable = false;
        diagnostics.push(String::from("upper bounds require inf kᵢ > 0"));
    }
    if upper_applicable {
        let h = HFunction::from_constants(&constants, q);
        eta_m = Some(h.stationary_point());
        h_root = Some(h.upper_root());
        flags.h_positive_at_psi0 = h.eval(inputs.psi0) > 0.0;
        flags.h_positive_on_ray = inputs.psi0 > 0.0 && h.min_on_ray(inputs.psi0) > 0.0;
        if flags.h_positive_on_ray {
            t0_upper = Some(upper_bound_t0(&h, inputs.psi0)?);
        } else if flags.h_positive_at_psi0 {
            diagnostics.push(String::from(
                "H(Ψ₀) > 0 but H is not positive on [Ψ₀, ∞): T₀ withheld",
            ));
        } else {
            diagnostics.push(String::from(
                "H(Ψ₀) <= 0: data too small for the upper bound",
            ));
        }
        if p == q {
            let rate = constants.lambda1 * constants.delta;
            let th = corollary_threshold(rate, constants.cbar, p);
            threshold = Some(th);
            flags.corollary_condition = inputs.psi0 > th;
            if flags.corollary_condition {
                tbar_upper = Some(upper_bound_tbar(rate, constants.cbar, p, inputs.psi0)?);
            }
        }
    }
    Ok(BoundReport {
        constants,
        t_lower,
        t_tilde,
        t0_upper,
        tbar_upper,
        eta_m,
        h_root,
        corollary_threshold: threshold,
        flags,
        upper_applicable,
        diagnostics,
    })
}
