//! Scalar comparison ODEs integrated through their blow-up time.
//!
//! Each right-hand side grows like `x^γ`. Once `x` is large the integration
//! continues in `y = x^{1-γ}`, where blow-up becomes a transversal zero
//! crossing of `y`.

use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarRhs {
    /// `x' = a x^p + b x` (`a` is the full leading coefficient, e.g. `2A`).
    Majorant { a: f64, b: f64, p: f64 },
    /// `x' = -rate x + cbar x^p`.
    Minorant { rate: f64, cbar: f64, p: f64 },
    /// `x' = -rate x + a x^q - cq`, the `H` flow.
    HFlow { rate: f64, a: f64, q: f64, cq: f64 },
}

impl ScalarRhs {
    pub fn growth_exponent(&self) -> f64 {
        match *self {
            ScalarRhs::Majorant { p, .. } | ScalarRhs::Minorant { p, .. } => p,
            ScalarRhs::HFlow { q, .. } => q,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            ScalarRhs::Majorant { a, b, p } => a * libm::pow(x, p) + b * x,
            ScalarRhs::Minorant { rate, cbar, p } => -rate * x + cbar * libm::pow(x, p),
            ScalarRhs::HFlow { rate, a, q, cq } => -rate * x + a * libm::pow(x, q) - cq,
        }
    }

    /// `dy/dt` for `y = x^{1-γ}`, written in `y` so it stays finite as `y → 0`.
    pub fn eval_transformed(&self, y: f64) -> f64 {
        let g = self.growth_exponent();
        match *self {
            ScalarRhs::Majorant { a, b, .. } => (1.0 - g) * (a + b * y),
            ScalarRhs::Minorant { rate, cbar, .. } => (1.0 - g) * (cbar - rate * y),
            ScalarRhs::HFlow { rate, a, q, cq } => {
                let tail = if y > 0.0 {
                    libm::pow(y, q / (q - 1.0))
                } else {
                    0.0
                };
                (1.0 - g) * (a - rate * y - cq * tail)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stop {
    pub t_max: f64,
    /// Stop early once `x` reaches this value.
    pub x_max: Option<f64>,
}

impl Stop {
    pub fn at_time(t_max: f64) -> Self {
        Self { t_max, x_max: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeOutcome {
    /// Accepted `(t, x)` samples.
    pub trace: Vec<(f64, f64)>,
    pub blowup_time: Option<f64>,
    /// `x` reached `Stop::x_max`.
    pub reached_threshold: bool,
}

const RTOL: f64 = 1e-12;
const ATOL: f64 = 1e-300;
const MAX_STEPS: usize = 200_000;

// Dormand–Prince 5(4) tableau (autonomous, so the nodes are not needed).
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One embedded step; returns (new value, error estimate, slope at the end).
fn dp_step(f: &impl Fn(f64) -> f64, x: f64, h: f64, k1: f64) -> (f64, f64, f64) {
    let mut k = [0.0; 7];
    k[0] = k1;
    for s in 1..7 {
        let mut acc = x;
        for j in 0..s {
            acc += h * A[s][j] * k[j];
        }
        k[s] = f(acc);
    }
    let mut x5 = x;
    let mut x4 = x;
    for s in 0..7 {
        x5 += h * B5[s] * k[s];
        x4 += h * B4[s] * k[s];
    }
    (x5, (x5 - x4).abs(), k[6])
}

struct Phase<'a, F: Fn(f64) -> f64> {
    f: &'a F,
    t: f64,
    x: f64,
    slope: f64,
    h: f64,
}

enum PhaseEnd {
    TimeLimit,
    /// Interval where the monitored predicate first became true, with the
    /// Hermite data of both ends.
    Crossed {
        t0: f64,
        x0: f64,
        s0: f64,
        t1: f64,
        x1: f64,
        s1: f64,
    },
    StepLimit,
    NonFinite,
}

impl<'a, F: Fn(f64) -> f64> Phase<'a, F> {
    fn new(f: &'a F, t: f64, x: f64, h: f64) -> Self {
        let slope = f(x);
        Self { f, t, x, slope, h }
    }

    /// Advance until `t_max` or until `crossed(x)` holds, pushing samples via
    /// `record`.
    fn run(
        &mut self,
        t_max: f64,
        crossed: impl Fn(f64) -> bool,
        mut record: impl FnMut(f64, f64),
        steps: &mut usize,
    ) -> PhaseEnd {
        loop {
            if self.t >= t_max {
                return PhaseEnd::TimeLimit;
            }
            if *steps >= MAX_STEPS {
                return PhaseEnd::StepLimit;
            }
            let h = self.h.min(t_max - self.t);
            let (xn, err, sn) = dp_step(self.f, self.x, h, self.slope);
            let scale = ATOL + RTOL * self.x.abs().max(xn.abs());
            let ratio = if xn.is_finite() {
                err / scale
            } else {
                f64::INFINITY
            };
            if ratio <= 1.0 {
                *steps += 1;
                let (t0, x0, s0) = (self.t, self.x, self.slope);
                self.t += h;
                self.x = xn;
                self.slope = sn;
                if !xn.is_finite() || !sn.is_finite() {
                    return PhaseEnd::NonFinite;
                }
                record(self.t, self.x);
                let grow = if ratio == 0.0 {
                    5.0
                } else {
                    (0.9 * libm::pow(ratio, -0.2)).min(5.0)
                };
                self.h = h * grow;
                if crossed(xn) {
                    return PhaseEnd::Crossed {
                        t0,
                        x0,
                        s0,
                        t1: self.t,
                        x1: xn,
                        s1: sn,
                    };
                }
            } else {
                let shrink = if ratio.is_finite() {
                    (0.9 * libm::pow(ratio, -0.2)).max(0.1)
                } else {
                    0.1
                };
                self.h = h * shrink;
                if self.h <= f64::EPSILON * self.t.abs().max(1e-300) {
                    return PhaseEnd::StepLimit;
                }
            }
        }
    }
}

/// Time at which the cubic Hermite interpolant on `[t0, t1]` reaches `level`.
fn hermite_crossing(t0: f64, x0: f64, s0: f64, t1: f64, x1: f64, s1: f64, level: f64) -> f64 {
    let h = t1 - t0;
    let interp = |tau: f64| {
        let t2 = tau * tau;
        let t3 = t2 * tau;
        (2.0 * t3 - 3.0 * t2 + 1.0) * x0
            + (t3 - 2.0 * t2 + tau) * h * s0
            + (-2.0 * t3 + 3.0 * t2) * x1
            + (t3 - t2) * h * s1
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    let below0 = x0 < level;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (interp(mid) < level) == below0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    t0 + 0.5 * (lo + hi) * h
}

/// Integrates the scalar comparison ODE from `x0 > 0`.
pub fn integrate_scalar_ode(rhs: ScalarRhs, x0: f64, stop: Stop) -> OdeOutcome {
    let gamma = rhs.growth_exponent();
    let mut trace = Vec::new();
    trace.push((0.0, x0));
    let mut steps = 0;
    let x_switch = 10.0 * x0.max(f64::MIN_POSITIVE);
    let limit = stop.x_max.map_or(x_switch, |m| m.min(x_switch));
    let fx = |x: f64| rhs.eval(x);
    let h0 = {
        let s = rhs.eval(x0).abs();
        if s > 0.0 {
            (1e-3 * x0 / s).min(stop.t_max)
        } else {
            1e-3 * stop.t_max
        }
    };
    let mut phase = Phase::new(&fx, 0.0, x0, h0.max(f64::MIN_POSITIVE));
    let end = phase.run(
        stop.t_max,
        |x| x >= limit,
        |t, x| trace.push((t, x)),
        &mut steps,
    );
    let (t_start, x_start) = match end {
        PhaseEnd::TimeLimit | PhaseEnd::StepLimit | PhaseEnd::NonFinite => {
            return OdeOutcome {
                trace,
                blowup_time: None,
                reached_threshold: false,
            };
        }
        PhaseEnd::Crossed {
            t0,
            x0,
            s0,
            t1,
            x1,
            s1,
        } => {
            if let Some(m) = stop.x_max {
                if m <= x_switch {
                    let tc = hermite_crossing(t0, x0, s0, t1, x1, s1, m);
                    return OdeOutcome {
                        trace,
                        blowup_time: None,
                        reached_threshold: tc <= stop.t_max,
                    };
                }
            }
            (t1, x1)
        }
    };
    // Transformed phase: y decreases towards zero.
    let y_start = libm::pow(x_start, 1.0 - gamma);
    let gy = |y: f64| rhs.eval_transformed(y);
    let y_stop = stop.x_max.map_or(0.0, |m| libm::pow(m, 1.0 - gamma));
    let slope = gy(y_start).abs();
    let h1 = if slope > 0.0 {
        1e-3 * y_start / slope
    } else {
        phase.h
    };
    let mut tphase = Phase::new(&gy, t_start, y_start, h1);
    let end = tphase.run(
        stop.t_max,
        |y| y <= y_stop,
        |t, y| {
            if y > 0.0 {
                trace.push((t, libm::pow(y, 1.0 / (1.0 - gamma))));
            }
        },
        &mut steps,
    );
    match end {
        PhaseEnd::Crossed {
            t0,
            x0,
            s0,
            t1,
            x1,
            s1,
        } => {
            let tc = hermite_crossing(t0, x0, s0, t1, x1, s1, y_stop);
            if stop.x_max.is_some() {
                OdeOutcome {
                    trace,
                    blowup_time: None,
                    reached_threshold: true,
                }
            } else {
                OdeOutcome {
                    trace,
                    blowup_time: Some(tc),
                    reached_threshold: false,
                }
            }
        }
        _ => OdeOutcome {
            trace,
            blowup_time: None,
            reached_threshold: false,
        },
    }
}

/// Closed-form solution of the majorant `x' = a x^p + b x` at time `t`, or
/// `None` past its blow-up time.
pub fn majorant_value(a: f64, b: f64, p: f64, x0: f64, t: f64) -> Option<f64> {
    let y0 = libm::pow(x0, 1.0 - p);
    let y = if b == 0.0 {
        y0 - (p - 1.0) * a * t
    } else {
        (y0 + a / b) * libm::exp(-(p - 1.0) * b * t) - a / b
    };
    (y > 0.0).then(|| libm::pow(y, 1.0 / (1.0 - p)))
}
