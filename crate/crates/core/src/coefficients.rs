//! Time-dependent coefficients `δᵢ(t)`, `hᵢ(t)`, `kᵢ(t)`.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// A coefficient as a function of time: constant or piecewise linear with
/// flat extrapolation outside the table.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Constant(f64),
    Table(Vec<(f64, f64)>),
}

impl Profile {
    pub fn table(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("coefficient table is empty"));
        }
        if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::InvalidArgument(
                "coefficient table times must increase",
            ));
        }
        if points
            .iter()
            .any(|&(t, v)| !t.is_finite() || !v.is_finite())
        {
            return Err(Error::InvalidArgument(
                "coefficient table entries must be finite",
            ));
        }
        Ok(Profile::Table(points))
    }

    pub fn at(&self, t: f64) -> f64 {
        match self {
            Profile::Constant(v) => *v,
            Profile::Table(pts) => {
                let first = pts[0];
                let last = pts[pts.len() - 1];
                if t <= first.0 {
                    return first.1;
                }
                if t >= last.0 {
                    return last.1;
                }
                let idx = pts.partition_point(|&(ti, _)| ti <= t);
                let (t0, v0) = pts[idx - 1];
                let (t1, v1) = pts[idx];
                v0 + (v1 - v0) * (t - t0) / (t1 - t0)
            }
        }
    }

    pub fn is_identically_zero(&self) -> bool {
        match self {
            Profile::Constant(v) => *v == 0.0,
            Profile::Table(pts) => pts.iter().all(|&(_, v)| v == 0.0),
        }
    }

    fn knots(&self) -> impl Iterator<Item = f64> + '_ {
        let pts: &[(f64, f64)] = match self {
            Profile::Constant(_) => &[],
            Profile::Table(p) => p,
        };
        pts.iter().map(|&(t, _)| t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    pub delta: [Profile; 2],
    pub h: [Profile; 2],
    pub k: [Profile; 2],
}

impl Coefficients {
    pub fn constant(delta: f64, h: f64, k: f64) -> Self {
        Self {
            delta: [Profile::Constant(delta), Profile::Constant(delta)],
            h: [Profile::Constant(h), Profile::Constant(h)],
            k: [Profile::Constant(k), Profile::Constant(k)],
        }
    }

    /// Times at which envelope suprema and infima are evaluated: the ends
    /// of `[0, horizon]` and every table knot inside it. Every quantity the
    /// bounds need is linear or a convex quadratic-over-linear expression
    /// on each segment, so these points attain the required extremes.
    pub fn sample_times(&self, horizon: f64) -> Vec<f64> {
        let mut ts: Vec<f64> = Vec::new();
        ts.push(0.0);
        ts.push(horizon.max(0.0));
        for p in self.delta.iter().chain(&self.h).chain(&self.k) {
            ts.extend(p.knots().filter(|&t| t > 0.0 && t < horizon));
        }
        ts.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
        ts.dedup();
        ts
    }

    pub fn sup_over(&self, horizon: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.sample_times(horizon)
            .into_iter()
            .map(f)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn inf_over(&self, horizon: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.sample_times(horizon)
            .into_iter()
            .map(f)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn h_vanishes(&self) -> bool {
        self.h.iter().all(Profile::is_identically_zero)
    }

    pub fn has_source(&self) -> bool {
        !self.k.iter().all(Profile::is_identically_zero)
    }

    /// `δᵢ > 0`, `hᵢ >= 0`, `kᵢ >= 0` on the horizon.
    pub fn validate(&self, horizon: f64) -> Result<()> {
        for i in 0..2 {
            if self.inf_over(horizon, |t| self.delta[i].at(t)) <= 0.0 {
                return Err(Error::Hypothesis("delta coefficients must be positive"));
            }
            if self.inf_over(horizon, |t| self.h[i].at(t)) < 0.0 {
                return Err(Error::Hypothesis("h coefficients must be nonnegative"));
            }
            if self.inf_over(horizon, |t| self.k[i].at(t)) < 0.0 {
                return Err(Error::Hypothesis("k coefficients must be nonnegative"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn table_interpolates_and_clamps() {
        let p = Profile::table(vec![(0.0, 1.0), (1.0, 3.0)]).unwrap();
        assert_eq!(p.at(-1.0), 1.0);
        assert_eq!(p.at(0.5), 2.0);
        assert_eq!(p.at(5.0), 3.0);
        assert!(Profile::table(vec![(1.0, 1.0), (0.5, 1.0)]).is_err());
    }

    #[test]
    fn envelopes_use_knots_inside_horizon() {
        let mut c = Coefficients::constant(1.0, 0.0, 1.0);
        c.k[0] = Profile::table(vec![(0.0, 1.0), (0.5, 4.0), (2.0, 0.5)]).unwrap();
        assert_eq!(c.sup_over(1.0, |t| c.k[0].at(t)), 4.0);
        assert_eq!(c.sup_over(0.25, |t| c.k[0].at(t)), 2.5);
        assert!((c.inf_over(2.0, |t| c.k[0].at(t)) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn negative_delta_is_rejected() {
        let mut c = Coefficients::constant(1.0, 0.0, 1.0);
        c.delta[0] = Profile::Constant(-1.0);
        assert!(c.validate(1.0).is_err());
    }
}
