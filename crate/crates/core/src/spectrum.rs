//! First clamped-plate eigenpair and embedding constants `||w||_r <= S ||Δw||_2`.

use alloc::vec;
use alloc::vec::Vec;

use crate::banded::{BandCholesky, SymBanded};
use crate::domain::{lr_norm, DiscreteOperator, Discretization, Field, Grid, OperatorKind};
use crate::error::{Error, Result};

/// Default tolerance on the relative Rayleigh-quotient increment.
pub const EIGEN_TOL: f64 = 1e-10;
/// Multiplier applied to the converged variational ratio.
pub const SOBOLEV_SAFETY: f64 = 1.05;

const MAX_INVERSE_ITERATIONS: usize = 500;
const MAX_ASCENT_ITERATIONS: usize = 5000;
const ASCENT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub lambda1: f64,
    /// Interior values of `φ₁`, normalized to `||φ₁||_2 = 1`.
    pub phi1: Vec<f64>,
    /// `||Δ²φ₁ - Λ₁ φ₁||_2`.
    pub residual: f64,
    pub iterations: usize,
}

impl EigenPair {
    pub fn field(&self, grid: &Grid) -> Result<Field> {
        grid.field_from_interior(&self.phi1)
    }

    /// `∫ φ₁`.
    pub fn mass(&self, weights: &[f64]) -> f64 {
        weights.iter().zip(&self.phi1).map(|(w, p)| w * p).sum()
    }
}

fn weighted_norm(w: &[f64], x: &[f64]) -> f64 {
    libm::sqrt(w.iter().zip(x).map(|(w, v)| w * v * v).sum())
}

fn shifted(k: &SymBanded, mass: &[f64], shift: f64) -> Result<BandCholesky> {
    if shift == 0.0 {
        return k.cholesky();
    }
    let mut a = k.clone();
    a.add_diagonal(mass, -shift);
    a.cholesky()
}

/// Shifted inverse power iteration for the smallest eigenpair of
/// `K φ = Λ W φ`.
pub fn first_eigenpair(op: &DiscreteOperator, tol: f64) -> Result<EigenPair> {
    if op.kind() != OperatorKind::Bilaplacian {
        return Err(Error::InvalidArgument("eigenpair requires the bilaplacian"));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive"));
    }
    let k = op.weighted_matrix();
    let w = op.mass();
    let n = op.dim();
    let mut shift = 0.0;
    let mut fact = shifted(k, w, shift)?;
    let mut x = vec![1.0; n];
    let nx = weighted_norm(w, &x);
    x.iter_mut().for_each(|v| *v /= nx);
    let mut lambda_prev = f64::INFINITY;
    let mut residual_prev = f64::INFINITY;
    for it in 1..=MAX_INVERSE_ITERATIONS {
        let mut y: Vec<f64> = x.iter().zip(w).map(|(v, m)| v * m).collect();
        fact.solve_in_place(&mut y);
        let ny = weighted_norm(w, &y);
        if !(ny > 0.0) || !ny.is_finite() {
            return Err(Error::NonFinite);
        }
        y.iter_mut().for_each(|v| *v /= ny);
        let mean: f64 = y.iter().zip(w).map(|(v, m)| v * m).sum();
        if mean < 0.0 {
            y.iter_mut().for_each(|v| *v = -*v);
        }
        let ky = k.apply(&y);
        let lambda: f64 = ky.iter().zip(&y).map(|(a, b)| a * b).sum();
        let r: Vec<f64> = ky
            .iter()
            .zip(w)
            .zip(&y)
            .map(|((kv, m), v)| kv / m - lambda * v)
            .collect();
        let residual = weighted_norm(w, &r);
        let settled = (lambda - lambda_prev).abs() <= tol * lambda;
        // the residual cannot fall below rounding of an O(h^-4) operator,
        // so stagnation also ends the iteration
        let resid_ok = residual <= 1e-6 * lambda || residual > 0.9 * residual_prev;
        if settled && resid_ok {
            return Ok(EigenPair {
                lambda1: lambda,
                phi1: y,
                residual,
                iterations: it,
            });
        }
        if it == 3 && shift == 0.0 {
            // the Rayleigh quotient is an upper estimate; stay safely below
            if let Ok(f) = shifted(k, w, 0.9 * lambda) {
                fact = f;
                shift = 0.9 * lambda;
            }
        }
        lambda_prev = lambda;
        residual_prev = residual;
        x = y;
    }
    Err(Error::NoConvergence {
        iterations: MAX_INVERSE_ITERATIONS,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositivityReport {
    pub min_value: f64,
    pub pass: bool,
    /// Balls are the only domains where a failure is a hard failure.
    pub informational: bool,
}

pub fn verify_positivity(e: &EigenPair, grid: &Grid) -> PositivityReport {
    let min_value = e.phi1.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    PositivityReport {
        min_value,
        pass: min_value > 0.0,
        informational: !grid.descriptor().is_ball(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingRange {
    Admissible,
    /// `N = 4`: every finite exponent is accepted but the case is not covered
    /// by the embedding lemma as stated.
    OutsideLemma,
    Inadmissible,
}

/// Admissible exponents for `W_0^{2,2} ⊂ L^r` in dimension `N`.
pub fn embedding_range(dimension: usize, r: f64) -> EmbeddingRange {
    if !(r >= 2.0) || !r.is_finite() {
        return EmbeddingRange::Inadmissible;
    }
    match dimension {
        0..=3 => EmbeddingRange::Admissible,
        4 => EmbeddingRange::OutsideLemma,
        n => {
            let nf = n as f64;
            if r < 2.0 * nf / (nf - 4.0) {
                EmbeddingRange::Admissible
            } else {
                EmbeddingRange::Inadmissible
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SobolevMethod {
    RayleighExact,
    VariationalAscent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SobolevEstimate {
    pub r: f64,
    /// Upper-envelope constant `S`.
    pub s: f64,
    /// Best ratio `||w||_r / ||Δw||_2` reached by the ascent.
    pub ratio: f64,
    pub method: SobolevMethod,
    pub iterations: usize,
    pub converged: bool,
    pub range: EmbeddingRange,
}

impl SobolevEstimate {
    /// Raises `S` so that it dominates `SOBOLEV_SAFETY * ratio` for an
    /// observed probe ratio; never lowers it.
    pub fn absorb_ratio(&mut self, ratio: f64) {
        if ratio > self.ratio {
            self.ratio = ratio;
        }
        let candidate = SOBOLEV_SAFETY * ratio;
        if candidate > self.s {
            self.s = candidate;
        }
    }
}

/// `||w||_r / ||Δ_h w||_2` for an interior vector.
pub fn embedding_ratio(disc: &Discretization, w: &[f64], r: f64) -> Result<f64> {
    let energy = disc.laplacian_energy(w);
    if !(energy > 0.0) {
        return Err(Error::InvalidArgument("probe has zero bilaplacian energy"));
    }
    Ok(lr_norm(disc.mass(), w, r)? / libm::sqrt(energy))
}

/// Embedding constant `S(r, Ω)` for the discrete clamped space.
///
/// At `r = 2` the constant is `Λ₁^{-1/2}`. Above that the normalized ascent
/// `w ← K^{-1} W |w|^{r-2} w`, `||Δw||_2 = 1` is run from `φ₁`; every step
/// increases `||w||_r` by convexity.
pub fn sobolev_constant(disc: &Discretization, eig: &EigenPair, r: f64) -> Result<SobolevEstimate> {
    let range = embedding_range(disc.grid.descriptor().dimension, r);
    if range == EmbeddingRange::Inadmissible {
        return Err(Error::Hypothesis(
            "exponent outside the admissible embedding range",
        ));
    }
    if r == 2.0 {
        let s = 1.0 / libm::sqrt(eig.lambda1);
        return Ok(SobolevEstimate {
            r,
            s,
            ratio: s,
            method: SobolevMethod::RayleighExact,
            iterations: 0,
            converged: true,
            range,
        });
    }
    let k = disc.bilaplacian.weighted_matrix();
    let w = disc.mass();
    let fact = k.cholesky()?;
    let scale = 1.0 / libm::sqrt(disc.laplacian_energy(&eig.phi1));
    let mut x: Vec<f64> = eig.phi1.iter().map(|v| v * scale).collect();
    let mut ratio = lr_norm(w, &x, r)?;
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=MAX_ASCENT_ITERATIONS {
        iterations = it;
        let mut z: Vec<f64> = x
            .iter()
            .zip(w)
            .map(|(&v, m)| m * libm::pow(v.abs(), r - 2.0) * v)
            .collect();
        fact.solve_in_place(&mut z);
        let e = disc.laplacian_energy(&z);
        if !(e > 0.0) || !e.is_finite() {
            return Err(Error::NonFinite);
        }
        let inv = 1.0 / libm::sqrt(e);
        z.iter_mut().for_each(|v| *v *= inv);
        let next = lr_norm(w, &z, r)?;
        let increment = next - ratio;
        if next >= ratio {
            x = z;
            ratio = next;
        }
        // the ascent is monotone in exact arithmetic; a decrease is rounding
        if increment <= ASCENT_TOL * ratio {
            converged = true;
            break;
        }
    }
    Ok(SobolevEstimate {
        r,
        s: SOBOLEV_SAFETY * ratio,
        ratio,
        method: SobolevMethod::VariationalAscent,
        iterations,
        converged,
        range,
    })
}
