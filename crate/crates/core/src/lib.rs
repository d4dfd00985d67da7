//! Numerical core for coupled fourth-order parabolic systems
//!
//! `u_t + δ₁Δ²u - h₁Δu = k₁ v^p`, `v_t + δ₂Δ²v - h₂Δv = k₂ u^q`
//!
//! with clamped boundary conditions: discretization, clamped-plate spectrum
//! and embedding constants, time stepping, and the lower/upper bounds for
//! the blow-up time.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod banded;
pub mod bounds;
pub mod coefficients;
pub mod domain;
pub mod error;
pub mod evolution;
pub mod ode;
pub mod quad;
pub mod spectrum;

pub use coefficients::{Coefficients, Profile};
pub use domain::{Discretization, DomainDescriptor, Field, Grid, Quadrature, Shape};
pub use error::{Error, Result};
pub use spectrum::EigenPair;
