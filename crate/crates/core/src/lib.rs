//! Covariance dynamics of linear dissipative quantum systems.
//!
//! A system of `N` coupled oscillators with trap Hessian `Ω` and dissipation
//! `Γ` has covariance `Σ` obeying `Σ̇ = HΣ + ΣHᵀ + Ξ(t)` with
//! `H = [[0, I], [−Ω, −Γ]]`. The crate propagates this equation, builds the
//! landscape `𝓛(σ) = σᵀLσ/2 + Fᵀσ` whose generalized gradient flow
//! `σ̇ = −M∇𝓛` reproduces it, predicts long-time widths from zero modes of
//! `H_σ = I⊗H + H⊗I`, and evaluates the Ohmic-bath integrals behind `Ξ`.

pub mod bath;
pub mod cli;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod landscape;
pub mod linalg;
pub mod model;
pub mod ode;
pub mod quadrature;
pub mod zeromodes;

pub use error::{Category, Error, Result};
pub use model::{BathSpec, CovarianceState, SystemSpec, Units};
