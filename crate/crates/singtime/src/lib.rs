//! Numerical laboratory for singular times of stochastic Navier-Stokes
//! equations with transport noise.
//!
//! The crate is organized around four pillars:
//!
//! * [`fractal`] -- exact and estimated fractal measures and dimensions of
//!   one-dimensional point sets (Hausdorff pre-measures, Minkowski contents,
//!   box-counting fits, Vitali subcovers).
//! * [`criticality`] -- exact rational evaluation of the criticality
//!   calculus: excesses, subcriticality checks, singular-time dimension
//!   bounds and Serrin exponents.
//! * [`noise`] -- divergence-free Kraichnan / Lie transport noise families
//!   with regularity validation.
//! * [`spde`] -- pseudo-spectral solver for the Ito-form stochastic NSEs on
//!   the torus with per-step energy auditing.
//! * [`experiments`] -- Monte Carlo lifetime tails, singular-time proxies
//!   and the bridges between solver output and the estimators above.

pub mod criticality;
pub mod experiments;
pub mod fractal;
pub mod noise;
pub mod spde;
