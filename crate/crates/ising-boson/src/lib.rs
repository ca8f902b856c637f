//! Bosonization engine for scaling-limit critical Ising correlations on
//! circular multiply connected domains.
//!
//! Squared Ising correlations of spins, disorders, energies and fermions are
//! evaluated as correlations of the compactified free field `Φ = φ + ξ`: a
//! Dirichlet Gaussian free field `φ` plus an independent discrete instanton
//! component `ξ` whose boundary values are quantized according to the
//! wired/free boundary conditions.
//!
//! Module map:
//!
//! * [`geometry`] — circular domains, boundary data, scene validation, scene files;
//! * [`harmonic`] — Green's function, its regular part and harmonic measures;
//! * [`period`] — Dirichlet pairings and the quadratic forms of the instanton weight;
//! * [`theta`] — Riemann theta functions with characteristics;
//! * [`instanton`] — the instanton ensemble and its expectations;
//! * [`boson`] — correlations of exponentials, trigonometric and derivative fields;
//! * [`ising`] — the Ising-to-boson dictionary, product rules, conformal transport;
//! * [`verify`] — independent oracles (elliptic functions, Pfaffians, torus identities).

pub mod error;
pub mod geometry;
pub mod harmonic;
pub mod period;
pub mod theta;
pub mod instanton;
pub mod boson;
pub mod ising;
pub mod verify;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Compactification radius `α = √2·π` of the bosonic field.
pub const ALPHA: f64 = std::f64::consts::SQRT_2 * std::f64::consts::PI;
