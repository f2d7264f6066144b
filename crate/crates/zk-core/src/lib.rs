//! Numerical laboratory for the Zakharov-Kuznetsov equation on the cylinder
//! `R x T` (one unbounded and one periodic space direction).
//!
//! The crate discretizes the cylinder by periodizing the unbounded direction
//! to a long torus, and provides:
//!
//! * [`spectrum`]: grids, spectral fields, transforms and the linear flow;
//! * [`norms`]: Sobolev and restriction-type space-time norms with
//!   low-frequency weights;
//! * [`resonance`]: the geometry of zero-sum frequency triples: the
//!   resonance function, its anisotropic gradients, dyadic classification,
//!   triangle-resonance detection and box coverings;
//! * [`measure`]: quadrature and Monte-Carlo verification of level-set and
//!   interaction-set measure bounds;
//! * [`counterexamples`]: the concentrated wave pairs that break the
//!   bilinear product estimate, and their growth-exponent measurement;
//! * [`randomize`]: unit-scale frequency projections, Gaussian
//!   randomization of initial data and first-iterate smoothing experiments;
//! * [`solver`]: local-in-time solution of the flow by Picard iteration on
//!   the Duhamel formula, plus an independent time stepper used as an oracle;
//! * [`io`]: binary field/trajectory dumps and CSV table helpers.

pub mod counterexamples;
pub mod io;
pub mod measure;
pub mod norms;
pub mod quad;
pub mod randomize;
pub mod resonance;
pub mod rng;
pub mod solver;
pub mod spectrum;

pub use spectrum::{FrequencyGrid, SpaceTimeField, SpectralField};
