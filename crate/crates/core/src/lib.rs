//! Numerical laboratory for blow-up analysis of critical Lane-Emden systems.
//!
//! The crate computes every desk-scale object that governs blowing-up
//! solutions of the critical system `-Δu = v^p`, `-Δv = u^q` with small
//! linear (or slightly subcritical) perturbations on bounded domains:
//!
//! * exact exponent arithmetic on the critical hyperbola ([`hyperbola`]),
//! * the radial ground-state bubble, its decay constants and kernel
//!   elements ([`bubble`]),
//! * Dirichlet Green functions and their regular parts, closed-form on
//!   balls and walk-on-spheres estimated on dumbbells ([`green`]),
//! * the nonlinear Green function, its regular part and the Robin-type
//!   function `tau_tilde` ([`nonlinear_green`]),
//! * linear and nonlinear Dirichlet projections of bubbles ([`projections`]),
//! * reduced-energy landscapes and their critical points ([`landscape`]),
//! * full Newton continuation of radial blow-up branches ([`continuation`]).
//!
//! Monte Carlo work is split into deterministic per-stream sub-seeds so
//! every estimate is bit-reproducible for a fixed seed, independent of the
//! worker count. The `parallel` feature (on by default) runs streams on a
//! rayon pool; without it everything falls back to sequential loops with
//! identical results.

pub mod bubble;
pub mod continuation;
pub mod error;
pub mod geom;
pub mod green;
pub mod hyperbola;
pub mod landscape;
pub mod mc;
pub mod nonlinear_green;
pub mod ode;
pub mod projections;
pub mod sampling;
pub mod simplex;

pub use error::Error;
pub use geom::{Ball, DomainSpec, Point};
pub use hyperbola::{CriticalPair, RateScenario};
pub use mc::McEstimate;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
