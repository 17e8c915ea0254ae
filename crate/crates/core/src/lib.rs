//! Topology and thermodynamics of potential energy landscapes.
//!
//! The crate computes critical-point catalogs of a potential `V_N`, the
//! Morse multiplicities and Euler characteristics of its sub-level sets
//! `M_v = {q : V(q) <= v}`, the Morse-chart neighborhood coefficients that
//! carry the topological contribution to `vol(M_v)`, and Monte Carlo
//! estimates of volumes, structure integrals and microcanonical
//! configurational entropies.
//!
//! Modules map onto the pipeline:
//!
//! - [`potential`]: built-in models and a small expression language with
//!   exact derivatives through dual numbers.
//! - [`morse`]: multistart Newton search, classification, catalogs.
//! - [`neckgeom`]: hypersphere constants, the quadric slice integrals and
//!   the coefficients `A`, `B`, `g_i`.
//! - [`measure`]: hit-or-miss and thin-shell estimators, the Federer
//!   integrand and pseudo-cylinder volumes.
//! - [`thermo`]: entropy curves, finite-difference derivatives and
//!   N-scaling scans.
//! - [`decompose`]: assembly and verification of the volume split
//!   `vol(M_v) = excised + topological term`.
//! - [`cli`]: the command-line front end used by the `morse-entropy` binary.

pub mod cli;
pub mod decompose;
pub mod error;
pub mod measure;
pub mod morse;
pub mod neckgeom;
pub mod potential;
pub mod quad;
pub mod rng;
pub mod thermo;

pub use error::{Error, Result};
pub use potential::{Potential, PotentialModel};
