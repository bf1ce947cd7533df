//! Finite-rank spectral vessel engine.
//!
//! From a finite spectral measure (a list of energy nodes with positive
//! weights) this crate builds the operator family of a vessel — the row
//! functions `B(x)`, the Gram matrix `X(x)`, the tau function
//! `tau(x) = det X(x)`, the linkage matrix `gamma_star(x)`, and the transfer
//! function `S(lambda, x)` — and derives from them:
//!
//! * the Sturm-Liouville potential `q(x) = -2 (ln tau)''` ([`sl`]),
//! * its KdV time evolution `q(x, t)` with closed-form time integrals ([`kdv`]),
//! * NLS and canonical-system parameter packs ([`nls`]),
//! * an independent Gelfand-Levitan integral-equation pipeline ([`gl`]) used
//!   as a cross-validation oracle for every potential.
//!
//! All operations are pure: vessels are immutable after construction and each
//! evaluation point assembles and factors its own Gram matrix, so grids may be
//! evaluated concurrently.

pub mod error;
pub mod fd;
pub mod gl;
pub mod kdv;
pub mod measure;
pub mod nls;
pub mod quad;
pub mod sample;
pub mod sl;
pub mod vessel;

pub use error::{Result, VesselError};
pub use measure::{sqrt_node, SpectralMeasure};
pub use vessel::{FiniteVessel, VesselParams};
