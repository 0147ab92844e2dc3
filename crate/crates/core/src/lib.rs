//! Exact symbolic-plus-numeric engine for log-polyhomogeneous asymptotic
//! expansions on the punctured unit disc, with curvature, Chern-form and
//! Poincaré-growth verification for Hermitian metric families.

pub mod error;
pub mod expansion;
pub mod harness;
pub mod log_calculus;
pub mod metrics;
pub mod orbit;
pub mod random;
pub mod selftest;
pub mod torsion;
pub mod sweep;

pub use error::{Error, Result};
pub use expansion::{int, rat, CompiledExpansion, Expansion, LogMonomial, Order, Rational, TermKey};
