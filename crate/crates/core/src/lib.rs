//! Completely positive dynamical maps for the single-fermion reduced state of
//! `N` indistinguishable fermions.
//!
//! The crate builds antisymmetric Fock sectors and ladder operators as dense
//! matrices ([`fock`]), takes fermionic partial traces ([`reduce`]),
//! constructs restricted-domain Kraus maps ([`maps`]), checks them through
//! their dynamical (Choi) matrices ([`choi`]), reproduces two worked
//! Hamiltonians ([`models`]) and compares everything against brute-force
//! global evolution ([`verify`]). JSON encodings live in [`io`].

pub mod choi;
pub mod error;
pub mod fock;
pub mod io;
pub mod linalg;
pub mod maps;
pub mod models;
pub mod reduce;
pub mod verify;

pub use error::{Error, Result};
pub use fock::{DensityMatrix, FermionOperator, FockBasis};
pub use linalg::CMatrix;

/// Numerical tolerances used throughout the crate.
pub mod tol {
    /// Hermiticity, trace and algebraic identities.
    pub const STRUCTURAL: f64 = 1e-12;
    /// Unitarity of inputs and derived operators.
    pub const UNITARITY: f64 = 1e-10;
    /// Lower bound on eigenvalues of positive operators.
    pub const POSITIVITY: f64 = 1e-10;
    /// Agreement between a reduced map and the global oracle (trace norm).
    pub const ORACLE: f64 = 1e-10;
    /// Probability distributions must sum to one within this.
    pub const PROBABILITY: f64 = 1e-12;
    /// Slack allowed on the right-hand side of norm-bound inequalities.
    pub const BOUND_SLACK: f64 = 1e-9;
    /// Choi-level agreement between two Kraus representations.
    pub const CHOI_MATCH: f64 = 1e-9;
    /// Analytic versus numerical spectra.
    pub const SPECTRUM: f64 = 1e-9;
    /// Threshold above which an out-of-domain disagreement counts as real.
    pub const OUT_OF_DOMAIN: f64 = 1e-6;
}
