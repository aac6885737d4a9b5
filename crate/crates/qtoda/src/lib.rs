//! Exact computer algebra for a (q,t)-deformed 2d Toda hierarchy.
//!
//! Everything is computed over the exact coefficient ring Q(Q,T) (with
//! q = Q^4, t = T^4) tensored with Laurent monomials in formal weight
//! symbols, at finite series truncation. No floating point anywhere.
//!
//! Module map:
//! - [`ring`]: coefficient arithmetic (rational functions, weight monomials)
//! - [`partition`]: partition combinatorics, Nekrasov factors, Macdonald norms
//! - [`series`]: truncated time series, Laurent windows, residues, shifts
//! - [`fock`]: degree-truncated bosonic Fock states and pairings
//! - [`vertexop`]: normal-ordered vertex operators and their OPEs
//! - [`toroidal`]: quantum toroidal gl(1) representations and intertwiners
//! - [`qvirasoro`]: deformed Virasoro sector, screening charges
//! - [`tau`]: tau-function engines
//! - [`identities`]: the executable identity-verification suite

pub mod ring;
pub mod partition;
pub mod series;
pub mod fock;
pub mod vertexop;
pub mod toroidal;
pub mod qvirasoro;
pub mod tau;
pub mod identities;

use thiserror::Error;

/// Errors shared by all modules.
#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("division by zero")]
    DivisionByZero,
    #[error("division requires a single-term invertible divisor")]
    NonMonomialDivisor,
    #[error("pole at argument: {0}")]
    PoleAtArgument(String),
    #[error("coefficient requested outside the exactness window: {0}")]
    WindowOverflow(String),
    #[error("exp requires zero constant term")]
    NonzeroConstantTerm,
    #[error("operation exceeds the truncation degree: {0}")]
    TruncationExceeded(String),
    #[error("weight labels do not match: {0}")]
    WeightMismatch(String),
    #[error("weight ratio violates the screening charge restriction: {0}")]
    ChargeRestriction(String),
    #[error("degenerate norm: {0}")]
    DegenerateNorm(String),
    #[error("degenerate eigenvalue: {0}")]
    DegenerateEigenvalue(String),
    #[error("operator contraction is not resummable in closed form: {0}")]
    NonResummableContraction(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, Error>;
