//! Thermodynamic formalism on shifts of finite type.
//!
//! The crate provides, on top of mixing SFTs with exact orbit gluing:
//!
//! * Bowen orbit metrics, Birkhoff sums, empirical measures, and greedy
//!   separated/spanning machinery ([`orbit`]);
//! * classical pressure (spectral oracle and separated-set estimator),
//!   dimension-type pressure of arbitrary word sets via weighted ball
//!   covers, distribution-principle certification, and a weighted
//!   spanning-set entropy estimator ([`pressure`]);
//! * exact extrema of Birkhoff averages over invariant measures through
//!   mean-cycle optimization, with irregularity and coboundary tests
//!   ([`ergopt`]);
//! * the orbit-gluing construction of points with divergent averages,
//!   with exact ball masses and a certified pressure lower bound
//!   ([`irregular`]);
//! * suspension-flow entropy through roof functions: the pressure-root
//!   equation, ratio Birkhoff extrema, and flow irregularity tests
//!   ([`suspension`]).

pub mod config;
pub mod ergopt;
pub mod error;
pub mod irregular;
mod lift;
pub mod orbit;
pub mod pressure;
pub mod suspension;
pub mod systems;

pub use error::{Error, Result};
pub use systems::{Symbol, SymbolicSystem, Word};
