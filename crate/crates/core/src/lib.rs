//! Bound states of the radial Klein-Gordon equation with an attractive
//! central vector potential in `d >= 1` dimensions, together with the
//! integral identity behind energy ordering for ordered potentials and the
//! parameter-derivative formula behind monotone spectra.

pub mod analysis;
pub mod cli;
pub mod continuation;
pub mod eigensolve;
pub mod potentials;
pub mod quadrature;
pub mod radial;

pub use eigensolve::{find_state, EigenResult, SolveError, SolverConfig};
pub use potentials::{Kind, PotentialError, PotentialFamily};
pub use radial::{GridLayout, GridSpec, Parity, RadialGrid, RadialProblem};
