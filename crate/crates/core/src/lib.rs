//! Exact non-Markovian dynamics of linearly coupled modes in a Bose or Fermi
//! bath: Green-function Volterra solver, time-local master-equation
//! coefficients, Lindblad evolution, a dispersive-probe experiment and an
//! exact-diagonalization oracle.

pub mod coefficients;
pub mod error;
pub mod kernel;
pub mod linalg;
pub mod lindblad;
pub mod markov;
pub mod model;
pub mod oracle;
pub mod probe;
pub mod propagator;
pub mod volterra;

pub use error::{Error, Result};
pub use linalg::{CMat, MatSeq, C64};
pub use model::{BathSpec, Statistics, TimeGrid, UniverseModel};
