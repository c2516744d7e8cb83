//! Fluctuation theorems for quantum channels.
//!
//! The crate computes statistics of measure-evolve-measure protocols over
//! completely positive trace-preserving maps: generalized work
//! distributions, efficacies, moment generating functions and entropy
//! decompositions, with and without feedback. It also ships a time-dependent
//! Markovian master-equation solver for transverse-field Ising annealers
//! coupled to an Ohmic bath, and tooling to fit the bath coupling to
//! measured final-state statistics.

pub mod error;
pub mod linalg;
pub mod tolerance;

pub use error::{Error, Result};
pub use linalg::{DensityMatrix, Hermitian, Operator, Spectrum, C64};

pub mod channels;
pub mod measurements;
pub mod random;
pub mod fluctuation;
pub mod feedback;
pub mod ame;
pub mod experiment;
pub mod selftest;
pub mod scenario;

pub use channels::{Channel, CpMap, DualMap, LinearMap, SuperOperator};
pub use measurements::{Measurement, PreparedEnsemble};
