//! Simulation of qudit-environment dynamics under pure-dephasing Hamiltonians.
//!
//! The library evolves joint system-environment states in block form (one
//! environment matrix per pair of system pointer states), evaluates the two
//! classes of separability criteria that decide whether such a state is
//! entangled, and simulates a measurement-only detection protocol in which
//! the environment is prepared through the system and entanglement shows up
//! as a preparation-dependent drift of the system's coherences.
//!
//! The `nv` module instantiates all of this for an NV-center spin qutrit
//! coupled to a bath of spin-1/2 nuclei, including a factorized evaluation
//! path whose cost is linear in the number of bath spins.
//!
//! Throughout the crate ħ = 1: energies and couplings are angular
//! frequencies in rad per time unit, and time units are the caller's choice
//! (the NV module fixes µs).

pub mod criteria;
pub mod linalg;
pub mod model;
pub mod nv;
pub mod random;
pub mod witness;

pub use linalg::{CMat, C64};
pub use model::{BlockJointState, PureDephasingModel, SystemAmplitudes};
