//! Simulation laboratory for remote state preparation with verifiability.

pub mod functionalities;
pub mod protocol;
pub mod qsim;
pub mod amplification;
pub mod chain;
pub mod qubit_test;
pub mod adversaries;
pub mod hamiltonian;
pub mod stats;
pub mod cli;
