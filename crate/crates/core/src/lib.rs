//! Statevector simulation, variational quantum classifiers and federated
//! training across capacity-limited QPU nodes.
//!
//! The crate is organized bottom-up:
//!
//! * [`qsim`] dense statevector simulator for RX, RY and CNOT.
//! * [`encode`] angle and amplitude feature embeddings.
//! * [`vqc`] the layered classifier circuit, loss, parameter-shift gradients and Adam.
//! * [`data`] dataset generation, IDX / NPY-in-ZIP ingestion, resizing and partitioning.
//! * [`netmodel`] QPU nodes, star and ring topologies, per-link message accounting.
//! * [`fedcore`] local training, star aggregation and ring weight hand-off.
//! * [`trainers`] quantum and classical (MLP) reference trainers.

pub mod data;
pub mod encode;
mod error;
pub mod fedcore;
pub mod netmodel;
pub mod qsim;
pub mod seed;
pub mod trainers;
pub mod vqc;

pub use error::{Error, Result};
