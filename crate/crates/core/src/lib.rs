//! Joint transceiver design for two-way MIMO amplify-and-forward relaying with
//! two relays, built on triangular (QL/QR) channel decompositions.

pub mod complexity;
pub mod linalg;
pub mod model;
pub mod optimizer;
pub mod rng;
pub mod simulator;
