//! Pharmacokinetic-parameter QSAR pipeline: dataset handling, circular
//! fingerprints, diversity-aware 60:20:20 splitting, dense multitask
//! networks with masked weighted losses, feature-layer transfer, consensus
//! prediction, and the evaluation metrics.
//!
//! Numeric code is generic over [`scalar::Real`] (`f32` or `f64`); the
//! aliases below pin the two concrete instantiations.

pub mod data;
pub mod eval;
pub mod fingerprint;
pub mod nn;
pub mod scalar;
pub mod smiles;
pub mod split;
pub mod transfer;

pub use scalar::Real;

pub type Dataset32 = data::Dataset<f32>;
pub type Dataset64 = data::Dataset<f64>;
pub type NetworkModel32 = nn::NetworkModel<f32>;
pub type NetworkModel64 = nn::NetworkModel<f64>;
pub type Checkpoint32 = transfer::Checkpoint<f32>;
pub type Checkpoint64 = transfer::Checkpoint<f64>;
pub type ConsensusModel32 = transfer::ConsensusModel<f32>;
pub type ConsensusModel64 = transfer::ConsensusModel<f64>;
pub type EvalReport32 = eval::EvalReport<f32>;
pub type EvalReport64 = eval::EvalReport<f64>;
