//! Prototype-parts neural classifier for tabular medical records.
//!
//! Continuous features are discretized by a learnable binning layer (soft
//! Gaussian assignment while training, nearest-center intervals afterwards),
//! categorical features are one-hot encoded, and trainable patching masks cut
//! the encoded vector into parts. Each part is embedded by a shared shallow
//! network and compared to a set of prototypes; the per-prototype minimum
//! distances feed a linear head. After training, prototypes are replaced by
//! embeddings of real training parts so every prediction can be explained as
//! similarity to concrete feature conjunctions.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the command line
//! and report writing live in the `medic` crate.

#![no_std]

extern crate alloc;

pub mod binning;
pub mod data;
pub mod error;
pub mod eval;
pub mod explain;
pub mod linalg;
pub mod math;
pub mod network;
pub mod training;

pub use binning::{BinMode, BinningParams, EncodedInstance, Interval, Layout};
pub use data::{Dataset, FeatureSchema, FoldSplit, Role, SchemaSpec, Value};
pub use error::{Error, Result, Warning};
pub use eval::{ConfusionMatrix, CvReport, SearchSpace};
pub use explain::{Condition, InstanceExplanation, PrototypeExplanation};
pub use network::{ForwardTrace, Model, Stage};
pub use training::{LossBreakdown, TrainConfig};
