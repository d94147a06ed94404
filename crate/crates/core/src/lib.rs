//! XCrossNet click-through-rate model: explicit feature crossing for dense
//! and sparse fields, trained with Adam on a Logloss objective.
//!
//! The forward and backward passes are hand-written; [`oracle`] holds the
//! slow reference implementations they are tested against.

pub mod data;
pub mod error;
pub mod gradcheck;
pub mod layers;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod oracle;
pub mod params;

#[cfg(test)]
mod testutil;

pub use data::{Dataset, Instance};
pub use error::{Result, XcnError};
pub use metrics::{auc, evaluate, EvalReport};
pub use model::{ModelConfig, XCrossNetModel};
pub use optim::{fit, TrainConfig};
pub use params::Parameterized;
