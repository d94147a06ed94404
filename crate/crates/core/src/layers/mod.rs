//! The four stages of the network, each as a forward/backward pair.
//!
//! Every `backward` takes a gradient container of the same type as the layer
//! (obtained with `zeros_like`) and *adds* into it, so a batch gradient is the
//! running sum of per-instance calls.

mod concat;
mod cross;
mod embedding;
pub(crate) mod init;
mod mlp;
mod product;

pub use concat::{ConcatCache, ConcatCross};
pub use cross::{CrossCache, CrossStack};
pub use embedding::Embedding;
pub use init::SMALL_NORMAL_STD;
pub use mlp::{sigmoid, Mlp, MlpCache};
pub use product::{ProductCache, ProductLayer};
