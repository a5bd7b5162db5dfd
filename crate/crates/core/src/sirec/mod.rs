//! The SIREC ensemble: random-interval decision trees with plurality voting.

mod codegen;
mod format;
mod model;
pub mod tree;

pub use codegen::export_portable_source;
pub use format::{deserialize, serialize, MODEL_FORMAT_VERSION};
pub use model::{ModelConfig, SirecModel, SirecTree, TrainConfig};
pub use tree::{DecisionTree, Node, TreeParams};
