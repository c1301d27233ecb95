//! Neural force manifold: a from-scratch feed-forward regression network
//! mapping (x̄, z̄) → (λ, α, l̄_s), its training loop, and the discretized
//! manifold with workspace and penalty masks used by the planner.

mod manifold;
mod mlp;
mod train;

pub use manifold::{build_manifold, Manifold};
pub use mlp::{MlpModel, MODEL_FORMAT_VERSION};
pub use train::{train, EpochStat, Optimizer, TrainConfig, TrainReport};
