//! Path simulation for one-dimensional Itô semimartingales
//! `X_t = X_0 + b t + ∫ σ dW + Σ ΔX` with finite-activity jumps.

mod io;
mod model;
mod path;
mod simulate;

pub use model::{JumpModel, JumpSizeDist, ModelConfig, VolatilityKind, VolatilityModel};
pub use path::{window_count, JumpRecord, Neighborhood, SamplePath};
pub use simulate::simulate_path;
