//! The residual classifier: a 5x5 stem convolution, a 2x2 max pool, four
//! stages of two basic blocks and a fully-connected head over a global
//! average pool.

mod checkpoint;
mod config;
mod layers;
mod network;

pub use checkpoint::{
    load_checkpoint, read_checkpoint, read_checkpoint_header, save_checkpoint, write_checkpoint, CheckpointHeader,
    TrainedModel, TrainingMeta, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use config::NetworkConfig;
pub use layers::{BasicBlock, Conv, Norm};
pub use network::{argmax_rows, predict, ArchitectureReport, Network};
