//! Tensor math and layer primitives with hand-written backward passes.
//!
//! Reductions run in a fixed order so results are bit-reproducible for a
//! given build. Every op is pure apart from the documented mutations: batch
//! norm running statistics, the SGD update and the generator state.

pub mod activation;
pub mod batchnorm;
pub mod conv;
pub mod init;
pub mod linear;
pub mod loss;
pub mod optim;
pub mod pool;
pub mod tensor;

pub use activation::{relu, relu_backward};
pub use batchnorm::{batchnorm_backward, batchnorm_forward, BatchNormState, Mode};
pub use conv::{conv2d_backward, conv2d_forward, ConvGrads};
pub use init::he_init;
pub use linear::{fully_connected, fully_connected_backward, LinearGrads};
pub use loss::softmax_cross_entropy;
pub use optim::{sgd_step, ParamTensor, SgdConfig};
pub use pool::{global_avg_pool, global_avg_pool_backward, maxpool2x2, maxpool2x2_backward};
pub use tensor::{Scalar, Tensor};
