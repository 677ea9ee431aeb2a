//! Minimal dense-tensor numerics: reverse-mode autodiff over batched 2-D
//! values, MLPs, squashed diagonal-Gaussian policy heads, an adaptive-moment
//! optimizer, and bit-exact checkpoints. Everything is f64 and deterministic
//! under seeded rngs.

pub mod adam;
pub mod checkpoint;
pub mod gaussian;
pub mod kernels;
pub mod mlp;
pub mod tape;
pub mod tensor;

pub use adam::{adam_step, AdamState};
pub use gaussian::{
    kl_diag_gaussian, sample_squashed, standard_normal, DiagGaussianHead, GaussianPolicy,
    LOG_STD_MAX, LOG_STD_MIN,
};
pub use mlp::{Activation, Mlp, MlpBinding};
pub use tape::{NodeId, PNorm, Tape};
pub use tensor::Tensor;
