//! Array engine, reverse-mode differentiation, layers and optimizer.

mod checkpoint;
pub mod gradcheck;
mod nn;
mod optim;
mod tape;
mod tensor;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use nn::{layer_norm, Ctx, LN_EPS};
pub use optim::{adam_step, clip_global_norm, AdamConfig, GradMap, Init, Param, ParamStore};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

