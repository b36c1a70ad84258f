//! Dense tensors, a reverse-mode tape, Adam, and numerical gradient checks.

mod checkpoint;
mod gradcheck;
mod optim;
mod params;
mod tape;
mod tensor;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CheckpointHeader,
    TensorEntry, FORMAT_VERSION,
};
pub use gradcheck::{grad_check, relative_error, GradCheckConfig, GradCheckReport};
pub use optim::{adam_step, clip_row_norms, AdamConfig, OptimizerState, StepReport};
pub use params::{uniform, Gradients, ParameterSet};
pub use tape::{sigmoid, GradTable, Mode, Tape, Var, DEFAULT_DROPOUT, PROB_FLOOR};
pub use tensor::{Precision, Tensor};

