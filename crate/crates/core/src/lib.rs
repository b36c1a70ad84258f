pub mod abstractive;
pub mod beam;
pub mod cli;
pub mod condense;
pub mod customization;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod extractive;
pub mod fusion;
pub mod nn;
pub mod pipeline;
pub mod selfcheck;
pub mod tensor_core;
pub mod training;

pub use error::{Error, Result};
