//! Operators, differentiation backends and the enhancement model.

pub mod blocks;
pub mod checkpoint;
pub mod exec;
pub mod model;
pub mod ops;
pub mod tape;

pub use exec::{Eager, Exec};
pub use model::{
    count_gflops, count_macs, count_params, enhance, forward, Enhanced, Formulation, ModelParams,
    ParamTable, VariantConfig, VariantName,
};
pub use tape::{Tape, Var};
