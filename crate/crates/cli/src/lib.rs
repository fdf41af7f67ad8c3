//! Experiment harness for the firebreak placement laboratory: configuration
//! files, the seven commands, and evaluation reports.

pub mod commands;
pub mod config;
pub mod report;

pub use commands::{
    cmd_demo_gen, cmd_evaluate, cmd_gradcam, cmd_pretrain, cmd_shrink, cmd_simulate, cmd_train,
    Policy,
};
pub use config::ExperimentSpec;
pub use report::EvalReport;
