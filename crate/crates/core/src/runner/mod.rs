//! Experiment configuration, codebook files and the CLI commands.

pub mod codebook_io;
pub mod commands;
pub mod config;

pub use codebook_io::{read_codebook, write_codebook};
pub use commands::{cmd_design, cmd_pattern, cmd_simulate, cmd_verify, PatternTarget, VerifyOptions};
pub use config::{ExperimentConfig, PolarizationSection, ZetaSource};
