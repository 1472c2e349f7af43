//! File formats, configuration, threaded seed execution and the batch
//! pipeline around [`amsal_core`].

pub mod config;
pub mod error;
pub mod format;
pub mod model;
pub mod parallel;
pub mod pipeline;

pub use amsal_core as core;
pub use config::PipelineConfig;
pub use error::{Error, FormatError, Result};
pub use format::{load_matrix, save_matrix, MatrixFormat};
pub use model::{load_eraser, save_eraser};
pub use parallel::{run_amsal_threaded, thread_count};
pub use pipeline::run_pipeline;
