//! Command-line tool and HTTP service over the adforge pipeline.

pub mod commands;
pub mod config;
pub mod models;
pub mod server;
pub mod store;

pub use config::AppConfig;
pub use models::{ModelDir, MODELS_DIR_ENV};
pub use store::{Store, StoreError};
