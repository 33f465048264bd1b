//! HTTP API and command-line front end of marketlens.

pub mod api;
pub mod app;
pub mod cli;
pub mod config;
pub mod sessions;

pub use app::{AppError, AppState, Providers};
pub use config::AppConfig;
pub use sessions::{SessionRecord, SessionStore};
