//! Deterministic, tick-based global-workspace runtime for language agents,
//! with behavioural probes and a static architecture checker.

pub mod attention;
pub mod config;
pub mod conformance;
pub mod environment;
pub mod error;
pub mod modules;
pub mod probes;
pub mod processor;
pub mod runtime;
pub mod scoring;
pub mod trace;
pub mod types;
pub mod workspace;

pub use error::{Error, Result};
pub use types::{
    AttentionConfig, Context, Draft, IdAllocator, Kind, ModuleId, Polarity, RefreshMode, RepId, Representation, Tick,
};
