//! File formats: signal map, configuration, scenario scripts and traces.

pub mod config;
pub mod map_file;
pub mod scenario;
pub mod trace;
