//! Virtual maser bench: the session state machine, the on-disk shot store,
//! the `maser` command line and the HTTP service.

pub mod cli;
pub mod config;
pub mod error;
pub mod service;
pub mod session;
pub mod shot;

pub use config::BenchConfig;
pub use error::BenchError;
pub use session::{BenchSession, TuneTarget};
pub use shot::{ShotRecord, ShotData};
