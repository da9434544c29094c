//! Service, harness and command-line layer of the MEDAS diagnostic
//! super-learner. The pure algorithms live in [`medas_core`]; this crate
//! adds configuration, agent transports, parallel dispatch, the journal,
//! the REST API and evaluation over files.

pub mod cli;
pub mod config;
pub mod dispatch;
pub mod gateway;
pub mod harness;
pub mod journal;
pub mod service;
pub mod snapshot;

pub use config::{AgentDescriptor, Config, ConfigError, Transport};
pub use dispatch::{dispatch_inquiry, DispatchError};
pub use gateway::Gateway;
