//! Robot-handle backends: the in-process simulation backend and the remote
//! backend speaking newline-delimited JSON over TCP, plus the matching
//! emulator server.
//!
//! Everything here implements or serves the one trait defined in the core
//! crate, so planners and skills never see which backend they run on.

pub mod remote;
pub mod server;
pub mod sim;
pub mod wire;

pub use remote::{connect_remote, RemoteHandle};
pub use server::{HalServer, TimeMode};
pub use sim::SimBackend;

/// Resolves the server port: the environment override when set and valid,
/// the built-in default otherwise.
pub fn default_port() -> u16 {
    std::env::var(mobiman_core::hal::PORT_ENV)
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(mobiman_core::hal::DEFAULT_PORT)
}
