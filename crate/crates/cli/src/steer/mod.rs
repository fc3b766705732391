//! Live steering of a trained policy: a ticking session plus its
//! WebSocket server.

pub mod server;
pub mod session;

pub use server::{run, serve};
pub use session::{ClientMessage, DoneInfo, ServerMessage, Session, StateMessage, PROTOCOL_VERSION};
