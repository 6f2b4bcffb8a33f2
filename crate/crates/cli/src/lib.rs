//! Front ends for the diffnav stack: the WebSocket bridge server, its
//! clients, and the headless simulator runner.

pub mod client;
pub mod run;
pub mod server;
pub mod teleop;
