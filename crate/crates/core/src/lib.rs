//! Discrete-event simulation of IPv4/IPv6 transition mechanisms.
//!
//! The crate is layered bottom-up: [`packet`] and [`addressing`] hold the
//! protocol math, [`transition`] the dataplane engines, [`des`] the event
//! engine, [`transport`] the TCP-like flows and workloads, [`scenario`] the
//! topology and configuration, [`sim`] the network driver and [`metrics`]
//! the reporting layer.

pub mod addressing;
pub mod des;
pub mod metrics;
pub mod packet;
pub mod scenario;
pub mod sim;
pub mod time;
pub mod transition;
pub mod transport;

pub use time::SimTime;
