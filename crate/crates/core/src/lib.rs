//! Backpressure-based inter-AS traffic engineering.
//!
//! The crate holds the network model ([`topology`]), distance-vector routing
//! and policy traversal ([`policy`]), priority-rule derivation
//! ([`backpressure`]), the central controller ([`controller`]), traffic
//! generation ([`traffic`]) and a deterministic discrete-event simulator
//! ([`engine`]). It needs only `alloc`.

#![no_std]

extern crate alloc;

pub mod backpressure;
pub mod commodity;
pub mod controller;
pub mod engine;
pub mod error;
pub mod policy;
pub mod topology;
pub mod traffic;

pub use error::{Error, Result};
