//! Simulation world, persistence, bench engine, and command dispatch for
//! the `phr` binary.

pub mod bench;
pub mod commands;
pub mod world;

pub use world::{SimWorld, WorldError};
