//! Hierarchical equilibrium of a renewable power-to-ammonia chain competing
//! with gray ammonia producers in coupled carbon and ammonia markets.

pub mod allocation;
pub mod clock;
pub mod equilibrium;
pub mod game;
pub mod market;
pub mod models;
pub mod program;
pub mod scenario;
pub mod solver;
pub mod units;
