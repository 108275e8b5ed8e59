//! Synthetic georeferenced data and label oracle. Everything produced here
//! is generated, never observed.

mod field;
mod oracle;
mod world;

pub use field::random_field;
pub use oracle::{oracle_from_stats, oracle_labels, window_stats, NOMINAL};
pub use world::{gi_dates, World, WorldConfig};
