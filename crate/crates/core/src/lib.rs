pub mod dimreduce;
pub mod distance;
pub mod error;
pub mod mixture;
pub mod pipeline;
pub mod rng;
pub mod special;
pub mod stats;
pub mod steinlink;

pub use error::{Error, Result};
