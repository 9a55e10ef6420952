pub mod compositor;
pub mod error;
pub mod flowio;
pub mod image;
pub mod metrics;
pub mod optics;
pub mod par;
pub mod pipeline;
pub mod scatter;
pub mod trajectory;

pub use error::{Error, Result};
