//! Performance analysis of an energy-harvesting fixed-gain amplify-and-forward
//! relay link over mixed Nakagami-m / α-μ fading.

pub mod channels;
pub mod endtoend;
pub mod error;
pub mod mcsim;
pub mod metrics;
pub mod quad;
pub mod result;
pub mod specfun;

pub use error::{Error, Result};
pub use result::{Diagnostics, MetricResult};
