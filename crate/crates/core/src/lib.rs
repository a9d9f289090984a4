pub mod error;
pub mod estimators;
pub mod model;
pub mod noncompliance;
pub mod oracle;
pub mod pairing;
pub mod power;
pub mod special;
pub mod variance;

pub use error::{Error, Result};
