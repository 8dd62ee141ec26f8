pub mod allocation;
pub mod beamopt;
pub mod benchmarks;
pub mod ellipsoid;
pub mod error;
pub mod experiment;
pub mod lambda_range;
pub mod oracle;
pub mod linalg;
pub mod scenario;
pub mod sdp;
pub mod waterfill;

pub use error::{Error, Result};
