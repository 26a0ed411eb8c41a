//! Calibration service: sessions that adjust one enhancement parameter
//! against a side-by-side preview, and an export of the accepted values.

pub mod api;
pub mod corpus;
pub mod preview;
pub mod session;

pub use api::{router, AppState, ServiceConfig};
pub use corpus::Corpus;
