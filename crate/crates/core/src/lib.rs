pub mod bounds;
pub mod error;
pub mod json;
pub mod linalg;
pub mod localdeco;
pub mod postproc;
pub mod qstate;
pub mod railsim;

pub use error::{Error, Result};
