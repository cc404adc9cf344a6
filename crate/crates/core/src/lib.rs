pub mod analyze;
pub mod certify;
pub mod criteria;
pub mod decompose;
pub mod error;
pub mod io;
pub mod lp;
pub mod mmatrix;
pub mod model;
pub mod norms;
pub mod reference;
pub mod sim;

pub use error::{Error, Result};
