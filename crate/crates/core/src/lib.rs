pub mod assignment;
pub mod convex;
pub mod error;
pub mod lagrangian;
pub mod lggrm;
pub mod lp;
pub mod measure;
pub mod nested;
pub mod ot;
pub mod random;

pub use error::{Error, Result};
