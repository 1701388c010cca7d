//! Exact and classical-shadow estimation of higher-point out-of-time-ordered
//! correlators (OTOCs) in small spin chains.

pub mod dynamics;
pub mod error;
pub mod estimators;
pub mod exact_otoc;
pub mod global_protocol;
pub mod harness;
pub mod qlinalg;
pub mod rng;
pub mod shadows;
pub mod variance;

pub use error::{OtocError, Result};
pub use rng::{RandomStream, Seed};
