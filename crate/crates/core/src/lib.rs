#![no_std]
extern crate alloc;

pub mod error;
pub mod linalg;
pub mod lo;
pub mod apps;
pub mod auxsolve;
pub mod certificate;
pub mod duality;
pub mod prox;
pub mod solvers;

pub use error::{Error, Result};
