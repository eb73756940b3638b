#![no_std]
#![doc = include_str!("../README.md")]

extern crate alloc;

pub mod comparison;
pub mod error;
pub mod flow;
pub mod frames;
pub mod hamiltonians;
pub mod heatgrid;
pub mod jets;
pub mod laplacian;
pub mod transport1d;

pub use error::{Error, Result};
