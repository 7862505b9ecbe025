#![allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail these checks

pub mod benchmarking;
pub mod config;
pub mod dynamics;
pub mod effective;
pub mod error;
pub mod frames;
pub mod httomo;
pub mod model;
pub mod numerics;
pub mod qpt;

pub use error::{Error, Result};
