//! Bouncing-balls video prediction benchmark.
//!
//! The crate covers the whole experimental loop: a toy physics simulator
//! ([`sim`]), a renderer and dataset format ([`raster`]), a reverse-mode
//! autodiff engine ([`autograd`]), recurrent frame predictors ([`models`]),
//! training regimens ([`training`]) and the evaluation metrics ([`eval`]).

pub mod autograd;
pub mod error;
pub mod eval;
pub mod models;
pub mod raster;
pub mod sim;
pub mod training;

pub use error::{Error, Result};
