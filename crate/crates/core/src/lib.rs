pub mod amsolver;
pub mod cli;
pub mod config;
mod error;
pub mod evalkit;
pub mod fdc;
pub mod flow;
pub mod functionals;
pub mod numkit;
pub mod pretrain;
pub mod scenarios;
pub mod simplexlab;
pub mod svg;

pub use error::{Error, Result};
