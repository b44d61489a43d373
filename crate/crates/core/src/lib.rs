//! Spectral toolkit for Rabinowitz-Floer computations on coupled Dirac systems.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod critical;
pub mod error;
pub mod flow;
pub mod functional;
pub mod homology;
pub mod nonlinearity;
pub mod perturbation;
pub mod spectral;

pub use error::{Error, Result};
