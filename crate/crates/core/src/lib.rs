//! Piecewise-affine over-approximation of nonlinear functions on boxes.
//!
//! Given `f: R^d -> R^n` on a hyperrectangle, [`cover::eps_cover`] splits the
//! box recursively until every piece carries an affine pair
//! `lower <= f <= upper` whose gap is at most a requested `epsilon`. Each
//! pair comes from a grid LP ([`abstraction`]) shifted by an interpolation
//! error bound that depends on the smoothness class of `f`
//! ([`smoothness`]).

// Index loops read better where the index also addresses LP variables.
#![allow(clippy::needless_range_loop)]

pub mod abstraction;
pub mod cover;
pub mod document;
pub mod error;
pub mod funcspec;
pub mod geometry;
pub mod lp;
pub mod par;
pub mod smoothness;
pub mod verify;

pub use error::{Error, Result};
