//! Bayesian persuasion with mean-measurable payoffs: exact distributions and
//! integrated CDFs, piecewise-polynomial payoffs, a grid LP solver with dual
//! certificates, and the comparative-statics checks built on top of them.

pub mod measures;
pub mod payoffs;
pub mod poly;
pub mod orders;
pub mod solver;
pub mod constructions;
pub mod harness;

pub use measures::{Distribution, GridSpec, IntegratedCdf};
pub use poly::Poly;
