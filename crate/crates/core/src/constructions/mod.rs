//! Explicit counterexamples and closed-form solutions: two-point priors on
//! which the argmax moves the wrong way when ordinal convexity fails,
//! crater-violation priors with the matching `v`, and the binary-prior
//! concavification.

mod binary;
mod crater;
mod theorem1;

use thiserror::Error;

use crate::measures::MeasureError;
use crate::orders::OrderError;
use crate::payoffs::PayoffError;
use crate::solver::SolveError;

pub use binary::{binary_solve, prop1_check, BinarySolution, Prop1Failure, Prop1Report, PROP1_TOL};
pub use crater::{
    crater_counterexample, two_sided_prior, verify_lemma5, CraterCase, CraterChecks, CraterCounterexample, KinkedLine,
    Lemma5Report, LEMMA5_TOL,
};
pub use theorem1::{theorem1_counterexample, ArgmaxFacts, ChordCase, Theorem1Counterexample};

#[derive(Debug, Error)]
pub enum ConstructionError {
    #[error("mean {0} is outside (0, 1)")]
    Domain(f64),
    #[error("the witness does not certify a failure of ordinal convexity")]
    InvalidWitness,
    #[error("the crater property holds")]
    NotAViolation,
    #[error("construction failed at {stage}: {detail}")]
    Failure { stage: String, detail: String },
    #[error("hypotheses unmet: {0}")]
    Precondition(String),
    #[error(transparent)]
    Payoff(#[from] PayoffError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Order(#[from] OrderError),
}
