//! Simulation of impulsive fractional systems with Hilfer derivatives and
//! numerical checks of their Mittag-Leffler stability.

// `!(a > b)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod expr;
pub mod fraccalc;
pub mod quad;
pub mod solver;
pub mod special;
pub mod stability;

use thiserror::Error;

/// Any library error.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] expr::ExprError),
    #[error(transparent)]
    Special(#[from] special::SpecialError),
    #[error(transparent)]
    Frac(#[from] fraccalc::FracError),
    #[error(transparent)]
    Solver(#[from] solver::SolverError),
    #[error(transparent)]
    Stability(#[from] stability::StabilityError),
}
