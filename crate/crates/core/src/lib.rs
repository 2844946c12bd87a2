//! Model hierarchy predictive control.
//!
//! A multi-phase optimal control problem mixes full and simplified robot
//! models along one planning horizon. [`hsddp`] solves it; [`legged`] and
//! [`quadrotor`] provide the model hierarchies; [`runtime`] closes the loop
//! against a simulated plant.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fd;
pub mod hsddp;
pub mod legged;
pub mod multiphase;
pub mod quadrotor;
pub mod runtime;

pub use error::{Error, Result};

pub type Vector = nalgebra::DVector<f64>;
pub type Matrix = nalgebra::DMatrix<f64>;
