#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Experiment drivers for the model-hierarchy controllers.

pub mod config;
pub mod experiments;
pub mod output;
pub mod stats;
