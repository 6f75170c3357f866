//! Scenario generation and the end-to-end pipeline behind the `pvdisagg`
//! command-line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x >= 1.0)` deliberately rejects NaN

pub mod commands;
pub mod config;
pub mod pipeline;
pub mod scenario;
