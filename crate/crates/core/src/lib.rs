//! Detailed balance, species freezing, closed completions and dynamics for
//! mass-action chemical reaction networks.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod completion;
pub mod dynamics;
pub mod kinetics;
pub mod network;
pub mod ratlin;
pub mod reduction;
