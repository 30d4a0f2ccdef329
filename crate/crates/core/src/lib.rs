#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conjugates;
pub mod error;
pub mod linalg;
pub mod lp;
pub mod payoffs;
pub mod regions;
pub mod engine;
pub mod oracle;
pub mod ledger;
