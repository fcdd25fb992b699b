//! Energy, quality and efficiency auditing for local LLM inference
//! configurations.

// Negated comparisons are used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audit;
pub mod config;
pub mod dataset;
pub mod energy;
pub mod error;
pub mod inferstat;
pub mod metrics;
pub mod reliability;
pub mod report;
pub mod scenarios;
pub mod scoring;
pub mod special;
pub mod tracker;

pub use error::{AuditError, ErrorClass, Result};
