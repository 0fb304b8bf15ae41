//! Benchmarking toolkit for orchestration platforms on edge clusters:
//! deployment-phase timing, pod and service lifecycle latency, manual
//! intervention counting and energy footprint estimation.

// Negated float comparisons are deliberate: they reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cam;
pub mod doc;
pub mod fixtures;
pub mod metrics;
pub mod model;
pub mod probes;
pub mod report;
pub mod sim;
pub mod specdoc;
pub mod time;

pub use time::Nanos;
