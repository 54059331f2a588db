//! Local differential geometry of neutral self-dual 4-metrics with α-surface foliations.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod fields;
pub mod metric;
pub mod tetrad;
pub mod connection;
pub mod curvature;
pub mod twistor;
pub mod killing;
pub mod geodesics;
pub mod spec;
pub mod suite;
