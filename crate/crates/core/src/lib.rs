//! Training-free scoring of synthetic image datasets against a real target domain.
//!
//! The engine pairs real and synthetic images, measures appearance and
//! geometry similarity per pair, aggregates to dataset level, and fuses the
//! two normalized signals with a constrained bilinear model calibrated to
//! maximize correlation with downstream task performance.

pub mod aggregate;
pub mod calibrate;
pub mod datamodel;
pub mod error;
pub mod fusion;
pub mod metrics;
pub mod pairing;
pub mod pipeline;
pub mod report;
pub mod runtime;
pub mod seed;
pub mod synthbench;

pub use error::{Error, Result};
