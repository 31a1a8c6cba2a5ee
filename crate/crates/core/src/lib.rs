//! Algorithmic core for perspective-aware anchor optimization in 2D object
//! detection.
//!
//! The crate provides the building blocks of an anchor-tuning pipeline for
//! driving-scene cameras, where object size correlates strongly with vertical
//! image position:
//!
//! - [`geometry`]: axis-aligned boxes, IoU, and anchor decoding from
//!   (scale, aspect) parameters relative to a 256 px base.
//! - [`data`]: annotation/detection records and per-object shape features.
//! - [`regions`]: K-means clustering over (aspect, scale), silhouette-based
//!   model selection, and the vertical image partition derived from per-cluster
//!   density bounds.
//! - [`anchor_opt`]: the evolutionary search for per-region anchor
//!   configurations, a K-means anchor baseline, and coverage reporting.
//! - [`losses`]: class-imbalance loss functions (weighted multi-task,
//!   focal, reduced focal) with analytic logit gradients.
//! - [`ensemble`]: greedy NMS, affirmative multi-model fusion, and
//!   test-time-augmentation de-scaling.
//! - [`eval`]: interpolated average precision with per-class IoU thresholds
//!   and cumulative difficulty levels.
//!
//! Everything here is pure computation over in-memory values; file formats,
//! configuration, and the command-line pipeline live in the companion
//! `anchorkit` crate. The crate is `no_std`-compatible (with `alloc`) when
//! built without the default `std` feature.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod anchor_opt;
pub mod data;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod losses;
pub mod regions;

mod math;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;
