//! Precomputed diffuse global illumination for static scenes with unseen
//! dynamic objects.
//!
//! The pipeline: path-trace indirect irradiance `E(x, n)` of a static scene
//! ([`tracer`]), bake a training set ([`dataset`]), compress it into either a
//! small coordinate network ([`field`]) or a grid of spherical-harmonics
//! probes ([`probes`]), then shade any G-buffer — including dynamic geometry
//! the bake never saw — by querying the volume per pixel ([`render`]).
//! [`eval`] measures providers against held-out path-traced ground truth.
//!
//! Everything is deterministic: all randomness flows from explicit seeds
//! through counter-based per-item streams, so bakes, training runs and
//! renders reproduce byte-identically.

pub mod dataset;
pub mod eval;
pub mod field;
pub mod image_io;
pub mod probes;
pub mod render;
pub mod rgb;
pub mod rng;
pub mod scene;
pub mod tracer;

mod guide;

pub use rgb::Rgb;

/// Tool version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
