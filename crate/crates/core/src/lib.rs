//! Deterministic synthetic scene-text generation.
//!
//! The engine plants Cyrillic/Latin text into background photographs. It
//! relies on precomputed depth and boundary maps and writes paragraph, line,
//! word and character polygons plus instance masks for every image.
//!
//! Stage order for one image:
//!
//! 1. [`prefilter`] drops or blurs images that already contain text.
//! 2. [`regions`] splits the boundary map into uniform placement candidates.
//! 3. [`corpus`] samples words, numbers and phone numbers.
//! 4. [`render`] lays the text out, bends it along a sine curve and rasterizes it.
//! 5. [`geometry`] fits a plane to the region depth and builds the homography.
//! 6. [`blend`] composites the text with gradient-domain blending.
//! 7. [`annotate`] writes the annotation record, the mask and statistics.
//!
//! [`pipeline`] wires the stages together and runs batches on a worker pool
//! (see [`par`]).

// NaN-rejecting comparisons are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alphabet;
pub mod annotate;
pub mod blend;
pub mod boxes;
pub mod config;
pub mod corpus;
pub mod geometry;
pub mod par;
pub mod pipeline;
pub mod poly;
pub mod prefilter;
pub mod raster;
pub mod regions;
pub mod render;
pub mod rng;

pub use poly::{Point, Polygon};
pub use raster::{Mask, Raster, RasterError};
