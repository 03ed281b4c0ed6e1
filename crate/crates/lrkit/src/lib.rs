//! Locally refinable spline spaces built from collections of tensor-product
//! B-splines, with the machinery to compare the three main refinement
//! strategies on equal footing:
//!
//! - [`lrsplines`]: LR B-splines over box-partitions with multiplicity-carrying
//!   meshrectangles,
//! - [`hbsplines`]: (truncated) hierarchical B-splines over dyadic grids,
//! - [`tsplines`]: bi-cubic T-splines with knot inference by mesh traversal.
//!
//! [`diagnostics`] provides the comparison instruments (exact linear
//! independence over rationals, partition of unity, nestedness, polynomial
//! reproduction, basis-growth tables). [`geometry`] evaluates spline
//! geometry, extracts iso-curves, tessellates surfaces and slices triangle
//! soups. [`formats`] serializes collections (`.lrsp`) and triangle soups
//! (STL, ASCII and binary).
//!
//! Sampling loops, per-element extraction and tessellation run in parallel
//! with the default `parallel` feature; disabling it yields a sequential
//! build with identical results.

pub mod collection;
pub mod diagnostics;
pub mod error;
pub mod formats;
pub mod geometry;
pub mod hbsplines;
pub mod lrmesh;
pub mod lrsplines;
pub mod parallel;
pub mod rational;
pub mod splinecore;
pub mod tsplines;

pub use collection::{ControlPoint, Independence, ScaledBSpline, SplineCollection};
pub use error::{Error, Result};
pub use splinecore::{
    continuity_at, oslo_refine, tensor_space_growth, KnotVector, Limit, LocalKnots,
    RefinementMatrix, TensorBSpline,
};
