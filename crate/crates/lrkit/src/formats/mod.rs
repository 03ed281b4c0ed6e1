//! Serialization: the `.lrsp` exchange format for locally refined spline
//! collections and STL triangle-soup I/O (ASCII and binary).

pub mod hexfloat;
mod lrsp;
mod stl;

pub use lrsp::{
    read_lr, write_lr, DimKnots, LRSplineDocument, LocalBSplineRecord, NumberFormat, SplineType,
    LRSP_VERSION,
};
pub use stl::{read_ascii, read_binary, read_stl, write_stl, StlMode};
