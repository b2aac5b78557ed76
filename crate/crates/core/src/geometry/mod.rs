//! Planar domains with a partitioned boundary.

mod curve;
mod domain;
mod file;

pub use curve::{BoundaryCurve, Regularity, Segment, Vec2, CORNER_ANGLE};
pub use domain::{ArcInterval, ArcSet, Domain, Side, SurfaceBall};
pub use file::{ArcUnits, BoundarySpec, DomainFile};
