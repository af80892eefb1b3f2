//! Wall-and-chamber analysis of planar gradient families.
//!
//! For a polynomial generating function f on the plane, the shifted family
//! f_x(y) = f(y) - x.y induces a gradient flow whose phase portrait changes
//! only across two kinds of walls in the base plane: the caustic (a critical
//! point degenerates) and the bifurcation locus (a saddle-to-saddle
//! separatrix). This crate locates both walls, builds coherently oriented
//! Morse complexes chamber by chamber, glues them with integer chain maps
//! across walls and certifies that the glueing has no monodromy around
//! codimension-2 wall intersections.

pub mod config;
pub mod docs;
pub mod error;
pub mod corrections;
pub mod critical;
pub mod exact;
pub mod flow;
pub mod geom;
pub mod loci;
pub mod morse;
pub mod pipeline;
pub mod poly;
pub mod report;
pub mod synthetic;
pub mod portrait;

pub use config::{RunConfig, Tolerances};
pub use error::{CbError, Result};
pub use geom::{Rect, Sym2, Vec2};
pub use poly::{legendre_sheet, BasePoint, GeneratingFunction, SheetFunction};
