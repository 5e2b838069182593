//! Finite-volume kinetic solver for unsteady mixed free-surface/pressurized
//! water flows in closed pipes.
//!
//! The state of each cell is the pair (A, Q) of equivalent wet area and
//! discharge, plus a flow-regime flag. Interface fluxes are half-moments of
//! compactly supported Gibbs equilibria with reflection and transmission at a
//! potential barrier that upwinds the source terms (bed slope, section
//! variation, inclination, friction through the dynamic slope). Transition
//! points between the two regimes are solved either by a ghost-waves Riemann
//! linearization or by moment matching at the microscopic level, and a
//! stationary-profile reconstruction keeps every discrete steady state an
//! exact fixed point of the update.

pub mod boundary;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod kinetic;
pub mod model;
pub mod newton;
pub mod stepper;
pub mod transition;

pub use error::{Error, Result};
pub use geometry::{PipeGeometry, Section, SectionShape, SegmentSpec};
pub use model::{CellState, FlowRegime, ModelParams};
pub use stepper::{MeshState, Stepper};
