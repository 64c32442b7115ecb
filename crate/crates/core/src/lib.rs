//! Semiclassical wave packets through codimension-two conical crossings.
//!
//! The pipeline follows a Gaussian packet on one eigenvalue sheet of a
//! two-level potential `V = v I + A(w)`, stops just before the passage near the
//! cone, converts the incoming profile into Landau–Zener data, and rebuilds two
//! outgoing packets (one per sheet). A split-step grid solver of the full
//! system serves as ground truth.

pub mod classical;
pub mod crossing;
pub mod error;
pub mod gamma;
pub mod grid;
pub mod landau_zener;
pub mod potential;
pub mod primitives;
pub mod profile;
pub mod reference;
pub mod scenario;
pub mod transition;

pub use classical::{FlowMode, PhasePoint, Trajectory};
pub use crossing::CrossingEvent;
pub use error::{Error, Result};
pub use potential::{ModeSign, PauliPotential};
