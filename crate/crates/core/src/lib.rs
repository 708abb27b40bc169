//! Free-surface lattice Boltzmann (D3Q19, BGK) with coupled rigid bodies.
//!
//! [`sim::Simulation`] owns the lattice, the cell states and the bodies and
//! advances them with [`sim::Simulation::step`]. [`config`] and [`scenario`]
//! build simulations from text configs and run the validation experiments;
//! [`hydrostatics`] holds the analytic floating-body reference.

pub mod audit;
pub mod body;
pub mod config;
pub mod coupling;
pub mod error;
pub mod free_surface;
pub mod grid;
pub mod hydrostatics;
pub mod lattice;
pub mod output;
pub mod scenario;
pub mod sim;

pub use audit::TransitionAuditor;
pub use body::{BodyState, Constraints, MassProps, RigidBody, Shape, Vec3};
pub use config::{parse_config, BodyConfig, FillConfig, FillMode, RunConfig, ScenarioConfig, ScenarioKind};
pub use error::{Error, Result};
pub use grid::{Boundaries, CellKind, Dims, Face, FaceBoundary};
pub use hydrostatics::{FloatingCuboid, HeelEquilibrium};
pub use output::DiagnosticsRow;
pub use sim::{BodyLoad, ConversionLog, SimParams, Simulation};
