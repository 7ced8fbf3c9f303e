//! Fluid-flow navigation for formations that lose agents mid-flight.
//!
//! Failed agents become doublet singularities of an ideal uniform flow.
//! Healthy agents slide along streamlines of constant stream value `psi`,
//! advancing the potential `phi` by a shared increment each control tick,
//! so the exclusion circles are never entered and the formation moves as a
//! rigid body in the `(phi, psi)` plane.
//!
//! * [`flow_field`]: potential, stream function, Jacobian, `lambda_max`.
//! * [`solver`]: Newton inversion of `(phi, psi)` targets back to positions.
//! * [`navigator`]: the fixed-rate loop with the K-pass slide-speed retune.
//! * [`safety`]: pre-flight separation theorems and runtime monitors.
//! * [`sim`]: deterministic fleet simulator with failure injection.
//! * [`io`]: config schema, log and grid exports, runtime bench.

pub mod error;
pub mod flow_field;
pub mod io;
pub mod navigator;
pub mod safety;
pub mod sim;
pub mod solver;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use error::{Error, Result};
pub use flow_field::{FieldPoint, FlowField, Jacobian2x2, Obstacle, Rect};
pub use navigator::{AgentNavState, CemNavigator, NavigatorConfig, StepOutput};
pub use safety::{SafetyMargins, SafetyReport};
pub use solver::{SolveResult, SolverConfig};

/// Planar position or velocity, meters or meters per second.
pub type Vec2 = nalgebra::Vector2<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub u32);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Q{}", self.0)
    }
}
