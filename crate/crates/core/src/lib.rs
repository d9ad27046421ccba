//! Forbidden-zone-aware reduced-attitude pointing control with a switched
//! prescribed-performance envelope and an immersion-and-invariance adaptive
//! law, plus the scenario harness that exercises it.

pub mod apf;
pub mod attitude;
pub mod closed_loop;
pub mod controller;
pub mod error;
pub mod governor;
pub mod integrate;
pub mod plant;
pub mod scenario;

pub use apf::{ApfGains, ForbiddenZone};
pub use attitude::{Dcm, PointingPair, UnitQuaternion, Vec3};
pub use closed_loop::{ClosedLoopParams, ClosedLoopState, ControllerMode};
pub use controller::{ControllerGains, EstimatorState};
pub use error::{ControlError, ScenarioError};
pub use governor::{GovernorParams, SwitchSpec};
pub use plant::{PlantParams, ReducedAttitudeState};
