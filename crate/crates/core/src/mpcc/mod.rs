//! Model predictive contouring control.

mod config;
mod controller;
mod ocp;
mod priority;
pub mod sqp;

pub use config::{Bounds, OcpConfig, PrioritySettings, Weights};
pub use controller::{features, Controller, CycleDiagnostics, Variant};
pub use ocp::{
    applied_input, smooth_hinge, stage_cost, su, sx, vehicle_state, Ocp, OcpSolution, SigmaLinearization, StageCost,
    StateVec, NU, NX,
};
pub use priority::{collision_priority_weights, prioritized_weights, PrioritySwitch};
pub use sqp::{solve, Layout, Residuals, ShootingProblem, SolveStatus, SqpResult, SqpSettings, Trajectory};
