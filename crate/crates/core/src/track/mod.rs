//! Reference path, road edges, obstacles and scenarios.

mod geometry;
mod scenario;
mod spline;

pub use geometry::{
    contouring_lag_errors, edge_error, edge_error_from_offset, obstacle_error, EdgeSegment, Obstacle, RoadEdges,
};
pub use scenario::{dlc_scenario, straight_scenario, DlcGeometry, Scenario};
pub use spline::{PathPoint, PathSpline};
