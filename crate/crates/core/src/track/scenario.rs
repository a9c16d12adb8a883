//! Scenario definition, the double-lane-change generator and the scenario
//! file format.
//!
//! Scenario files are TOML with four kinds of section:
//!
//! ```toml
//! [path]
//! waypoints = [[0.0, 0.0], [10.0, 0.0], [20.0, 0.5], [30.0, 1.0]]
//!
//! [edges]            # piecewise-constant offsets from the centerline
//! s_start = [0.0, 67.5]
//! left = [5.25, 1.75]
//! right = [-1.75, -5.25]
//!
//! [obstacle.1]       # one table per obstacle, numbered from 1
//! x = 90.0
//! y = 0.0
//! a = 6.0            # semi-axis along `heading`
//! b = 1.0
//! heading = 0.0      # optional, default 0
//! margin = 1.2       # optional, default 0
//!
//! [reference]
//! speed_kmh = 55.0
//! collision_prioritization = false
//! finish_s = 200.0   # optional, default: path length
//! name = "custom"    # optional
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::geometry::{contouring_lag_errors, EdgeSegment, Obstacle, RoadEdges};
use super::spline::PathSpline;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub spline: PathSpline,
    pub edges: RoadEdges,
    pub obstacles: Vec<Obstacle>,
    /// Reference speed [m/s].
    pub v_ref: f64,
    pub collision_prioritization: bool,
    /// Arc length at which a run counts as completed; the path continues
    /// beyond it so the horizon never runs off the end.
    pub finish_s: f64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_ref > 0.0) {
            return Err(Error::param("v_ref", "must be strictly positive"));
        }
        if !(self.finish_s > 0.0 && self.finish_s <= self.spline.length()) {
            return Err(Error::param("finish_s", "must lie within the path"));
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            o.validate()?;
            if !self.obstacle_inside_corridor(o) {
                return Err(Error::InvalidInput(format!("obstacle {} lies outside the corridor", i + 1)));
            }
        }
        Ok(())
    }

    /// The physical ellipse (without margin) stays strictly inside the road.
    pub fn obstacle_inside_corridor(&self, o: &Obstacle) -> bool {
        let s = self.spline.project(o.x, o.y, self.spline.length() * 0.5);
        let s = self.spline.project(o.x, o.y, s);
        let coarse = (0..=200)
            .map(|i| self.spline.length() * i as f64 / 200.0)
            .min_by(|a, b| {
                let pa = self.spline.evaluate(*a);
                let pb = self.spline.evaluate(*b);
                let da = (pa.x - o.x).hypot(pa.y - o.y);
                let db = (pb.x - o.x).hypot(pb.y - o.y);
                da.total_cmp(&db)
            })
            .unwrap_or(s);
        let s = self.spline.project(o.x, o.y, coarse);
        let (e_con, _) = contouring_lag_errors(o.x, o.y, s, &self.spline);
        let (left, right) = self.edges.at(s);
        let heading = self.spline.evaluate(s).heading;
        let rel = o.heading - heading;
        // lateral half-extent of the rotated ellipse
        let half = ((o.a * rel.sin()).powi(2) + (o.b * rel.cos()).powi(2)).sqrt();
        e_con + half < left && e_con - half > right
    }

    /// Centerline samples as CSV: `s,x,y,heading,curvature,left,right`.
    pub fn centerline_csv(&self, ds: f64) -> String {
        let mut out = String::from("s,x,y,heading,curvature,left,right\n");
        for (s, p) in self.spline.sample(ds) {
            let (l, r) = self.edges.at(s);
            let _ = writeln!(out, "{s},{:.6},{:.6},{:.8},{:.8},{l},{r}", p.x, p.y, p.heading, p.curvature);
        }
        out
    }

    pub fn write_centerline_csv(&self, path: impl AsRef<Path>, ds: f64) -> Result<()> {
        std::fs::write(path, self.centerline_csv(ds))?;
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text)?;
        file.into_scenario()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        let segs = self.edges.segments();
        let file = ScenarioFile {
            path: PathSection { waypoints: self.spline.waypoints().iter().map(|p| [p.0, p.1]).collect() },
            edges: EdgesSection {
                s_start: segs.iter().map(|s| s.s_start).collect(),
                left: segs.iter().map(|s| s.left).collect(),
                right: segs.iter().map(|s| s.right).collect(),
            },
            obstacle: self.obstacles.iter().enumerate().map(|(i, o)| ((i + 1).to_string(), *o)).collect(),
            reference: ReferenceSection {
                speed_kmh: self.v_ref * 3.6,
                collision_prioritization: self.collision_prioritization,
                finish_s: Some(self.finish_s),
                name: Some(self.name.clone()),
            },
        };
        toml::to_string(&file).expect("scenario serializes")
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ScenarioFile {
    path: PathSection,
    edges: EdgesSection,
    #[serde(default)]
    obstacle: BTreeMap<String, Obstacle>,
    reference: ReferenceSection,
}

#[derive(Debug, Serialize, Deserialize)]
struct PathSection {
    waypoints: Vec<[f64; 2]>,
}

#[derive(Debug, Serialize, Deserialize)]
struct EdgesSection {
    s_start: Vec<f64>,
    left: Vec<f64>,
    right: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ReferenceSection {
    speed_kmh: f64,
    #[serde(default)]
    collision_prioritization: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    finish_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
}

impl ScenarioFile {
    fn into_scenario(self) -> Result<Scenario> {
        let wps: Vec<(f64, f64)> = self.path.waypoints.iter().map(|p| (p[0], p[1])).collect();
        let spline = PathSpline::build(&wps)?;
        let e = &self.edges;
        if e.s_start.len() != e.left.len() || e.left.len() != e.right.len() {
            return Err(Error::Parse("[edges] arrays must have equal length".into()));
        }
        let edges = RoadEdges::new(
            (0..e.s_start.len())
                .map(|i| EdgeSegment { s_start: e.s_start[i], left: e.left[i], right: e.right[i] })
                .collect(),
        )?;
        let mut numbered = Vec::with_capacity(self.obstacle.len());
        for (key, o) in self.obstacle {
            let idx: usize =
                key.parse().map_err(|_| Error::Parse(format!("obstacle section `{key}` is not numbered")))?;
            numbered.push((idx, o));
        }
        numbered.sort_by_key(|(i, _)| *i);
        let length = spline.length();
        let scenario = Scenario {
            name: self.reference.name.unwrap_or_else(|| "custom".into()),
            spline,
            edges,
            obstacles: numbered.into_iter().map(|(_, o)| o).collect(),
            v_ref: self.reference.speed_kmh / 3.6,
            collision_prioritization: self.reference.collision_prioritization,
            finish_s: self.reference.finish_s.unwrap_or(length),
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

/// Layout of the double lane change. All lengths in metres along X.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DlcGeometry {
    pub lane_width: f64,
    pub lateral_offset: f64,
    /// Swerve into the adjacent lane between these X positions.
    pub swerve_out: (f64, f64),
    /// Swerve back between these X positions.
    pub swerve_back: (f64, f64),
    /// Completion distance.
    pub length: f64,
    /// Extra straight path after the finish for the prediction horizon.
    pub runout: f64,
    pub waypoint_spacing: f64,
    /// First obstacle, in the original lane.
    pub obstacle1_x: f64,
    /// Second obstacle, in the adjacent lane.
    pub obstacle2_x: f64,
    pub obstacle_a: f64,
    pub obstacle_b: f64,
    /// Cost inflation of the obstacles.
    pub obstacle_margin: f64,
    /// Lateral semi-axis multiplier in the prioritized variant.
    pub priority_b_scale: f64,
}

impl Default for DlcGeometry {
    fn default() -> Self {
        Self {
            lane_width: 3.5,
            lateral_offset: 3.5,
            swerve_out: (64.0, 82.0),
            swerve_back: (96.0, 114.0),
            length: 200.0,
            runout: 80.0,
            waypoint_spacing: 2.5,
            obstacle1_x: 85.0,
            obstacle2_x: 118.0,
            obstacle_a: 5.0,
            obstacle_b: 1.5,
            obstacle_margin: 1.2,
            priority_b_scale: 1.15,
        }
    }
}

impl DlcGeometry {
    /// Lateral position of the centerline at `x`.
    pub fn centerline_y(&self, x: f64) -> f64 {
        let blend = |x: f64, (a, b): (f64, f64)| {
            let u = ((x - a) / (b - a)).clamp(0.0, 1.0);
            0.5 * (1.0 - (std::f64::consts::PI * u).cos())
        };
        self.lateral_offset * (blend(x, self.swerve_out) - blend(x, self.swerve_back))
    }

    pub fn build(&self, entry_speed_kmh: f64, collision_prioritization: bool) -> Result<Scenario> {
        if !(30.0..=120.0).contains(&entry_speed_kmh) {
            return Err(Error::param("entry_speed_kmh", "must lie in [30, 120] km/h"));
        }
        let total = self.length + self.runout;
        let n = (total / self.waypoint_spacing).ceil() as usize;
        let wps: Vec<(f64, f64)> = (0..=n)
            .map(|i| {
                let x = (i as f64 * self.waypoint_spacing).min(total);
                (x, self.centerline_y(x))
            })
            .collect();
        let spline = PathSpline::build(&wps)?;

        let half = 0.5 * self.lane_width;
        let s_at = |x: f64| spline.project(x, self.centerline_y(x), x);
        let mid_out = s_at(0.5 * (self.swerve_out.0 + self.swerve_out.1));
        let mid_back = s_at(0.5 * (self.swerve_back.0 + self.swerve_back.1));
        let off = self.lateral_offset;
        let edges = RoadEdges::new(vec![
            EdgeSegment { s_start: 0.0, left: off + half, right: -half },
            EdgeSegment { s_start: mid_out, left: half, right: -off - half },
            EdgeSegment { s_start: mid_back, left: off + half, right: -half },
        ])?;

        let b = if collision_prioritization { self.obstacle_b * self.priority_b_scale } else { self.obstacle_b };
        let obstacle =
            |x: f64, y: f64| Obstacle { x, y, a: self.obstacle_a, b, heading: 0.0, margin: self.obstacle_margin };
        let obstacles = vec![obstacle(self.obstacle1_x, 0.0), obstacle(self.obstacle2_x, off)];

        let name = if collision_prioritization {
            format!("dlc-priority-{entry_speed_kmh}")
        } else {
            format!("dlc-{entry_speed_kmh}")
        };
        let finish_s = s_at(self.length);
        let scenario = Scenario {
            name,
            spline,
            edges,
            obstacles,
            v_ref: entry_speed_kmh / 3.6,
            collision_prioritization,
            finish_s,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

/// Double lane change with the default layout.
pub fn dlc_scenario(entry_speed_kmh: f64, collision_prioritization: bool) -> Result<Scenario> {
    DlcGeometry::default().build(entry_speed_kmh, collision_prioritization)
}

/// Obstacle-free straight two-lane road along the x axis.
pub fn straight_scenario(speed_kmh: f64, length: f64) -> Result<Scenario> {
    if !(speed_kmh > 0.0) {
        return Err(Error::param("speed_kmh", "must be strictly positive"));
    }
    if !(length >= 20.0) {
        return Err(Error::param("length", "must be at least 20 m"));
    }
    let runout = 80.0;
    let n = ((length + runout) / 5.0).ceil() as usize;
    let wps: Vec<(f64, f64)> = (0..=n).map(|i| (5.0 * i as f64, 0.0)).collect();
    let scenario = Scenario {
        name: format!("straight-{speed_kmh}"),
        spline: PathSpline::build(&wps)?,
        edges: RoadEdges::constant(1.75, -5.25)?,
        obstacles: Vec::new(),
        v_ref: speed_kmh / 3.6,
        collision_prioritization: false,
        finish_s: length,
    };
    scenario.validate()?;
    Ok(scenario)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn reference_speed_from_entry_speed() {
        let s = dlc_scenario(55.0, false).unwrap();
        assert_relative_eq!(s.v_ref, 15.277_777_777_777_779, max_relative = 1e-12);
        assert!(!s.collision_prioritization);
        let p = dlc_scenario(65.0, true).unwrap();
        assert!(p.collision_prioritization);
        assert_relative_eq!(p.v_ref, 65.0 / 3.6);
    }

    #[test]
    fn obstacles_inside_corridor() {
        for prio in [false, true] {
            let s = dlc_scenario(60.0, prio).unwrap();
            assert_eq!(s.obstacles.len(), 2);
            for o in &s.obstacles {
                assert!(s.obstacle_inside_corridor(o));
            }
        }
    }

    #[test]
    fn rejects_out_of_range_speed() {
        assert!(dlc_scenario(20.0, false).is_err());
        assert!(dlc_scenario(130.0, false).is_err());
    }

    #[test]
    fn deterministic() {
        assert_eq!(dlc_scenario(70.0, true).unwrap(), dlc_scenario(70.0, true).unwrap());
    }

    #[test]
    fn file_round_trip() {
        let s = dlc_scenario(65.0, true).unwrap();
        let back = Scenario::from_toml_str(&s.to_toml_string()).unwrap();
        assert_eq!(back.obstacles, s.obstacles);
        assert_eq!(back.edges, s.edges);
        assert_relative_eq!(back.v_ref, s.v_ref, max_relative = 1e-12);
        assert_relative_eq!(back.spline.length(), s.spline.length(), max_relative = 1e-12);
    }

    #[test]
    fn parses_documented_example() {
        let text = r#"
            [path]
            waypoints = [[0.0, 0.0], [10.0, 0.0], [20.0, 0.0], [30.0, 0.0], [40.0, 0.0]]
            [edges]
            s_start = [0.0]
            left = [2.0]
            right = [-2.0]
            [obstacle.2]
            x = 30.0
            y = 0.5
            a = 1.0
            b = 0.5
            [obstacle.1]
            x = 20.0
            y = -0.5
            a = 1.0
            b = 0.5
            margin = 0.3
            [reference]
            speed_kmh = 36.0
        "#;
        let s = Scenario::from_toml_str(text).unwrap();
        assert_eq!(s.obstacles.len(), 2);
        assert_eq!(s.obstacles[0].x, 20.0);
        assert_eq!(s.obstacles[0].margin, 0.3);
        assert_relative_eq!(s.v_ref, 10.0);
        assert_relative_eq!(s.finish_s, 40.0, epsilon = 1e-6);
    }
}
