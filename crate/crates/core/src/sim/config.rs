//! Run configuration.
//!
//! A run is described by one TOML file. Every section and key is optional;
//! missing values take the defaults shown here.
//!
//! ```toml
//! version = 1
//! variant = "lmpcc-stp"     # mpcc | lmpcc-gp | lmpcc-stp
//! seed = 0
//! timeout = 30.0            # simulated seconds
//!
//! [scenario]
//! kind = "dlc-priority"     # dlc | dlc-priority | straight | file
//! speed_kmh = 65.0
//! # path = "scenario.toml"  # kind = "file" only
//! # length = 150.0          # kind = "straight" only
//!
//! [noise]
//! enabled = true
//! force_std = 50.0          # N, on both axle forces
//! yaw_rate_std = 0.005      # rad/s
//!
//! [vehicle]                 # mass, yaw_inertia, lf, lr, drag_coeff,
//!                           # fx_front_ratio, mu, width
//! [fiala]                   # prediction-model tyres: c_alpha_f, c_alpha_r, fz_f, fz_r
//!
//! [plant]
//! substeps = 5
//! [plant.tyres]
//! tyre = "pacejka"          # or "fiala" with the [fiala] keys for a zero-mismatch plant
//! relax_length = 0.5
//! steer_tau = 0.06
//! front = { b = 6.33, c = 1.45, d = 8284.0, e = -0.3 }
//! rear = { b = 8.77, c = 1.6, d = 5275.6, e = -0.3 }
//!
//! [controller]              # horizon, prob_horizon, dt, hinge_blend, edge_margin
//! [controller.weights]      # e_obs, e_edg, d_delta, d_fx, e_con, e_lag, e_vel, sigma_vy, sigma_r
//! [controller.bounds]       # delta, delta_rate, fx, fx_rate, vx as [lo, hi]; progress_rate_factor
//! [controller.priority]     # activate_below, hysteresis, obstacle_multiplier, tracking_multiplier
//! [controller.solver]       # max_iterations, kkt_tolerance, regularization, armijo, max_backtracks
//!
//! [models]                  # learning variants only; files written by `train-stp`
//! dfyf = "models/stp-dfyf.json"
//! dfyr = "models/stp-dfyr.json"
//! dr = "models/stp-dr.json"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mpcc::{OcpConfig, Variant};
use crate::stp::{ChannelModel, MismatchModels, Process};
use crate::track::{dlc_scenario, straight_scenario, Scenario};
use crate::vehicle::{FialaParams, Plant, PlantTyres, PredictionModel, VehicleParams, DEFAULT_V_EPS};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Dlc,
    DlcPriority,
    Straight,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub speed_kmh: f64,
    pub path: Option<PathBuf>,
    pub length: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self { kind: ScenarioKind::Dlc, speed_kmh: 55.0, path: None, length: 150.0 }
    }
}

impl ScenarioConfig {
    pub fn dlc(speed_kmh: f64, priority: bool) -> Self {
        let kind = if priority { ScenarioKind::DlcPriority } else { ScenarioKind::Dlc };
        Self { kind, speed_kmh, ..Default::default() }
    }

    pub fn build(&self) -> Result<Scenario> {
        match self.kind {
            ScenarioKind::Dlc => dlc_scenario(self.speed_kmh, false),
            ScenarioKind::DlcPriority => dlc_scenario(self.speed_kmh, true),
            ScenarioKind::Straight => straight_scenario(self.speed_kmh, self.length),
            ScenarioKind::File => {
                let path =
                    self.path.as_ref().ok_or_else(|| Error::param("scenario.path", "required for kind = \"file\""))?;
                Scenario::load(path)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub enabled: bool,
    /// Standard deviation on each axle force [N].
    pub force_std: f64,
    /// Standard deviation on the yaw rate [rad/s].
    pub yaw_rate_std: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { enabled: true, force_std: 50.0, yaw_rate_std: 0.005 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantConfig {
    pub tyres: PlantTyres,
    pub substeps: usize,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self { tyres: PlantTyres::default(), substeps: 5 }
    }
}

/// Files holding the three trained channel models.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelPaths {
    pub dfyf: PathBuf,
    pub dfyr: PathBuf,
    pub dr: PathBuf,
}

impl ModelPaths {
    /// `<dir>/<process>-<channel>.json`, the layout `train-stp` uses by default.
    pub fn in_dir(dir: impl AsRef<Path>, process: Process) -> Self {
        let dir = dir.as_ref();
        let tag = process_tag(process);
        Self {
            dfyf: dir.join(format!("{tag}-dfyf.json")),
            dfyr: dir.join(format!("{tag}-dfyr.json")),
            dr: dir.join(format!("{tag}-dr.json")),
        }
    }

    pub fn load(&self) -> Result<MismatchModels> {
        MismatchModels::new(
            ChannelModel::load(&self.dfyf)?,
            ChannelModel::load(&self.dfyr)?,
            ChannelModel::load(&self.dr)?,
        )
    }
}

pub fn process_tag(process: Process) -> &'static str {
    match process {
        Process::StudentT => "stp",
        Process::Gaussian => "gp",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub variant: Variant,
    pub seed: u64,
    /// Simulated time limit [s].
    pub timeout: f64,
    pub scenario: ScenarioConfig,
    pub noise: NoiseConfig,
    pub vehicle: VehicleParams,
    pub fiala: FialaParams,
    pub plant: PlantConfig,
    pub controller: OcpConfig,
    pub models: Option<ModelPaths>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            variant: Variant::Mpcc,
            seed: 0,
            timeout: 30.0,
            scenario: ScenarioConfig::default(),
            noise: NoiseConfig::default(),
            vehicle: VehicleParams::default(),
            fiala: FialaParams::default(),
            plant: PlantConfig::default(),
            controller: OcpConfig::default(),
            models: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        if cfg.version != CONFIG_VERSION {
            return Err(Error::Parse(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                cfg.version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// The plant exactly equal to the prediction model.
    pub fn with_nominal_plant(mut self) -> Self {
        self.plant.tyres = PlantTyres::Fiala(self.fiala);
        self
    }

    pub fn prediction_model(&self) -> PredictionModel {
        PredictionModel { vehicle: self.vehicle, fiala: self.fiala, v_eps: DEFAULT_V_EPS }
    }

    pub fn plant(&self) -> Plant {
        Plant { vehicle: self.vehicle, tyres: self.plant.tyres, substeps: self.plant.substeps, v_eps: DEFAULT_V_EPS }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.timeout > 0.0) {
            return Err(Error::param("timeout", "must be strictly positive"));
        }
        if self.noise.enabled && !(self.noise.force_std >= 0.0 && self.noise.yaw_rate_std >= 0.0) {
            return Err(Error::param("noise", "standard deviations must be non-negative"));
        }
        self.prediction_model().validate()?;
        self.plant().validate()?;
        self.controller.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::from_toml_str("").unwrap(), RunConfig::default());
    }

    #[test]
    fn round_trip() {
        let mut c = RunConfig::default();
        c.variant = Variant::LmpccGp;
        c.scenario = ScenarioConfig::dlc(62.5, true);
        c.controller.weights.e_obs = 321.0;
        c.models = Some(ModelPaths::in_dir("m", Process::Gaussian));
        let text = c.to_toml_string().unwrap();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), c);
    }

    #[test]
    fn rejects_unknown_keys_and_versions() {
        assert!(RunConfig::from_toml_str("colour = 3").is_err());
        assert!(RunConfig::from_toml_str("version = 7").is_err());
        assert!(RunConfig::from_toml_str("[scenario]\nkind = \"oval\"").is_err());
    }

    #[test]
    fn nominal_plant_uses_prediction_tyres() {
        let c = RunConfig::default().with_nominal_plant();
        assert_eq!(c.plant.tyres, PlantTyres::Fiala(c.fiala));
    }
}
