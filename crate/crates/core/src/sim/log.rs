//! Per-tick run log and its CSV format.
//!
//! A log file starts with one comment line carrying the run metadata as
//! `key=value` pairs, followed by a CSV table with the columns of [`Tick`]
//! in declaration order:
//!
//! ```text
//! # lmpcc-runlog schema=1 scenario=dlc-55 variant=mpcc seed=0 dt=0.05 outcome=completed
//! time,x,y,psi,vx,vy,r,...
//! ```
//!
//! The `sigma_*_kN` columns hold the propagated standard deviations at
//! horizon stage N of that cycle.

use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mpcc::Variant;

pub const LOG_SCHEMA: u32 = 1;
const MAGIC: &str = "lmpcc-runlog";

/// Horizon stages whose sigmas are logged.
pub const SIGMA_STAGES: [usize; 5] = [0, 5, 10, 15, 19];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Completed,
    Collision,
    OffRoad,
    Divergence,
    Timeout,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Completed => "completed",
            Outcome::Collision => "collision",
            Outcome::OffRoad => "off-road",
            Outcome::Divergence => "divergence",
            Outcome::Timeout => "timeout",
        }
    }

    pub fn is_success(self) -> bool {
        self == Outcome::Completed
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Outcome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Outcome::Completed, Outcome::Collision, Outcome::OffRoad, Outcome::Divergence, Outcome::Timeout]
            .into_iter()
            .find(|o| o.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown outcome `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMeta {
    pub scenario: String,
    pub variant: Variant,
    pub seed: u64,
    pub dt: f64,
    pub outcome: Outcome,
}

/// One control tick. Plant quantities are truth; `meas_*` include sensor
/// noise; `nom_*` are what the prediction model expects for the same tick.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Tick {
    pub time: f64,
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub vx: f64,
    pub vy: f64,
    pub r: f64,
    /// Longitudinal and lateral acceleration [m/s^2].
    pub ax: f64,
    pub ay: f64,
    pub s: f64,
    pub e_con: f64,
    /// Command held at this tick.
    pub delta: f64,
    pub fx: f64,
    /// Road-wheel angle after the actuator.
    pub delta_actual: f64,
    pub meas_fy_f: f64,
    pub meas_fy_r: f64,
    pub meas_r: f64,
    pub nom_fy_f: f64,
    pub nom_fy_r: f64,
    pub nom_r: f64,
    /// Stage-0 correction and moment-matched variances.
    pub corr_fy_f: f64,
    pub corr_fy_r: f64,
    pub corr_r: f64,
    pub var_fy_f: f64,
    pub var_fy_r: f64,
    pub var_r: f64,
    pub sigma_vy_k0: f64,
    pub sigma_vy_k5: f64,
    pub sigma_vy_k10: f64,
    pub sigma_vy_k15: f64,
    pub sigma_vy_k19: f64,
    pub sigma_r_k0: f64,
    pub sigma_r_k5: f64,
    pub sigma_r_k10: f64,
    pub sigma_r_k15: f64,
    pub sigma_r_k19: f64,
    pub cost_obs: f64,
    pub cost_edg: f64,
    pub cost_d_delta: f64,
    pub cost_d_fx: f64,
    pub cost_con: f64,
    pub cost_lag: f64,
    pub cost_vel: f64,
    pub cost_sigma: f64,
    pub objective: f64,
    /// Largest per-stage uncertainty cost and the ceiling it must stay under.
    pub max_sigma_stage_cost: f64,
    pub sigma_ceiling: f64,
    /// Clearance of the plant to the nearest obstacle [m].
    pub clearance: f64,
    pub predicted_clearance: f64,
    pub priority: u8,
    pub status: String,
    pub iterations: usize,
    pub kkt: f64,
    pub fallback: u8,
}

impl Tick {
    pub fn set_sigmas(&mut self, sigmas: &[(f64, f64)]) {
        let get = |k: usize| sigmas.get(k).copied().unwrap_or((0.0, 0.0));
        let slots_vy = [
            &mut self.sigma_vy_k0,
            &mut self.sigma_vy_k5,
            &mut self.sigma_vy_k10,
            &mut self.sigma_vy_k15,
            &mut self.sigma_vy_k19,
        ];
        for (slot, k) in slots_vy.into_iter().zip(SIGMA_STAGES) {
            *slot = get(k).0;
        }
        let slots_r = [
            &mut self.sigma_r_k0,
            &mut self.sigma_r_k5,
            &mut self.sigma_r_k10,
            &mut self.sigma_r_k15,
            &mut self.sigma_r_k19,
        ];
        for (slot, k) in slots_r.into_iter().zip(SIGMA_STAGES) {
            *slot = get(k).1;
        }
    }

    pub fn sideslip(&self) -> f64 {
        (self.vy / self.vx).atan()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub meta: RunMeta,
    pub ticks: Vec<Tick>,
}

impl RunLog {
    /// Standard file name, `<scenario>_<variant>.csv`.
    pub fn file_name(&self) -> String {
        format!("{}_{}.csv", self.meta.scenario, self.meta.variant)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let m = &self.meta;
        writeln!(
            w,
            "# {MAGIC} schema={LOG_SCHEMA} scenario={} variant={} seed={} dt={} outcome={}",
            m.scenario, m.variant, m.seed, m.dt, m.outcome
        )?;
        let mut csv = csv::Writer::from_writer(w);
        if self.ticks.is_empty() {
            csv.write_record(column_names())?;
        }
        for t in &self.ticks {
            csv.serialize(t)?;
        }
        csv.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(file))
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut reader = BufReader::new(r);
        let mut first = String::new();
        reader.read_line(&mut first)?;
        let meta = parse_meta(first.trim_end())?;
        let mut csv = csv::Reader::from_reader(reader);
        let header = csv.headers()?.clone();
        if header.iter().ne(column_names().iter().map(String::as_str)) {
            return Err(Error::Parse("run log columns do not match the schema".into()));
        }
        let ticks = csv.deserialize().collect::<std::result::Result<Vec<Tick>, _>>()?;
        Ok(Self { meta, ticks })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(std::fs::File::open(path)?)
    }
}

fn parse_meta(line: &str) -> Result<RunMeta> {
    let bad = |why: &str| Error::Parse(format!("run log header: {why}"));
    let rest = line.strip_prefix("# ").and_then(|l| l.strip_prefix(MAGIC)).ok_or_else(|| bad("missing magic"))?;
    let mut fields = std::collections::HashMap::new();
    for kv in rest.split_whitespace() {
        let (k, v) = kv.split_once('=').ok_or_else(|| bad("malformed field"))?;
        fields.insert(k, v);
    }
    let get = |k: &str| fields.get(k).copied().ok_or_else(|| bad(&format!("missing `{k}`")));
    let schema: u32 = get("schema")?.parse().map_err(|_| bad("schema"))?;
    if schema != LOG_SCHEMA {
        return Err(bad(&format!("unsupported schema {schema}")));
    }
    Ok(RunMeta {
        scenario: get("scenario")?.to_string(),
        variant: get("variant")?.parse()?,
        seed: get("seed")?.parse().map_err(|_| bad("seed"))?,
        dt: get("dt")?.parse().map_err(|_| bad("dt"))?,
        outcome: get("outcome")?.parse()?,
    })
}

/// Column names in file order.
pub fn column_names() -> Vec<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.serialize(Tick::default()).expect("in-memory write");
    let bytes = w.into_inner().expect("in-memory flush");
    let text = String::from_utf8(bytes).expect("ascii header");
    text.lines().next().unwrap_or_default().split(',').map(str::to_string).collect()
}
