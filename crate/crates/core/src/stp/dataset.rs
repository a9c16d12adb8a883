use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FEATURE_DIM: usize = 6;

/// `[v_x, delta, F_x, r, F_yF, F_yR]`.
pub type Features = [f64; FEATURE_DIM];

pub const FEATURE_NAMES: [&str; FEATURE_DIM] = ["vx", "delta", "fx", "r", "fy_f", "fy_r"];

/// Default cap on the number of training rows per channel.
pub const DEFAULT_M_MAX: usize = 150;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Channel {
    #[serde(rename = "dfyf")]
    DfyF,
    #[serde(rename = "dfyr")]
    DfyR,
    #[serde(rename = "dr")]
    Dr,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::DfyF, Channel::DfyR, Channel::Dr];

    pub fn as_str(self) -> &'static str {
        match self {
            Channel::DfyF => "dfyf",
            Channel::DfyR => "dfyr",
            Channel::Dr => "dr",
        }
    }

    /// Smallest target scale used for normalization, in channel units.
    pub(crate) fn scale_floor(self) -> f64 {
        match self {
            Channel::DfyF | Channel::DfyR => 1e-3,
            Channel::Dr => 1e-8,
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Channel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dfyf" => Ok(Channel::DfyF),
            "dfyr" => Ok(Channel::DfyR),
            "dr" => Ok(Channel::Dr),
            other => Err(Error::Parse(format!("unknown channel `{other}` (expected dfyf, dfyr or dr)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MismatchSample {
    pub features: Features,
    pub dfy_f: f64,
    pub dfy_r: f64,
    pub dr: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MismatchDataset {
    pub inputs: Vec<Features>,
    pub dfy_f: Vec<f64>,
    pub dfy_r: Vec<f64>,
    pub dr: Vec<f64>,
    /// Index into `runs` for each row.
    pub source: Vec<usize>,
    pub runs: Vec<String>,
}

impl MismatchDataset {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn push_run(&mut self, name: impl Into<String>, samples: impl IntoIterator<Item = MismatchSample>) {
        let run = self.runs.len();
        self.runs.push(name.into());
        for s in samples {
            self.inputs.push(s.features);
            self.dfy_f.push(s.dfy_f);
            self.dfy_r.push(s.dfy_r);
            self.dr.push(s.dr);
            self.source.push(run);
        }
    }

    pub fn targets(&self, channel: Channel) -> &[f64] {
        match channel {
            Channel::DfyF => &self.dfy_f,
            Channel::DfyR => &self.dfy_r,
            Channel::Dr => &self.dr,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.inputs.len();
        if self.dfy_f.len() != n || self.dfy_r.len() != n || self.dr.len() != n || self.source.len() != n {
            return Err(Error::InvalidInput("dataset columns have inconsistent lengths".into()));
        }
        if self.source.iter().any(|&r| r >= self.runs.len()) {
            return Err(Error::InvalidInput("dataset row refers to an unknown run".into()));
        }
        let finite = self.inputs.iter().flatten().chain(&self.dfy_f).chain(&self.dfy_r).chain(&self.dr);
        if !finite.into_iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("dataset contains non-finite entries".into()));
        }
        Ok(())
    }

    pub fn subset(&self, rows: &[usize]) -> Self {
        Self {
            inputs: rows.iter().map(|&i| self.inputs[i]).collect(),
            dfy_f: rows.iter().map(|&i| self.dfy_f[i]).collect(),
            dfy_r: rows.iter().map(|&i| self.dfy_r[i]).collect(),
            dr: rows.iter().map(|&i| self.dr[i]).collect(),
            source: rows.iter().map(|&i| self.source[i]).collect(),
            runs: self.runs.clone(),
        }
    }

    /// At most `m_max` rows chosen by farthest-point selection in z-scored
    /// feature space. Returns a copy when already small enough.
    pub fn decimate(&self, m_max: usize) -> Self {
        if self.len() <= m_max {
            return self.clone();
        }
        let (mean, std) = feature_moments(&self.inputs);
        let normalized: Vec<Features> = self.inputs.iter().map(|z| standardize(z, &mean, &std)).collect();
        self.subset(&farthest_point_indices(&normalized, m_max))
    }
}

pub(crate) fn feature_moments(rows: &[Features]) -> (Features, Features) {
    let n = rows.len().max(1) as f64;
    let mut mean = [0.0; FEATURE_DIM];
    for z in rows {
        for j in 0..FEATURE_DIM {
            mean[j] += z[j] / n;
        }
    }
    let mut std = [0.0; FEATURE_DIM];
    for z in rows {
        for j in 0..FEATURE_DIM {
            std[j] += (z[j] - mean[j]).powi(2) / n;
        }
    }
    for s in &mut std {
        *s = if *s > 1e-24 { s.sqrt() } else { 1.0 };
    }
    (mean, std)
}

pub(crate) fn standardize(z: &Features, mean: &Features, std: &Features) -> Features {
    std::array::from_fn(|j| (z[j] - mean[j]) / std[j])
}

/// Greedy farthest-point selection of `m` rows. Starts from the row
/// farthest from the centroid; ties resolve to the lowest index.
pub fn farthest_point_indices(rows: &[Features], m: usize) -> Vec<usize> {
    let n = rows.len();
    if m >= n {
        return (0..n).collect();
    }
    if m == 0 {
        return Vec::new();
    }
    let d2 = |a: &Features, b: &Features| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
    let (centroid, _) = feature_moments(rows);
    let argmax = |v: &[f64]| {
        let mut best = 0;
        for i in 1..v.len() {
            if v[i] > v[best] {
                best = i;
            }
        }
        best
    };
    let from_centroid: Vec<f64> = rows.iter().map(|z| d2(z, &centroid)).collect();
    let first = argmax(&from_centroid);
    let mut chosen = vec![first];
    let mut nearest: Vec<f64> = rows.iter().map(|z| d2(z, &rows[first])).collect();
    while chosen.len() < m {
        let next = argmax(&nearest);
        chosen.push(next);
        for (i, z) in rows.iter().enumerate() {
            nearest[i] = nearest[i].min(d2(z, &rows[next]));
        }
    }
    chosen.sort_unstable();
    chosen
}
