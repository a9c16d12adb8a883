use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::dataset::{feature_moments, standardize, Channel, Features, MismatchDataset, FEATURE_DIM, FEATURE_NAMES};
use super::fit::{fit_process, FitOptions, FitReport, Process};
use super::kernel::KernelHyper;
use super::regression::{moment_match_gaussian, Posterior, StpModel};
use crate::error::{Error, Result};

pub const MODEL_FORMAT: &str = "lmpcc-mismatch-model";
pub const MODEL_VERSION: u32 = 1;

/// Maps raw features and targets to the units the regression runs in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub feature_mean: Features,
    pub feature_std: Features,
    pub target_scale: f64,
}

impl Normalization {
    pub fn from_data(inputs: &[Features], targets: &[f64], floor: f64) -> Self {
        let (feature_mean, feature_std) = feature_moments(inputs);
        let n = targets.len().max(1) as f64;
        let rms = (targets.iter().map(|t| t * t).sum::<f64>() / n).sqrt();
        Self { feature_mean, feature_std, target_scale: rms.max(floor) }
    }

    pub fn features(&self, z: &Features) -> Features {
        standardize(z, &self.feature_mean, &self.feature_std)
    }
}

/// A fitted regression model for one mismatch channel, in physical units.
#[derive(Debug, Clone)]
pub struct ChannelModel {
    pub channel: Channel,
    pub process: Process,
    pub normalization: Normalization,
    raw_inputs: Vec<Features>,
    raw_targets: Vec<f64>,
    model: StpModel,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    channel: Channel,
    process: Process,
    /// Absent for a Gaussian process.
    nu: Option<f64>,
    hyper: KernelHyper,
    normalization: Normalization,
    feature_names: Vec<String>,
    inputs: Vec<Features>,
    targets: Vec<f64>,
    log_likelihood: f64,
}

impl ChannelModel {
    /// Fits one channel on (at most `m_max` rows of) `dataset`.
    pub fn fit(
        dataset: &MismatchDataset,
        channel: Channel,
        process: Process,
        m_max: usize,
        opts: &FitOptions,
    ) -> Result<(Self, FitReport)> {
        if dataset.is_empty() {
            return Err(Error::InvalidInput("empty training set".into()));
        }
        dataset.validate()?;
        let data = dataset.decimate(m_max);
        let targets = data.targets(channel).to_vec();
        let normalization = Normalization::from_data(&data.inputs, &targets, channel.scale_floor());
        let (z, y) = normalized_arrays(&normalization, &data.inputs, &targets);
        let report = fit_process(&z, &y, process, opts)?;
        let model = report.model.clone();
        Ok((Self { channel, process, normalization, raw_inputs: data.inputs, raw_targets: targets, model }, report))
    }

    /// Builds a model with given hyperparameters (normalized units) without fitting.
    pub fn from_parts(
        channel: Channel,
        normalization: Normalization,
        inputs: Vec<Features>,
        targets: Vec<f64>,
        hyper: KernelHyper,
        nu: f64,
    ) -> Result<Self> {
        if hyper.dim() != FEATURE_DIM {
            return Err(Error::param("lengthscales", format!("expected {FEATURE_DIM} lengthscales")));
        }
        let (z, y) = normalized_arrays(&normalization, &inputs, &targets);
        let model = StpModel::new(z, y, hyper, nu)?;
        let process = if nu.is_infinite() { Process::Gaussian } else { Process::StudentT };
        Ok(Self { channel, process, normalization, raw_inputs: inputs, raw_targets: targets, model })
    }

    pub fn regression(&self) -> &StpModel {
        &self.model
    }

    pub fn training_inputs(&self) -> &[Features] {
        &self.raw_inputs
    }

    pub fn training_targets(&self) -> &[f64] {
        &self.raw_targets
    }

    pub fn predict(&self, z: &Features) -> Posterior {
        let p = self.model.stp_posterior(&self.normalization.features(z));
        let s = self.normalization.target_scale;
        Posterior { mean: p.mean * s, variance: p.variance * s * s, dof: p.dof }
    }

    /// Moment-matched Gaussian variance at `z`.
    pub fn gaussian_variance(&self, z: &Features) -> f64 {
        moment_match_gaussian(&self.predict(z)).expect("fitted dof exceeds 2")
    }

    /// Posterior mean, moment-matched variance and their gradients with
    /// respect to the raw features.
    pub fn predict_with_gradient(&self, z: &Features) -> (f64, f64, Features, Features) {
        let zn = self.normalization.features(z);
        let (p, dm, dv) = self.model.posterior_with_gradient(&zn);
        let s = self.normalization.target_scale;
        let inflation = if p.dof.is_infinite() { 1.0 } else { p.dof / (p.dof - 2.0) };
        let std = &self.normalization.feature_std;
        let dmean = std::array::from_fn(|j| dm[j] * s / std[j]);
        let dvar = std::array::from_fn(|j| dv[j] * s * s * inflation / std[j]);
        (p.mean * s, p.variance * s * s * inflation, dmean, dvar)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            channel: self.channel,
            process: self.process,
            nu: (!self.model.is_gaussian()).then_some(self.model.nu()),
            hyper: self.model.hyper().clone(),
            normalization: self.normalization,
            feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            inputs: self.raw_inputs.clone(),
            targets: self.raw_targets.clone(),
            log_likelihood: self.model.log_marginal_likelihood(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format != MODEL_FORMAT {
            return Err(Error::Parse(format!("unexpected model format `{}`", file.format)));
        }
        if file.version != MODEL_VERSION {
            return Err(Error::Parse(format!("unsupported model version {}", file.version)));
        }
        if file.inputs.len() != file.targets.len() {
            return Err(Error::Parse("model inputs and targets differ in length".into()));
        }
        let nu = match (file.process, file.nu) {
            (Process::Gaussian, None) => f64::INFINITY,
            (Process::StudentT, Some(nu)) => nu,
            _ => return Err(Error::Parse("`nu` must be present exactly for student_t models".into())),
        };
        let mut m = Self::from_parts(file.channel, file.normalization, file.inputs, file.targets, file.hyper, nu)?;
        m.process = file.process;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::ModelFile { path: path.to_path_buf(), reason: e.to_string() })?;
        Self::from_json(&text).map_err(|e| Error::ModelFile { path: path.to_path_buf(), reason: e.to_string() })
    }
}

fn normalized_arrays(norm: &Normalization, inputs: &[Features], targets: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
    let n = inputs.len();
    let z = DMatrix::from_fn(n, FEATURE_DIM, |i, j| norm.features(&inputs[i])[j]);
    let y = DVector::from_iterator(n, targets.iter().map(|t| t / norm.target_scale));
    (z, y)
}

/// The three per-channel models a learning controller uses.
#[derive(Debug, Clone)]
pub struct MismatchModels {
    pub dfy_f: ChannelModel,
    pub dfy_r: ChannelModel,
    pub dr: ChannelModel,
}

impl MismatchModels {
    pub fn new(dfy_f: ChannelModel, dfy_r: ChannelModel, dr: ChannelModel) -> Result<Self> {
        for (m, c) in [(&dfy_f, Channel::DfyF), (&dfy_r, Channel::DfyR), (&dr, Channel::Dr)] {
            if m.channel != c {
                return Err(Error::InvalidInput(format!("expected a {c} model, got {}", m.channel)));
            }
        }
        if dfy_f.process != dfy_r.process || dfy_f.process != dr.process {
            return Err(Error::InvalidInput("channel models mix process kinds".into()));
        }
        Ok(Self { dfy_f, dfy_r, dr })
    }

    pub fn process(&self) -> Process {
        self.dfy_f.process
    }

    pub fn get(&self, channel: Channel) -> &ChannelModel {
        match channel {
            Channel::DfyF => &self.dfy_f,
            Channel::DfyR => &self.dfy_r,
            Channel::Dr => &self.dr,
        }
    }

    /// Fits all three channels.
    pub fn fit(dataset: &MismatchDataset, process: Process, m_max: usize, opts: &FitOptions) -> Result<Self> {
        let fit = |c| ChannelModel::fit(dataset, c, process, m_max, opts).map(|(m, _)| m);
        Self::new(fit(Channel::DfyF)?, fit(Channel::DfyR)?, fit(Channel::Dr)?)
    }
}
