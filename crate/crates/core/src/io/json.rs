use super::{read_json, write_json, SCHEMA};
use crate::dist::{ModeParams, TwbModel};
use crate::error::{Error, Result};
use crate::histogram::JointHistogram;
use crate::reconstruct::{DerivedStatistics, FitFlags, FitOptions, ReconstructionResult};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Flat model document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema: String,
    pub mu_p: f64,
    pub b_p: f64,
    pub mu_s: f64,
    pub b_s: f64,
    pub mu_i: f64,
    pub b_i: f64,
    pub eta_s: f64,
    pub eta_i: f64,
}

impl From<&TwbModel<f64>> for ModelFile {
    fn from(m: &TwbModel<f64>) -> Self {
        Self {
            schema: SCHEMA.into(),
            mu_p: m.paired.mu,
            b_p: m.paired.b,
            mu_s: m.noise_s.mu,
            b_s: m.noise_s.b,
            mu_i: m.noise_i.mu,
            b_i: m.noise_i.b,
            eta_s: m.eta_s,
            eta_i: m.eta_i,
        }
    }
}

impl ModelFile {
    pub fn to_model(&self) -> Result<TwbModel<f64>> {
        let m = TwbModel {
            paired: ModeParams {
                mu: self.mu_p,
                b: self.b_p,
            },
            noise_s: ModeParams {
                mu: self.mu_s,
                b: self.b_s,
            },
            noise_i: ModeParams {
                mu: self.mu_i,
                b: self.b_i,
            },
            eta_s: self.eta_s,
            eta_i: self.eta_i,
        };
        m.validate()?;
        Ok(m)
    }
}

pub fn save_model(path: impl AsRef<Path>, m: &TwbModel<f64>) -> Result<()> {
    write_json(path.as_ref(), &ModelFile::from(m))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TwbModel<f64>> {
    read_json::<ModelFile>(path.as_ref())?.to_model()
}

/// Histogram document with explicit cutoffs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramFile {
    pub schema: String,
    pub shots: u64,
    pub rows: usize,
    pub cols: usize,
    pub counts: Vec<Vec<u64>>,
}

impl From<&JointHistogram> for HistogramFile {
    fn from(h: &JointHistogram) -> Self {
        let (rows, cols) = h.dim();
        Self {
            schema: SCHEMA.into(),
            shots: h.shots(),
            rows,
            cols,
            counts: h.counts().rows().into_iter().map(|r| r.to_vec()).collect(),
        }
    }
}

impl HistogramFile {
    pub fn to_histogram(&self) -> Result<JointHistogram> {
        if self.counts.len() != self.rows || self.counts.iter().any(|r| r.len() != self.cols) {
            return Err(Error::Validation {
                line: 0,
                message: format!("counts do not form a {} x {} matrix", self.rows, self.cols),
            });
        }
        let flat: Vec<u64> = self.counts.iter().flatten().copied().collect();
        let counts = Array2::from_shape_vec((self.rows, self.cols), flat).map_err(|e| Error::Validation {
            line: 0,
            message: e.to_string(),
        })?;
        let h = JointHistogram::from_counts(counts);
        if h.shots() != self.shots {
            return Err(Error::Validation {
                line: 0,
                message: format!("counts sum to {} but shots is {}", h.shots(), self.shots),
            });
        }
        Ok(h)
    }
}

pub fn save_histogram(path: impl AsRef<Path>, h: &JointHistogram) -> Result<()> {
    write_json(path.as_ref(), &HistogramFile::from(h))
}

pub fn load_histogram(path: impl AsRef<Path>) -> Result<JointHistogram> {
    read_json::<HistogramFile>(path.as_ref())?.to_histogram()
}

/// Reconstruction document: fitted model plus diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitFile {
    pub schema: String,
    pub model: ModelFile,
    pub residual: f64,
    pub evaluations: usize,
    pub converged_restarts: usize,
    pub flags: FitFlags,
    pub derived: DerivedStatistics,
    pub options: FitOptions,
}

impl FitFile {
    pub fn new(r: &ReconstructionResult, options: &FitOptions) -> Self {
        Self {
            schema: SCHEMA.into(),
            model: ModelFile::from(&r.model),
            residual: r.residual,
            evaluations: r.evaluations,
            converged_restarts: r.converged_restarts,
            flags: r.flags,
            derived: r.derived,
            options: options.clone(),
        }
    }

    /// Rebuilds the result, recomputing the photon distribution from the model.
    pub fn to_result(&self) -> Result<ReconstructionResult> {
        let model = self.model.to_model()?;
        let mut r = ReconstructionResult::from_model(model, self.residual, self.options.tail_tol)?;
        r.evaluations = self.evaluations;
        r.converged_restarts = self.converged_restarts;
        r.flags = self.flags;
        r.derived = self.derived;
        Ok(r)
    }
}

pub fn save_fit(path: impl AsRef<Path>, r: &ReconstructionResult, options: &FitOptions) -> Result<()> {
    write_json(path.as_ref(), &FitFile::new(r, options))
}

pub fn load_fit(path: impl AsRef<Path>) -> Result<FitFile> {
    let f: FitFile = read_json(path.as_ref())?;
    f.model.to_model()?;
    Ok(f)
}
