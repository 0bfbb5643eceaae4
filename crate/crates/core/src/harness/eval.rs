use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::WnoModel;
use crate::physics::ProblemSpec;
use crate::problems::Dataset;

/// `‖pred − truth‖² / ‖truth‖²`, or `None` for an all-zero truth.
pub fn relative_mse(pred: &[f64], truth: &[f64]) -> Option<f64> {
    let den: f64 = truth.iter().map(|t| t * t).sum();
    if den == 0.0 {
        return None;
    }
    let num: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Some(num / den)
}

/// Relative errors over a test set. `mean` and `std` are ratios over the
/// included samples (population standard deviation).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_sample: Vec<Option<f64>>,
    pub mean: f64,
    pub std: f64,
    pub excluded: usize,
}

impl EvalReport {
    pub fn from_values(per_sample: Vec<Option<f64>>) -> Result<Self> {
        let vals: Vec<f64> = per_sample.iter().flatten().copied().collect();
        if vals.is_empty() {
            return Err(Error::InvalidArgument("no sample with a nonzero reference norm".into()));
        }
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let std = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        let excluded = per_sample.len() - vals.len();
        if excluded > 0 {
            log::warn!("{excluded} sample(s) with zero reference norm excluded from relative error");
        }
        Ok(Self { per_sample, mean, std, excluded })
    }

    pub fn mean_pct(&self) -> f64 {
        100.0 * self.mean
    }

    pub fn std_pct(&self) -> f64 {
        100.0 * self.std
    }

    pub fn summary(&self) -> String {
        format!("{:.4} ± {:.4} %", self.mean_pct(), self.std_pct())
    }
}

/// Network output `[points, out_channels]` for one raw input sample.
pub fn predict_raw(model: &WnoModel, spec: &ProblemSpec, raw: &[f64]) -> Result<Vec<f64>> {
    model.predict(&spec.encode(raw)?)
}

/// Relative MSE of `model` over every sample of `data`.
pub fn evaluate(model: &WnoModel, spec: &ProblemSpec, data: &Dataset) -> Result<EvalReport> {
    if data.problem() != spec.id {
        return Err(Error::Config(format!("dataset is {}, model is {}", data.problem(), spec.id)));
    }
    if !data.has_solutions() {
        return Err(Error::Config("evaluation needs a dataset with solutions".into()));
    }
    let per: Vec<Option<f64>> = (0..data.count)
        .into_par_iter()
        .map(|k| {
            let pred = predict_raw(model, spec, data.input(k))?;
            Ok(relative_mse(&pred, data.solution(k).expect("checked above")))
        })
        .collect::<Result<_>>()?;
    EvalReport::from_values(per)
}
