//! Merging per-feature response maps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::ColorProbabilityMap;
use crate::grid::Grid;

/// Upper bound on the merge factor so that the correlation-filter weight
/// `1 - lambda_hat` stays strictly above one half.
pub const MERGE_FACTOR_CEILING: f64 = 0.5 - 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergeBranch {
    LowAlpha,
    HighAlpha,
    Clamped,
}

impl MergeBranch {
    pub fn as_str(&self) -> &'static str {
        match self {
            MergeBranch::LowAlpha => "low_alpha",
            MergeBranch::HighAlpha => "high_alpha",
            MergeBranch::Clamped => "clamped",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergeFactor {
    pub lambda_hat: f64,
    /// Value before clamping to `[0, 0.5)`.
    pub raw: f64,
    pub branch: MergeBranch,
    pub mean_alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EamParams {
    pub h_hat: f64,
    pub phi: f64,
    pub epsilon: f64,
}

impl Default for EamParams {
    fn default() -> Self {
        EamParams {
            h_hat: 0.38,
            phi: 1.09,
            epsilon: 2.0,
        }
    }
}

/// `(1 - lambda_hat) * r_cf + lambda_hat * r_ch`.
pub fn fixed_merge(r_cf: &Grid, r_ch: &Grid, lambda_hat: f64) -> Result<Grid> {
    if r_cf.dims() != r_ch.dims() {
        return Err(Error::mismatch(r_cf.dims(), r_ch.dims()));
    }
    if !(0.0..=1.0).contains(&lambda_hat) {
        return Err(Error::invalid(format!(
            "merge factor must lie in [0, 1], got {lambda_hat}"
        )));
    }
    let data = r_cf
        .as_slice()
        .iter()
        .zip(r_ch.as_slice())
        .map(|(a, b)| (1.0 - lambda_hat) * a + lambda_hat * b)
        .collect();
    Grid::new(r_cf.width(), r_cf.height(), data)
}

/// Raw exponential merge factor for a mean target probability (no clamping).
pub fn eam_raw(mean_alpha: f64, p: &EamParams) -> (f64, MergeBranch) {
    if mean_alpha < p.h_hat {
        (mean_alpha.exp() - p.phi, MergeBranch::LowAlpha)
    } else {
        ((-mean_alpha).exp() / p.epsilon, MergeBranch::HighAlpha)
    }
}

/// Exponential adaptive merge factor from the mean of the per-pixel target
/// probabilities, clamped to `[0, 0.5)`.
pub fn eam_factor(alpha_map: &ColorProbabilityMap, params: &EamParams) -> Result<MergeFactor> {
    if alpha_map.values.is_empty() {
        return Err(Error::Empty("color probability map"));
    }
    if alpha_map.values.iter().any(|a| !(0.0..=1.0).contains(a)) {
        return Err(Error::invalid("target probabilities must lie in [0, 1]"));
    }
    Ok(eam_from_mean(alpha_map.mean(), params))
}

pub fn eam_from_mean(mean_alpha: f64, params: &EamParams) -> MergeFactor {
    let (raw, branch) = eam_raw(mean_alpha, params);
    let clamped = raw.clamp(0.0, MERGE_FACTOR_CEILING);
    MergeFactor {
        lambda_hat: clamped,
        raw,
        branch: if clamped != raw { MergeBranch::Clamped } else { branch },
        mean_alpha,
    }
}

/// Normalized weighted sum; every response is first resampled onto the grid
/// of the first one.
pub fn merge_tracker_responses(responses: &[Grid], weights: &[f64]) -> Result<Grid> {
    let first = responses.first().ok_or(Error::Empty("no responses to merge"))?;
    if responses.len() != weights.len() {
        return Err(Error::mismatch(responses.len(), weights.len()));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::invalid("merge weights must be non-negative"));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::invalid("merge weights must not all be zero"));
    }
    let (w, h) = first.dims();
    let mut acc = vec![0.0; w * h];
    for (r, &wt) in responses.iter().zip(weights) {
        let r = r.resample(w, h);
        for (a, v) in acc.iter_mut().zip(r.as_slice()) {
            *a += wt * v;
        }
    }
    acc.iter_mut().for_each(|a| *a /= total);
    Grid::new(w, h, acc)
}
