//! Precision and success curves.
//!
//! Success at threshold `t` counts frames with IoU strictly greater than `t`,
//! so a perfect run scores 0 at `t = 1` and its AUC over the 21-point grid is
//! `20 / 21`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::sequence::{Attribute, Sequence};
use crate::geometry::BoundingBox;

/// Center-error thresholds 0..=50 px.
pub const PRECISION_THRESHOLDS: usize = 51;
/// IoU thresholds `k / 20` for `k` in 0..=20.
pub const SUCCESS_STEPS: usize = 21;

pub fn center_error(pred: &BoundingBox, gt: &BoundingBox) -> f64 {
    let (a, b) = (pred.center(), gt.center());
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

pub fn iou(pred: &BoundingBox, gt: &BoundingBox) -> f64 {
    let inter = pred.intersection_area(gt);
    let union = pred.area() + gt.area() - inter;
    if union > 0.0 {
        (inter / union).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

pub fn success_threshold(k: usize) -> f64 {
    k as f64 / (SUCCESS_STEPS - 1) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalCurves {
    /// Fraction of frames with center error `<= t` px, `t = 0..=50`.
    pub precision: Vec<f64>,
    /// Fraction of frames with IoU `> k / 20`, `k = 0..=20`.
    pub success: Vec<f64>,
    pub precision_at_20: f64,
    pub success_at_half: f64,
    pub auc: f64,
}

impl EvalCurves {
    fn from_curves(precision: Vec<f64>, success: Vec<f64>) -> Self {
        let auc = success.iter().sum::<f64>() / success.len() as f64;
        EvalCurves {
            precision_at_20: precision[20],
            success_at_half: success[SUCCESS_STEPS / 2],
            auc,
            precision,
            success,
        }
    }
}

pub fn eval_curves(preds: &[BoundingBox], gts: &[BoundingBox]) -> Result<EvalCurves> {
    if preds.len() != gts.len() {
        return Err(Error::mismatch(gts.len(), preds.len()));
    }
    if preds.is_empty() {
        return Err(Error::Empty("evaluation frames"));
    }
    let n = preds.len() as f64;
    let errors: Vec<f64> = preds.iter().zip(gts).map(|(p, g)| center_error(p, g)).collect();
    let overlaps: Vec<f64> = preds.iter().zip(gts).map(|(p, g)| iou(p, g)).collect();
    let precision = (0..PRECISION_THRESHOLDS)
        .map(|t| errors.iter().filter(|&&e| e <= t as f64).count() as f64 / n)
        .collect();
    let success = (0..SUCCESS_STEPS)
        .map(|k| {
            let t = success_threshold(k);
            overlaps.iter().filter(|&&o| o > t).count() as f64 / n
        })
        .collect();
    Ok(EvalCurves::from_curves(precision, success))
}

/// Curves over the annotated frames only.
pub fn eval_sequence(preds: &[BoundingBox], gts: &[Option<BoundingBox>]) -> Result<EvalCurves> {
    if preds.len() != gts.len() {
        return Err(Error::mismatch(gts.len(), preds.len()));
    }
    let (p, g): (Vec<BoundingBox>, Vec<BoundingBox>) = preds
        .iter()
        .zip(gts)
        .filter_map(|(p, g)| g.map(|g| (*p, g)))
        .unzip();
    eval_curves(&p, &g)
}

/// Point-wise mean of several runs' curves, each run weighted equally.
pub fn mean_curves(curves: &[&EvalCurves]) -> Result<EvalCurves> {
    if curves.is_empty() {
        return Err(Error::Empty("curve list"));
    }
    let n = curves.len() as f64;
    let mean = |f: fn(&EvalCurves) -> &Vec<f64>, len: usize| -> Vec<f64> {
        (0..len)
            .map(|i| curves.iter().map(|c| f(c)[i]).sum::<f64>() / n)
            .collect()
    };
    Ok(EvalCurves::from_curves(
        mean(|c| &c.precision, PRECISION_THRESHOLDS),
        mean(|c| &c.success, SUCCESS_STEPS),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeRow {
    pub attribute: Attribute,
    pub sequences: usize,
    /// `None` when no sequence carries the tag.
    pub mean_auc: Option<f64>,
    pub mean_precision_at_20: Option<f64>,
}

/// Mean AUC and precision per attribute. `results[i]` belongs to
/// `sequences[i]`.
pub fn aggregate_by_attribute(results: &[EvalCurves], sequences: &[Sequence]) -> Result<Vec<AttributeRow>> {
    if results.len() != sequences.len() {
        return Err(Error::mismatch(sequences.len(), results.len()));
    }
    Ok(Attribute::ALL
        .into_iter()
        .map(|attribute| {
            let tagged: Vec<&EvalCurves> = results
                .iter()
                .zip(sequences)
                .filter(|(_, s)| s.attributes.contains(&attribute))
                .map(|(r, _)| r)
                .collect();
            let n = tagged.len();
            let mean = |f: fn(&EvalCurves) -> f64| {
                (n > 0).then(|| tagged.iter().map(|c| f(c)).sum::<f64>() / n as f64)
            };
            AttributeRow {
                attribute,
                sequences: n,
                mean_auc: mean(|c| c.auc),
                mean_precision_at_20: mean(|c| c.precision_at_20),
            }
        })
        .collect())
}
