//! One-pass evaluation: dataset loading, metrics and result files.

pub mod metrics;
pub mod report;
pub mod results;
pub mod sequence;

pub use metrics::{
    aggregate_by_attribute, center_error, eval_curves, eval_sequence, iou, mean_curves,
    AttributeRow, EvalCurves, PRECISION_THRESHOLDS, SUCCESS_STEPS,
};
pub use report::{
    write_attributes, write_precision_curve, write_success_curve, write_summary, SummaryRow,
};
pub use results::{read_results, write_results, ResultFile};
pub use sequence::{load_dataset, load_manifest, load_sequence, Attribute, Sequence};
