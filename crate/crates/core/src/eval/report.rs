//! CSV tables produced by a benchmark run.

use std::path::Path;

use crate::error::{Error, Result};
use crate::eval::metrics::{success_threshold, AttributeRow, EvalCurves};

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub tracker: String,
    pub sequences: usize,
    pub frames: usize,
    pub curves: EvalCurves,
}

fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let csv_err = |e: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    };
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// `tracker,sequences,frames,precision_at_20,success_at_0.5,auc`
pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.tracker.clone(),
                r.sequences.to_string(),
                r.frames.to_string(),
                r.curves.precision_at_20.to_string(),
                r.curves.success_at_half.to_string(),
                r.curves.auc.to_string(),
            ]
        })
        .collect();
    write_table(
        path,
        &["tracker", "sequences", "frames", "precision_at_20", "success_at_0.5", "auc"],
        &body,
    )
}

/// `tracker,attribute,sequences,mean_auc,mean_precision_at_20`; empty cells
/// for attributes no sequence carries.
pub fn write_attributes(path: &Path, rows: &[(String, Vec<AttributeRow>)]) -> Result<()> {
    let body: Vec<Vec<String>> = rows
        .iter()
        .flat_map(|(tracker, table)| {
            table.iter().map(move |r| {
                vec![
                    tracker.clone(),
                    r.attribute.to_string(),
                    r.sequences.to_string(),
                    opt(r.mean_auc),
                    opt(r.mean_precision_at_20),
                ]
            })
        })
        .collect();
    write_table(
        path,
        &["tracker", "attribute", "sequences", "mean_auc", "mean_precision_at_20"],
        &body,
    )
}

/// `threshold,value` rows for the precision curve (pixels).
pub fn write_precision_curve(path: &Path, curves: &EvalCurves) -> Result<()> {
    let body: Vec<Vec<String>> = curves
        .precision
        .iter()
        .enumerate()
        .map(|(t, v)| vec![t.to_string(), v.to_string()])
        .collect();
    write_table(path, &["threshold", "value"], &body)
}

/// `threshold,value` rows for the success curve (IoU).
pub fn write_success_curve(path: &Path, curves: &EvalCurves) -> Result<()> {
    let body: Vec<Vec<String>> = curves
        .success
        .iter()
        .enumerate()
        .map(|(k, v)| vec![success_threshold(k).to_string(), v.to_string()])
        .collect();
    write_table(path, &["threshold", "value"], &body)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::metrics::eval_curves;
    use crate::geometry::BoundingBox;

    #[test]
    fn tables_have_expected_shape() {
        let b = vec![BoundingBox::new(0.0, 0.0, 10.0, 10.0); 2];
        let c = eval_curves(&b, &b).unwrap();
        let tmp = tempfile::tempdir().unwrap();
        let summary = tmp.path().join("summary.csv");
        write_summary(
            &summary,
            &[SummaryRow {
                tracker: "MDRCF".into(),
                sequences: 1,
                frames: 2,
                curves: c.clone(),
            }],
        )
        .unwrap();
        let text = std::fs::read_to_string(&summary).unwrap();
        assert_eq!(
            text,
            format!(
                "tracker,sequences,frames,precision_at_20,success_at_0.5,auc\nMDRCF,1,2,1,1,{}\n",
                20.0 / 21.0
            )
        );
        let p = tmp.path().join("p.csv");
        write_precision_curve(&p, &c).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap().lines().count(), 52);
        let s = tmp.path().join("s.csv");
        write_success_curve(&s, &c).unwrap();
        let text = std::fs::read_to_string(&s).unwrap();
        assert_eq!(text.lines().nth(1), Some("0,1"));
        assert_eq!(text.lines().last(), Some("1,0"));
    }
}
