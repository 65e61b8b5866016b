//! Per-frame result files.
//!
//! ```text
//! # config_hash=<sha256 hex>
//! frame,x,y,w,h,scale,v_m,v_p,v_s,psmd,update_flag,lambda_hat,branch
//! 1,9,19,30,40,1,,,,,true,,
//! ```
//! Empty fields are absent values.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::MergeBranch;
use crate::geometry::BoundingBox;
use crate::tracker::FrameRecord;

const HASH_PREFIX: &str = "# config_hash=";

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    frame: usize,
    x: f64,
    y: f64,
    w: f64,
    h: f64,
    scale: f64,
    v_m: Option<f64>,
    v_p: Option<f64>,
    v_s: Option<f64>,
    psmd: Option<f64>,
    update_flag: bool,
    lambda_hat: Option<f64>,
    branch: Option<MergeBranch>,
}

impl From<&FrameRecord> for Row {
    fn from(r: &FrameRecord) -> Self {
        Row {
            frame: r.frame,
            x: r.bbox.x,
            y: r.bbox.y,
            w: r.bbox.w,
            h: r.bbox.h,
            scale: r.scale,
            v_m: r.v_m,
            v_p: r.v_p,
            v_s: r.v_s,
            psmd: r.psmd,
            update_flag: r.update_flag,
            lambda_hat: r.lambda_hat,
            branch: r.branch,
        }
    }
}

impl From<Row> for FrameRecord {
    fn from(r: Row) -> Self {
        FrameRecord {
            frame: r.frame,
            bbox: BoundingBox::new(r.x, r.y, r.w, r.h),
            scale: r.scale,
            v_m: r.v_m,
            v_p: r.v_p,
            v_s: r.v_s,
            psmd: r.psmd,
            update_flag: r.update_flag,
            lambda_hat: r.lambda_hat,
            branch: r.branch,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultFile {
    pub config_hash: Option<String>,
    pub records: Vec<FrameRecord>,
    /// Set when the stored hash differs from the one the caller expected.
    pub hash_warning: Option<String>,
}

pub fn write_results(path: &Path, records: &[FrameRecord], config_hash: &str) -> Result<()> {
    let csv_err = |e: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut buf = Vec::new();
    writeln!(buf, "{HASH_PREFIX}{config_hash}").map_err(|e| Error::io(path, e))?;
    {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(&mut buf);
        for r in records {
            w.serialize(Row::from(r)).map_err(csv_err)?;
        }
        if records.is_empty() {
            w.write_record([
                "frame", "x", "y", "w", "h", "scale", "v_m", "v_p", "v_s", "psmd",
                "update_flag", "lambda_hat", "branch",
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Read a result file. A hash differing from `expected_hash` is reported via
/// `hash_warning` (and logged); the records are returned regardless.
pub fn read_results(path: &Path, expected_hash: Option<&str>) -> Result<ResultFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (config_hash, body) = match text.split_once('\n') {
        Some((first, rest)) if first.starts_with(HASH_PREFIX) => {
            (Some(first[HASH_PREFIX.len()..].trim().to_string()), rest)
        }
        _ => (None, text.as_str()),
    };
    let mut reader = csv::ReaderBuilder::new().from_reader(body.as_bytes());
    let records = reader
        .deserialize::<Row>()
        .map(|row| {
            row.map(FrameRecord::from).map_err(|e| Error::Csv {
                path: path.to_path_buf(),
                source: e,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let hash_warning = match (expected_hash, &config_hash) {
        (Some(want), Some(got)) if want == got => None,
        (Some(want), got) => {
            let msg = format!(
                "{}: config hash {} does not match {want}",
                path.display(),
                got.as_deref().unwrap_or("<missing>")
            );
            log::warn!("{msg}");
            Some(msg)
        }
        (None, _) => None,
    };
    Ok(ResultFile {
        config_hash,
        records,
        hash_warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn records() -> Vec<FrameRecord> {
        vec![
            FrameRecord {
                frame: 1,
                bbox: BoundingBox::new(9.0, 19.0, 30.0, 40.0),
                scale: 1.0,
                v_m: None,
                v_p: None,
                v_s: None,
                psmd: None,
                update_flag: true,
                lambda_hat: None,
                branch: None,
            },
            FrameRecord {
                frame: 2,
                bbox: BoundingBox::new(10.123456789012345, 19.5, 30.1, 40.2),
                scale: 1.0203,
                v_m: Some(0.012345678901234567),
                v_p: Some(0.9),
                v_s: Some(0.1),
                psmd: Some(7.0 / 3.0),
                update_flag: false,
                lambda_hat: Some(0.1314),
                branch: Some(MergeBranch::LowAlpha),
            },
            FrameRecord {
                frame: 3,
                bbox: BoundingBox::new(1e-300, 2.5, 3.0, 4.0),
                scale: 0.98,
                v_m: Some(-1e-7),
                v_p: Some(1.0),
                v_s: Some(0.0),
                psmd: Some(1e6),
                update_flag: true,
                lambda_hat: Some(0.0),
                branch: Some(MergeBranch::Clamped),
            },
        ]
    }

    #[test]
    fn round_trip_is_exact() {
        let tmp = tempfile::tempdir().unwrap();
        let p = tmp.path().join("nested/run.csv");
        write_results(&p, &records(), "abc123").unwrap();
        let back = read_results(&p, Some("abc123")).unwrap();
        assert_eq!(back.records, records());
        assert_eq!(back.config_hash.as_deref(), Some("abc123"));
        assert_eq!(back.hash_warning, None);
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("# config_hash=abc123\nframe,x,y,w,h,scale,v_m,v_p,v_s,psmd,update_flag,lambda_hat,branch\n"));
        assert!(!text.contains('\r'));
    }

    #[test]
    fn wrong_hash_warns_but_reads() {
        let tmp = tempfile::tempdir().unwrap();
        let p = tmp.path().join("run.csv");
        write_results(&p, &records(), "abc").unwrap();
        let back = read_results(&p, Some("def")).unwrap();
        assert!(back.hash_warning.is_some());
        assert_eq!(back.records.len(), 3);
    }

    #[test]
    fn missing_file_is_not_found() {
        let tmp = tempfile::tempdir().unwrap();
        assert!(matches!(
            read_results(&tmp.path().join("none.csv"), None),
            Err(Error::NotFound(_))
        ));
    }
}
