//! OTB-layout sequences: `<seq>/img/*.{jpg,png,bmp}` plus `groundtruth_rect.txt`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::image::Image;

pub const GROUND_TRUTH_FILES: [&str; 2] = ["groundtruth_rect.txt", "groundtruth.txt"];
pub const MANIFEST_FILE: &str = "manifest.json";
const IMAGE_EXTENSIONS: [&str; 4] = ["jpg", "jpeg", "png", "bmp"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Attribute {
    IV,
    OPR,
    SV,
    OCC,
    DEF,
    MB,
    FM,
    IPR,
    OV,
    BC,
    LR,
}

impl Attribute {
    pub const ALL: [Attribute; 11] = [
        Attribute::IV,
        Attribute::OPR,
        Attribute::SV,
        Attribute::OCC,
        Attribute::DEF,
        Attribute::MB,
        Attribute::FM,
        Attribute::IPR,
        Attribute::OV,
        Attribute::BC,
        Attribute::LR,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Attribute::IV => "IV",
            Attribute::OPR => "OPR",
            Attribute::SV => "SV",
            Attribute::OCC => "OCC",
            Attribute::DEF => "DEF",
            Attribute::MB => "MB",
            Attribute::FM => "FM",
            Attribute::IPR => "IPR",
            Attribute::OV => "OV",
            Attribute::BC => "BC",
            Attribute::LR => "LR",
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Attribute {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Attribute::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnknownAttribute(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub name: String,
    pub frames: Vec<PathBuf>,
    /// `None` marks a frame without a usable annotation.
    pub ground_truth: Vec<Option<BoundingBox>>,
    pub attributes: Vec<Attribute>,
}

impl Sequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// First annotated box, used to start a one-pass run.
    pub fn initial_box(&self) -> Result<BoundingBox> {
        match self.ground_truth.first() {
            Some(Some(b)) => Ok(*b),
            Some(None) => Err(Error::invalid(format!(
                "sequence {} has no annotation on its first frame",
                self.name
            ))),
            None => Err(Error::Empty("sequence")),
        }
    }

    /// Decode frames lazily, in order.
    pub fn images(&self) -> impl Iterator<Item = Result<Image>> + '_ {
        self.frames.iter().map(|p| Image::load(p))
    }
}

fn numeric_key(path: &Path) -> (u64, String) {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or_default()
        .to_string();
    let digits: String = stem.chars().filter(|c| c.is_ascii_digit()).collect();
    (digits.parse().unwrap_or(u64::MAX), stem)
}

fn list_frames(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut frames = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_image = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
        if is_image {
            frames.push(path);
        }
    }
    frames.sort_by_cached_key(|p| numeric_key(p));
    Ok(frames)
}

/// Parse ground truth: one `x,y,w,h` line per frame (comma, tab or space
/// separated), 1-based coordinates. Non-finite or non-positive sizes mark the
/// frame as unannotated.
pub fn parse_ground_truth(text: &str, path: &Path) -> Result<Vec<Option<BoundingBox>>> {
    let mut boxes = Vec::new();
    let lines: Vec<&str> = text.lines().collect();
    let last = lines.iter().rposition(|l| !l.trim().is_empty()).map_or(0, |i| i + 1);
    for (i, line) in lines[..last].iter().enumerate() {
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c == '\t' || c == ' ')
            .filter(|s| !s.is_empty())
            .collect();
        let parse_error = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        if fields.len() != 4 {
            return Err(parse_error(format!(
                "expected 4 values, found {} in {line:?}",
                fields.len()
            )));
        }
        let mut v = [0.0; 4];
        for (dst, f) in v.iter_mut().zip(&fields) {
            *dst = f
                .trim()
                .parse::<f64>()
                .map_err(|_| parse_error(format!("not a number: {f:?}")))?;
        }
        let b = BoundingBox::new(v[0] - 1.0, v[1] - 1.0, v[2], v[3]);
        boxes.push(b.is_valid().then_some(b));
    }
    Ok(boxes)
}

pub fn load_sequence(dir: &Path) -> Result<Sequence> {
    if !dir.is_dir() {
        return Err(Error::NotFound(dir.to_path_buf()));
    }
    let img_dir = dir.join("img");
    if !img_dir.is_dir() {
        return Err(Error::NotFound(img_dir));
    }
    let gt_path = GROUND_TRUTH_FILES
        .iter()
        .map(|f| dir.join(f))
        .find(|p| p.is_file())
        .ok_or_else(|| Error::NotFound(dir.join(GROUND_TRUTH_FILES[0])))?;
    let text = std::fs::read_to_string(&gt_path).map_err(|e| Error::io(&gt_path, e))?;
    let ground_truth = parse_ground_truth(&text, &gt_path)?;
    let frames = list_frames(&img_dir)?;
    if frames.len() != ground_truth.len() {
        return Err(Error::CountMismatch {
            frames: frames.len(),
            boxes: ground_truth.len(),
        });
    }
    if frames.is_empty() {
        return Err(Error::Empty("sequence frames"));
    }
    let name = dir
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("sequence")
        .to_string();
    Ok(Sequence {
        name,
        frames,
        ground_truth,
        attributes: Vec::new(),
    })
}

/// Attribute manifest: a JSON object mapping sequence name to tag list.
pub fn load_manifest(path: &Path) -> Result<BTreeMap<String, Vec<Attribute>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let raw: BTreeMap<String, Vec<String>> =
        serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })?;
    raw.into_iter()
        .map(|(name, tags)| {
            let mut tags = tags
                .iter()
                .map(|t| t.parse())
                .collect::<Result<Vec<Attribute>>>()?;
            tags.sort();
            tags.dedup();
            Ok((name, tags))
        })
        .collect()
}

/// Every sequence directory under `dir`, sorted by name, tagged from
/// `manifest.json` when present.
pub fn load_dataset(dir: &Path) -> Result<Vec<Sequence>> {
    if !dir.is_dir() {
        return Err(Error::NotFound(dir.to_path_buf()));
    }
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest = if manifest_path.is_file() {
        load_manifest(&manifest_path)?
    } else {
        BTreeMap::new()
    };
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut dirs = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.join("img").is_dir() {
            dirs.push(path);
        }
    }
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::Empty("dataset (no sequence directories)"));
    }
    dirs.iter()
        .map(|d| {
            let mut seq = load_sequence(d)?;
            if let Some(tags) = manifest.get(&seq.name) {
                seq.attributes = tags.clone();
            }
            Ok(seq)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(dir: &Path, frames: usize, gt: &str) {
        std::fs::create_dir_all(dir.join("img")).unwrap();
        for i in (1..=frames).rev() {
            Image::filled(16, 12, 3, 0.5)
                .save(&dir.join("img").join(format!("{i:04}.png")))
                .unwrap();
        }
        std::fs::write(dir.join("groundtruth_rect.txt"), gt).unwrap();
    }

    #[test]
    fn loads_and_converts_to_zero_based() {
        let tmp = tempfile::tempdir().unwrap();
        let d = tmp.path().join("Toy");
        toy(&d, 3, "10,20,30,40\n11\t21\t30\t40\n12 22 30 40\n");
        let s = load_sequence(&d).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.name, "Toy");
        assert_eq!(s.ground_truth[0], Some(BoundingBox::new(9.0, 19.0, 30.0, 40.0)));
        assert_eq!(s.ground_truth[2], Some(BoundingBox::new(11.0, 21.0, 30.0, 40.0)));
        let names: Vec<_> = s.frames.iter().map(|p| p.file_name().unwrap().to_owned()).collect();
        assert_eq!(names, ["0001.png", "0002.png", "0003.png"]);
        assert_eq!(s.images().count(), 3);
    }

    #[test]
    fn numeric_order_beats_lexicographic() {
        let mut v = vec![PathBuf::from("10.jpg"), PathBuf::from("9.jpg"), PathBuf::from("100.jpg")];
        v.sort_by_cached_key(|p| numeric_key(p));
        assert_eq!(v, [PathBuf::from("9.jpg"), PathBuf::from("10.jpg"), PathBuf::from("100.jpg")]);
    }

    #[test]
    fn count_mismatch_names_both_counts() {
        let tmp = tempfile::tempdir().unwrap();
        toy(tmp.path(), 3, "1,1,5,5\n1,1,5,5\n");
        let err = load_sequence(tmp.path()).unwrap_err();
        assert!(matches!(err, Error::CountMismatch { frames: 3, boxes: 2 }));
        let msg = err.to_string();
        assert!(msg.contains('3') && msg.contains('2'));
    }

    #[test]
    fn parse_error_reports_line() {
        let err = parse_ground_truth("1,2,3,4\n1,2,x,4\n", Path::new("gt.txt")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_ground_truth("1,2,3\n", Path::new("gt.txt")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn absent_annotations_are_marked() {
        let gt = parse_ground_truth("1,1,5,5\n0,0,0,0\nNaN,NaN,NaN,NaN\n\n", Path::new("g")).unwrap();
        assert_eq!(gt.len(), 3);
        assert!(gt[0].is_some() && gt[1].is_none() && gt[2].is_none());
    }

    #[test]
    fn dataset_with_manifest() {
        let tmp = tempfile::tempdir().unwrap();
        toy(&tmp.path().join("B"), 2, "1,1,5,5\n1,1,5,5\n");
        toy(&tmp.path().join("A"), 2, "1,1,5,5\n1,1,5,5\n");
        std::fs::write(tmp.path().join(MANIFEST_FILE), r#"{"A": ["IV", "occ"], "B": []}"#).unwrap();
        let ds = load_dataset(tmp.path()).unwrap();
        assert_eq!(ds.iter().map(|s| s.name.as_str()).collect::<Vec<_>>(), ["A", "B"]);
        assert_eq!(ds[0].attributes, [Attribute::IV, Attribute::OCC]);

        std::fs::write(tmp.path().join(MANIFEST_FILE), r#"{"A": ["XYZ"]}"#).unwrap();
        assert!(matches!(load_dataset(tmp.path()), Err(Error::UnknownAttribute(_))));
    }

    #[test]
    fn empty_dataset_is_an_error() {
        let tmp = tempfile::tempdir().unwrap();
        assert!(matches!(load_dataset(tmp.path()), Err(Error::Empty(_))));
        assert!(matches!(load_dataset(&tmp.path().join("nope")), Err(Error::NotFound(_))));
    }
}
