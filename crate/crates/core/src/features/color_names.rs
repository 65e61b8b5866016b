//! Color-name probability features: an RGB lookup table mapping every
//! 8-bit color (quantized to 32 levels per channel) to probabilities over the
//! eleven basic color terms, pooled per cell.
//!
//! Table layout on disk: `32768 x 11` little-endian `f32`, row index
//! `r/8 + 32*(g/8) + 1024*(b/8)` for 8-bit `r, g, b`, columns in
//! [`COLOR_NAMES`] order.

use std::path::Path;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::filter::FeatureMap;
use crate::image::ImagePatch;

pub const CN_CHANNELS: usize = 11;
pub const CN_ROWS: usize = 32 * 32 * 32;

pub const COLOR_NAMES: [&str; CN_CHANNELS] = [
    "black", "blue", "brown", "grey", "green", "orange", "pink", "purple", "red", "white",
    "yellow",
];

/// Environment variable overriding the table path.
pub const CN_TABLE_ENV: &str = "CFTRACK_CN_TABLE";

#[derive(Debug, Clone, PartialEq)]
pub struct ColorNameTable {
    rows: Vec<[f32; CN_CHANNELS]>,
}

// sRGB prototypes for the built-in table
const PROTOTYPES: [[f64; 3]; CN_CHANNELS] = [
    [0.0, 0.0, 0.0],
    [0.0, 0.0, 255.0],
    [139.0, 69.0, 19.0],
    [128.0, 128.0, 128.0],
    [0.0, 160.0, 0.0],
    [255.0, 140.0, 0.0],
    [255.0, 170.0, 200.0],
    [128.0, 0.0, 160.0],
    [220.0, 0.0, 0.0],
    [255.0, 255.0, 255.0],
    [255.0, 255.0, 0.0],
];
const PROTOTYPE_SPREAD: f64 = 18.0;

fn srgb_to_lab(rgb: [f64; 3]) -> [f64; 3] {
    let lin = |v: f64| {
        let v = v / 255.0;
        if v <= 0.04045 {
            v / 12.92
        } else {
            ((v + 0.055) / 1.055).powf(2.4)
        }
    };
    let (r, g, b) = (lin(rgb[0]), lin(rgb[1]), lin(rgb[2]));
    let x = (0.4124 * r + 0.3576 * g + 0.1805 * b) / 0.95047;
    let y = 0.2126 * r + 0.7152 * g + 0.0722 * b;
    let z = (0.0193 * r + 0.1192 * g + 0.9505 * b) / 1.08883;
    let f = |t: f64| {
        if t > 0.008856 {
            t.cbrt()
        } else {
            7.787 * t + 16.0 / 116.0
        }
    };
    let (fx, fy, fz) = (f(x), f(y), f(z));
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

#[inline]
pub fn table_index(r: u8, g: u8, b: u8) -> usize {
    (r as usize / 8) + 32 * (g as usize / 8) + 1024 * (b as usize / 8)
}

impl ColorNameTable {
    /// Deterministic table built from soft assignment of each quantized color
    /// to the nearest prototype colors in CIE Lab.
    pub fn generate() -> Self {
        let protos: Vec<[f64; 3]> = PROTOTYPES.iter().map(|&p| srgb_to_lab(p)).collect();
        let mut rows = vec![[0.0f32; CN_CHANNELS]; CN_ROWS];
        for bi in 0..32 {
            for gi in 0..32 {
                for ri in 0..32 {
                    let center = |i: usize| (i * 8) as f64 + 3.5;
                    let lab = srgb_to_lab([center(ri), center(gi), center(bi)]);
                    let d2: Vec<f64> = protos
                        .iter()
                        .map(|p| (0..3).map(|k| (lab[k] - p[k]).powi(2)).sum())
                        .collect();
                    let dmin = d2.iter().copied().fold(f64::INFINITY, f64::min);
                    let w: Vec<f64> = d2
                        .iter()
                        .map(|d| (-(d - dmin) / (2.0 * PROTOTYPE_SPREAD * PROTOTYPE_SPREAD)).exp())
                        .collect();
                    let total: f64 = w.iter().sum();
                    let row = &mut rows[ri + 32 * gi + 1024 * bi];
                    for (dst, v) in row.iter_mut().zip(&w) {
                        *dst = (v / total) as f32;
                    }
                }
            }
        }
        ColorNameTable { rows }
    }

    /// The process-wide built-in table.
    pub fn builtin() -> &'static ColorNameTable {
        static TABLE: OnceLock<ColorNameTable> = OnceLock::new();
        TABLE.get_or_init(ColorNameTable::generate)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let expected = CN_ROWS * CN_CHANNELS * 4;
        if bytes.len() != expected {
            return Err(Error::mismatch(expected, bytes.len()));
        }
        let mut rows = Vec::with_capacity(CN_ROWS);
        for chunk in bytes.chunks_exact(CN_CHANNELS * 4) {
            let mut row = [0.0f32; CN_CHANNELS];
            for (k, v) in chunk.chunks_exact(4).enumerate() {
                row[k] = f32::from_le_bytes([v[0], v[1], v[2], v[3]]);
            }
            let total: f64 = row.iter().map(|&v| v as f64).sum();
            if !(total > 0.0) || row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::invalid("color-name table row is not a distribution"));
            }
            for v in &mut row {
                *v = (*v as f64 / total) as f32;
            }
            rows.push(row);
        }
        Ok(ColorNameTable { rows })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        ColorNameTable::from_bytes(&bytes)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.rows
            .iter()
            .flat_map(|row| row.iter().flat_map(|v| v.to_le_bytes()))
            .collect()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    #[inline]
    pub fn lookup(&self, r: u8, g: u8, b: u8) -> &[f32; CN_CHANNELS] {
        &self.rows[table_index(r, g, b)]
    }
}

#[inline]
fn to_byte(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Per-pixel color-name probabilities of an RGB patch.
pub fn pixel_probabilities(patch: &ImagePatch, table: &ColorNameTable) -> Result<Vec<[f32; CN_CHANNELS]>> {
    if patch.channels() != 3 {
        return Err(Error::WrongColorspace {
            expected: 3,
            actual: patch.channels(),
        });
    }
    Ok(patch
        .as_slice()
        .chunks_exact(3)
        .map(|p| *table.lookup(to_byte(p[0]), to_byte(p[1]), to_byte(p[2])))
        .collect())
}

/// Cell-averaged 11-channel color-name map.
pub fn color_names(
    patch: &ImagePatch,
    cell_size: usize,
    table: &ColorNameTable,
) -> Result<FeatureMap> {
    let probs = pixel_probabilities(patch, table)?;
    pool_cells(
        patch.width(),
        patch.height(),
        cell_size,
        CN_CHANNELS,
        |i, out| {
            for (o, v) in out.iter_mut().zip(&probs[i]) {
                *o += *v as f64;
            }
        },
    )
}

/// Average per-pixel vectors over `cell_size` squares. Trailing pixels that
/// do not fill a cell are dropped.
pub(crate) fn pool_cells(
    width: usize,
    height: usize,
    cell_size: usize,
    channels: usize,
    mut accumulate: impl FnMut(usize, &mut [f64]),
) -> Result<FeatureMap> {
    if cell_size == 0 {
        return Err(Error::invalid("cell size must be positive"));
    }
    let cw = width / cell_size;
    let ch = height / cell_size;
    if cw == 0 || ch == 0 {
        return Err(Error::invalid(format!(
            "patch {width}x{height} is smaller than one {cell_size}px cell"
        )));
    }
    let mut out = FeatureMap::zeros(cw, ch, channels, cell_size);
    let mut acc = vec![0.0; channels];
    let norm = 1.0 / (cell_size * cell_size) as f64;
    for cy in 0..ch {
        for cx in 0..cw {
            acc.iter_mut().for_each(|a| *a = 0.0);
            for y in cy * cell_size..(cy + 1) * cell_size {
                for x in cx * cell_size..(cx + 1) * cell_size {
                    accumulate(y * width + x, &mut acc);
                }
            }
            for (l, a) in acc.iter().enumerate() {
                out.set(cx, cy, l, a * norm);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Image;

    #[test]
    fn rows_are_distributions() {
        let t = ColorNameTable::builtin();
        for row in &t.rows {
            let s: f64 = row.iter().map(|&v| v as f64).sum();
            assert!((s - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn basic_colors_map_to_their_names() {
        let t = ColorNameTable::builtin();
        let argmax = |r, g, b| {
            let row = t.lookup(r, g, b);
            (0..CN_CHANNELS)
                .max_by(|&i, &j| row[i].total_cmp(&row[j]))
                .unwrap()
        };
        assert_eq!(COLOR_NAMES[argmax(0, 0, 0)], "black");
        assert_eq!(COLOR_NAMES[argmax(255, 255, 255)], "white");
        assert_eq!(COLOR_NAMES[argmax(230, 10, 10)], "red");
        assert_eq!(COLOR_NAMES[argmax(10, 10, 240)], "blue");
        assert_eq!(COLOR_NAMES[argmax(250, 250, 20)], "yellow");
        assert_eq!(COLOR_NAMES[argmax(128, 128, 128)], "grey");
    }

    #[test]
    fn black_patch() {
        let p = Image::filled(64, 64, 3, 0.0);
        let f = color_names(&p, 4, ColorNameTable::builtin()).unwrap();
        assert_eq!(f.dims(), (16, 16, 11));
        let cell: Vec<f64> = (0..11).map(|l| f.get(3, 5, l)).collect();
        let best = (0..11).max_by(|&i, &j| cell[i].total_cmp(&cell[j])).unwrap();
        assert_eq!(COLOR_NAMES[best], "black");
        assert!((cell.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn grayscale_is_rejected() {
        let p = Image::filled(8, 8, 1, 0.5);
        assert!(matches!(
            color_names(&p, 4, ColorNameTable::builtin()),
            Err(Error::WrongColorspace { expected: 3, actual: 1 })
        ));
    }

    #[test]
    fn byte_round_trip() {
        let t = ColorNameTable::builtin();
        let back = ColorNameTable::from_bytes(&t.to_bytes()).unwrap();
        for (a, b) in t.rows.iter().zip(&back.rows) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-6);
            }
        }
        assert!(ColorNameTable::from_bytes(&[0u8; 12]).is_err());
    }

    #[test]
    fn index_layout() {
        assert_eq!(table_index(0, 0, 0), 0);
        assert_eq!(table_index(8, 0, 0), 1);
        assert_eq!(table_index(0, 8, 0), 32);
        assert_eq!(table_index(0, 0, 8), 1024);
        assert_eq!(table_index(255, 255, 255), CN_ROWS - 1);
    }
}
