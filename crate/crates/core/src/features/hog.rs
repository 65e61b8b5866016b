//! 31-channel HOG: 18 contrast-sensitive orientations, 9 contrast-insensitive
//! orientations and 4 texture (normalization energy) channels per cell.

use crate::error::{Error, Result};
use crate::filter::FeatureMap;
use crate::image::ImagePatch;

pub const HOG_CHANNELS: usize = 31;
const ORIENTATIONS: usize = 9;
const TRUNCATE: f64 = 0.2;
const EPS: f64 = 1e-4;

pub fn hog(patch: &ImagePatch, cell_size: usize) -> Result<FeatureMap> {
    if cell_size == 0 {
        return Err(Error::invalid("cell size must be positive"));
    }
    let cw = patch.width() / cell_size;
    let ch = patch.height() / cell_size;
    if cw == 0 || ch == 0 {
        return Err(Error::invalid(format!(
            "patch {}x{} is smaller than one {cell_size}px cell",
            patch.width(),
            patch.height()
        )));
    }
    let resampled;
    let patch = if cw * cell_size != patch.width() || ch * cell_size != patch.height() {
        resampled = patch.resample_region(
            0.0,
            0.0,
            patch.width() as f64,
            patch.height() as f64,
            cw * cell_size,
            ch * cell_size,
        );
        &resampled
    } else {
        patch
    };

    let hist = orientation_histograms(patch, cell_size, cw, ch);

    // energy of the contrast-insensitive histogram per cell
    let energy: Vec<f64> = hist
        .chunks_exact(2 * ORIENTATIONS)
        .map(|h| {
            (0..ORIENTATIONS)
                .map(|o| {
                    let v = h[o] + h[o + ORIENTATIONS];
                    v * v
                })
                .sum()
        })
        .collect();
    let e = |x: isize, y: isize| -> f64 {
        let x = x.clamp(0, cw as isize - 1) as usize;
        let y = y.clamp(0, ch as isize - 1) as usize;
        energy[y * cw + x]
    };

    let mut out = FeatureMap::zeros(cw, ch, HOG_CHANNELS, cell_size);
    for y in 0..ch {
        for x in 0..cw {
            let (xi, yi) = (x as isize, y as isize);
            // the four 2x2 blocks containing this cell
            let mut norms = [0.0; 4];
            for (k, (dx, dy)) in [(-1, -1), (1, -1), (-1, 1), (1, 1)].into_iter().enumerate() {
                let s = e(xi, yi) + e(xi + dx, yi) + e(xi, yi + dy) + e(xi + dx, yi + dy);
                norms[k] = 1.0 / (s + EPS).sqrt();
            }
            let h = &hist[(y * cw + x) * 2 * ORIENTATIONS..(y * cw + x + 1) * 2 * ORIENTATIONS];
            let mut texture = [0.0; 4];
            for o in 0..2 * ORIENTATIONS {
                let mut sum = 0.0;
                for (k, n) in norms.iter().enumerate() {
                    let v = (h[o] * n).min(TRUNCATE);
                    sum += v;
                    texture[k] += v;
                }
                out.set(x, y, o, 0.5 * sum);
            }
            for o in 0..ORIENTATIONS {
                let mut sum = 0.0;
                for n in &norms {
                    sum += ((h[o] + h[o + ORIENTATIONS]) * n).min(TRUNCATE);
                }
                out.set(x, y, 2 * ORIENTATIONS + o, 0.5 * sum);
            }
            for (k, t) in texture.iter().enumerate() {
                out.set(x, y, 3 * ORIENTATIONS + k, 0.2357 * t);
            }
        }
    }
    Ok(out)
}

/// Per-cell 18-bin gradient histograms with hard orientation and spatial binning.
fn orientation_histograms(patch: &ImagePatch, cell: usize, cw: usize, ch: usize) -> Vec<f64> {
    let (uu, vv): (Vec<f64>, Vec<f64>) = (0..ORIENTATIONS)
        .map(|k| {
            let a = k as f64 * std::f64::consts::PI / ORIENTATIONS as f64;
            (a.cos(), a.sin())
        })
        .unzip();
    let mut hist = vec![0.0; cw * ch * 2 * ORIENTATIONS];
    let (w, h) = (cw * cell, ch * cell);
    for y in 0..h {
        for x in 0..w {
            let (xi, yi) = (x as isize, y as isize);
            let mut best = (0.0f64, 0.0f64, -1.0f64);
            for c in 0..patch.channels() {
                let dx = (patch.get_clamped(xi + 1, yi, c) - patch.get_clamped(xi - 1, yi, c)) as f64;
                let dy = (patch.get_clamped(xi, yi + 1, c) - patch.get_clamped(xi, yi - 1, c)) as f64;
                let m = dx * dx + dy * dy;
                if m > best.2 {
                    best = (dx, dy, m);
                }
            }
            let (dx, dy, m) = best;
            if m <= 0.0 {
                continue;
            }
            let mut best_dot = 0.0;
            let mut bin = 0;
            for o in 0..ORIENTATIONS {
                let dot = uu[o] * dx + vv[o] * dy;
                if dot > best_dot {
                    best_dot = dot;
                    bin = o;
                } else if -dot > best_dot {
                    best_dot = -dot;
                    bin = o + ORIENTATIONS;
                }
            }
            let cell_index = (y / cell) * cw + x / cell;
            hist[cell_index * 2 * ORIENTATIONS + bin] += m.sqrt();
        }
    }
    hist
}
