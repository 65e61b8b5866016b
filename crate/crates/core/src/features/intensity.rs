//! Six-bin soft intensity channels for grayscale sequences.

use crate::error::{Error, Result};
use crate::features::color_names::pool_cells;
use crate::filter::FeatureMap;
use crate::image::ImagePatch;

pub const IC_CHANNELS: usize = 6;

/// Triangular soft assignment of `v` in `[0, 1]` to bins centered at `k / 5`.
#[inline]
pub fn soft_bins(v: f64) -> [f64; IC_CHANNELS] {
    let pos = v.clamp(0.0, 1.0) * (IC_CHANNELS - 1) as f64;
    let lo = (pos.floor() as usize).min(IC_CHANNELS - 2);
    let frac = pos - lo as f64;
    let mut out = [0.0; IC_CHANNELS];
    out[lo] = 1.0 - frac;
    out[lo + 1] = frac;
    out
}

pub fn intensity_channels(patch: &ImagePatch, cell_size: usize) -> Result<FeatureMap> {
    if patch.channels() != 1 {
        return Err(Error::WrongColorspace {
            expected: 1,
            actual: patch.channels(),
        });
    }
    let px = patch.as_slice();
    let mut map = pool_cells(patch.width(), patch.height(), cell_size, IC_CHANNELS, |i, out| {
        for (o, v) in out.iter_mut().zip(soft_bins(px[i] as f64)) {
            *o += v;
        }
    })?;
    // cell vectors already sum to one; renormalize away accumulated rounding
    let (w, h, _) = map.dims();
    for y in 0..h {
        for x in 0..w {
            let s: f64 = (0..IC_CHANNELS).map(|l| map.get(x, y, l)).sum();
            for l in 0..IC_CHANNELS {
                map.set(x, y, l, map.get(x, y, l) / s);
            }
        }
    }
    Ok(map)
}
