//! Foreground/background color histograms and per-pixel target likelihood.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImagePatch;

/// Joint color histogram with `bins` levels per channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorHistogram {
    bins: usize,
    channels: usize,
    counts: Vec<f64>,
}

impl ColorHistogram {
    pub fn new(bins: usize, channels: usize) -> Result<Self> {
        if bins == 0 || bins > 256 {
            return Err(Error::invalid(format!("histogram bins must be in 1..=256, got {bins}")));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::invalid(format!("unsupported channel count {channels}")));
        }
        Ok(ColorHistogram {
            bins,
            channels,
            counts: vec![0.0; bins.pow(channels as u32)],
        })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    #[inline]
    pub fn bin_of(&self, pixel: &[f32]) -> usize {
        let q = |v: f32| ((v.clamp(0.0, 1.0) * 255.0).round() as usize * self.bins / 256).min(self.bins - 1);
        let mut idx = 0;
        for &v in pixel.iter().rev() {
            idx = idx * self.bins + q(v);
        }
        idx
    }

    #[inline]
    pub fn count(&self, bin: usize) -> f64 {
        self.counts[bin]
    }

    pub fn add(&mut self, pixel: &[f32], weight: f64) {
        let b = self.bin_of(pixel);
        self.counts[b] += weight;
    }

    /// Histogram of the pixels of `patch` for which `select(x, y)` holds.
    pub fn from_region(
        patch: &ImagePatch,
        bins: usize,
        mut select: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self> {
        let mut hist = ColorHistogram::new(bins, patch.channels())?;
        let ch = patch.channels();
        let px = patch.as_slice();
        for y in 0..patch.height() {
            for x in 0..patch.width() {
                if select(x, y) {
                    let i = (y * patch.width() + x) * ch;
                    hist.add(&px[i..i + ch], 1.0);
                }
            }
        }
        Ok(hist)
    }

    /// Scale counts so they sum to one. Errors on an empty histogram.
    pub fn normalized(&self) -> Result<Self> {
        let total = self.total();
        if !(total > 0.0) {
            return Err(Error::Empty("color histogram"));
        }
        Ok(ColorHistogram {
            counts: self.counts.iter().map(|c| c / total).collect(),
            ..self.clone()
        })
    }

    pub fn scaled(&self, factor: f64) -> Self {
        ColorHistogram {
            counts: self.counts.iter().map(|c| c * factor).collect(),
            ..self.clone()
        }
    }

    /// `(1 - rate) * self + rate * fresh`.
    pub fn interpolate(&self, fresh: &ColorHistogram, rate: f64) -> Result<Self> {
        if (self.bins, self.channels) != (fresh.bins, fresh.channels) {
            return Err(Error::mismatch(
                (self.bins, self.channels),
                (fresh.bins, fresh.channels),
            ));
        }
        Ok(ColorHistogram {
            counts: self
                .counts
                .iter()
                .zip(&fresh.counts)
                .map(|(a, b)| (1.0 - rate) * a + rate * b)
                .collect(),
            ..self.clone()
        })
    }
}

/// Per-pixel probability that a search-region pixel belongs to the target.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorProbabilityMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl ColorProbabilityMap {
    /// Number of pixels.
    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

/// `fg / (fg + bg)` per pixel, with `0 / 0` taken as `0.5`.
pub fn foreground_probability(
    search_region: &ImagePatch,
    fg: &ColorHistogram,
    bg: &ColorHistogram,
) -> Result<ColorProbabilityMap> {
    if (fg.bins, fg.channels) != (bg.bins, bg.channels) {
        return Err(Error::mismatch((fg.bins, fg.channels), (bg.bins, bg.channels)));
    }
    if fg.channels != search_region.channels() {
        return Err(Error::WrongColorspace {
            expected: fg.channels,
            actual: search_region.channels(),
        });
    }
    if !(fg.total() > 0.0) {
        return Err(Error::Empty("foreground histogram"));
    }
    if !(bg.total() > 0.0) {
        return Err(Error::Empty("background histogram"));
    }
    let ch = search_region.channels();
    let values = search_region
        .as_slice()
        .chunks_exact(ch)
        .map(|p| {
            let b = fg.bin_of(p);
            let (f, g) = (fg.counts[b], bg.counts[b]);
            if f + g > 0.0 {
                f / (f + g)
            } else {
                0.5
            }
        })
        .collect();
    Ok(ColorProbabilityMap {
        width: search_region.width(),
        height: search_region.height(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Image;
    use proptest::prelude::*;

    fn two_tone() -> Image {
        // left half red, right half blue, one green column shared by both
        Image::from_fn(8, 4, 3, |x, _, c| match (x, c) {
            (3, 1) => 1.0,
            (3, _) => 0.0,
            (0..=2, 0) => 1.0,
            (4..=7, 2) => 1.0,
            _ => 0.0,
        })
    }

    #[test]
    fn probability_examples() {
        let img = two_tone();
        let fg = ColorHistogram::from_region(&img, 32, |x, _| x <= 3).unwrap();
        let bg = ColorHistogram::from_region(&img, 32, |x, _| x >= 3).unwrap();
        let p = foreground_probability(&img, &fg, &bg).unwrap();
        assert_eq!(p.n(), 32);
        assert_eq!(p.get(0, 0), 1.0);
        assert_eq!(p.get(6, 2), 0.0);
        assert_eq!(p.get(3, 1), 0.5);
    }

    #[test]
    fn unseen_color_is_half() {
        let img = two_tone();
        let fg = ColorHistogram::from_region(&img, 32, |x, _| x == 0).unwrap();
        let bg = ColorHistogram::from_region(&img, 32, |x, _| x == 7).unwrap();
        let p = foreground_probability(&img, &fg, &bg).unwrap();
        assert_eq!(p.get(3, 0), 0.5);
    }

    #[test]
    fn empty_histogram_is_an_error() {
        let img = two_tone();
        let fg = ColorHistogram::new(32, 3).unwrap();
        let bg = ColorHistogram::from_region(&img, 32, |_, _| true).unwrap();
        assert!(matches!(
            foreground_probability(&img, &fg, &bg),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn grayscale_bins() {
        let h = ColorHistogram::new(32, 1).unwrap();
        assert_eq!(h.bin_of(&[0.0]), 0);
        assert_eq!(h.bin_of(&[1.0]), 31);
        let c = ColorHistogram::new(32, 3).unwrap();
        assert_eq!(c.counts().len(), 32768);
        assert_eq!(c.bin_of(&[1.0, 0.0, 0.0]), 31);
        assert_eq!(c.bin_of(&[0.0, 0.0, 1.0]), 31 * 1024);
    }

    proptest! {
        #[test]
        fn scale_invariant(c in 0.01f64..100.0, seed in 0u64..1000) {
            let img = Image::from_fn(6, 6, 3, |x, y, ch| (((x * 5 + y * 3 + ch) as u64 * (seed + 1)) % 7) as f32 / 6.0);
            let fg = ColorHistogram::from_region(&img, 32, |x, y| x + y < 5).unwrap();
            let bg = ColorHistogram::from_region(&img, 32, |x, y| x + y >= 4).unwrap();
            let a = foreground_probability(&img, &fg, &bg).unwrap();
            let b = foreground_probability(&img, &fg.scaled(c), &bg.scaled(c)).unwrap();
            for (u, v) in a.values.iter().zip(&b.values) {
                prop_assert!((u - v).abs() < 1e-12);
                prop_assert!((0.0..=1.0).contains(u));
            }
        }
    }
}
