//! One-dimensional correlation filter over a pyramid of target scales.
//!
//! Each frame, `S` patches around the target at sizes `size * a^(k - c)`
//! (`c = (S - 1) / 2`) are resampled to a fixed model size, described by
//! flattened HOG, and windowed along the scale axis. A per-dimension filter
//! over the scale axis (numerator/denominator form) scores every hypothesis.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::hog;
use crate::fft;
use crate::filter::hann_vector;
use crate::geometry::BoundingBox;
use crate::image::Image;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScaleParams {
    pub num_scales: usize,
    pub step: f64,
    pub learning_rate: f64,
    /// Gaussian label width in scale-index units.
    pub sigma: f64,
    pub lambda: f64,
    /// Upper bound on the area (px) of the resampled scale patch.
    pub model_max_area: f64,
    pub cell_size: usize,
    pub parabolic: bool,
}

impl Default for ScaleParams {
    fn default() -> Self {
        ScaleParams {
            num_scales: 17,
            step: 1.02,
            learning_rate: 0.025,
            sigma: 1.0,
            lambda: 1e-2,
            model_max_area: 512.0,
            cell_size: 4,
            parabolic: true,
        }
    }
}

impl ScaleParams {
    pub fn validate(&self) -> Result<()> {
        if self.num_scales == 0 || self.num_scales % 2 == 0 {
            return Err(Error::invalid(format!(
                "number of scales must be odd, got {}",
                self.num_scales
            )));
        }
        if !(self.step > 1.0) {
            return Err(Error::invalid("scale step must exceed 1"));
        }
        if !(0.0..=1.0).contains(&self.learning_rate) {
            return Err(Error::invalid("scale learning rate must lie in [0, 1]"));
        }
        if !(self.sigma > 0.0) || !(self.lambda >= 0.0) || !(self.model_max_area >= 16.0) {
            return Err(Error::invalid("invalid scale filter parameters"));
        }
        if self.cell_size == 0 {
            return Err(Error::invalid("cell size must be positive"));
        }
        Ok(())
    }

    /// Relative scale of every hypothesis, `a^(k - c)`.
    pub fn factors(&self) -> Vec<f64> {
        let c = (self.num_scales / 2) as i32;
        (0..self.num_scales as i32)
            .map(|k| self.step.powi(k - c))
            .collect()
    }
}

/// Descriptor matrix: `dim` rows (feature dimensions) by `scales` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleSample {
    pub dim: usize,
    pub scales: usize,
    pub data: Vec<f64>,
}

impl ScaleSample {
    pub fn column(&self, k: usize) -> Vec<f64> {
        (0..self.dim).map(|i| self.data[i * self.scales + k]).collect()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.scales..(i + 1) * self.scales]
    }
}

#[derive(Debug, Clone, PartialEq)]
struct ScaleFilter {
    num: Vec<Complex64>,
    den: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaleState {
    pub params: ScaleParams,
    /// Target size at scale 1.
    pub base_size: (f64, f64),
    pub current_scale: f64,
    pub min_scale: f64,
    pub max_scale: f64,
    model_size: (usize, usize),
    label_hat: Vec<Complex64>,
    window: Vec<f64>,
    filter: Option<ScaleFilter>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaleEstimate {
    pub response: Vec<f64>,
    pub best_index: usize,
    /// Scale change applied this frame, before clamping.
    pub multiplier: f64,
}

impl ScaleState {
    pub fn new(params: ScaleParams, base_size: (f64, f64), frame_size: (usize, usize)) -> Result<Self> {
        params.validate()?;
        let (bw, bh) = base_size;
        if !(bw > 0.0 && bh > 0.0) {
            return Err(Error::invalid(format!("degenerate target size {base_size:?}")));
        }
        let area = bw * bh;
        let shrink = if area > params.model_max_area {
            (params.model_max_area / area).sqrt()
        } else {
            1.0
        };
        let cell = params.cell_size;
        let fit = |v: f64| (((v * shrink) / cell as f64).floor() as usize).max(2) * cell;
        let model_size = (fit(bw), fit(bh));

        let s = params.num_scales;
        let c = (s / 2) as f64;
        let label: Vec<f64> = (0..s)
            .map(|k| (-0.5 * ((k as f64 - c) / params.sigma).powi(2)).exp())
            .collect();
        let mut label_hat: Vec<Complex64> = label.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft::forward_1d(&mut label_hat);
        let window = if s == 1 { vec![1.0] } else { hann_vector(s) };

        let min_scale = (4.0 / bw).max(4.0 / bh);
        let max_scale = (frame_size.0 as f64 / bw).min(frame_size.1 as f64 / bh).max(min_scale);
        Ok(ScaleState {
            params,
            base_size,
            current_scale: 1.0,
            min_scale,
            max_scale,
            model_size,
            label_hat,
            window,
            filter: None,
        })
    }

    pub fn is_trained(&self) -> bool {
        self.filter.is_some()
    }

    /// Filter numerator (`dim x S`, row-major) and denominator, once trained.
    pub fn filter(&self) -> Option<(&[Complex64], &[f64])> {
        self.filter.as_ref().map(|f| (f.num.as_slice(), f.den.as_slice()))
    }

    pub fn model_size(&self) -> (usize, usize) {
        self.model_size
    }

    pub fn current_size(&self) -> (f64, f64) {
        (
            self.base_size.0 * self.current_scale,
            self.base_size.1 * self.current_scale,
        )
    }

    /// Fold a sample taken at the current scale into the filter.
    pub fn update_filter(&self, sample: &ScaleSample) -> Result<ScaleState> {
        let (num, den) = self.filter_terms(sample)?;
        let filter = match &self.filter {
            None => ScaleFilter { num, den },
            Some(prev) => {
                let lr = self.params.learning_rate;
                ScaleFilter {
                    num: prev
                        .num
                        .iter()
                        .zip(&num)
                        .map(|(p, n)| p * (1.0 - lr) + n * lr)
                        .collect(),
                    den: prev
                        .den
                        .iter()
                        .zip(&den)
                        .map(|(p, n)| p * (1.0 - lr) + n * lr)
                        .collect(),
                }
            }
        };
        Ok(ScaleState {
            filter: Some(filter),
            ..self.clone()
        })
    }

    fn filter_terms(&self, sample: &ScaleSample) -> Result<(Vec<Complex64>, Vec<f64>)> {
        let s = self.params.num_scales;
        if sample.scales != s {
            return Err(Error::mismatch(s, sample.scales));
        }
        let mut num = Vec::with_capacity(sample.dim * s);
        let mut den = vec![0.0; s];
        let mut row = vec![Complex64::default(); s];
        for i in 0..sample.dim {
            for (dst, v) in row.iter_mut().zip(sample.row(i)) {
                *dst = Complex64::new(*v, 0.0);
            }
            fft::forward_1d(&mut row);
            for k in 0..s {
                num.push(self.label_hat[k] * row[k].conj());
                den[k] += row[k].norm_sqr();
            }
        }
        Ok((num, den))
    }

    /// Score every scale hypothesis and move `current_scale` to the best one.
    pub fn estimate_scale(&self, sample: &ScaleSample) -> Result<(ScaleState, ScaleEstimate)> {
        let filter = self
            .filter
            .as_ref()
            .ok_or(Error::Uninitialized("scale filter has not been trained"))?;
        let s = self.params.num_scales;
        if sample.scales != s || sample.dim * s != filter.num.len() {
            return Err(Error::mismatch((filter.num.len() / s, s), (sample.dim, sample.scales)));
        }
        let mut acc = vec![Complex64::default(); s];
        let mut row = vec![Complex64::default(); s];
        for i in 0..sample.dim {
            for (dst, v) in row.iter_mut().zip(sample.row(i)) {
                *dst = Complex64::new(*v, 0.0);
            }
            fft::forward_1d(&mut row);
            for k in 0..s {
                acc[k] += filter.num[i * s + k] * row[k];
            }
        }
        for k in 0..s {
            acc[k] /= filter.den[k] + self.params.lambda;
        }
        fft::inverse_1d(&mut acc);
        let response: Vec<f64> = acc.iter().map(|c| c.re).collect();

        let mut best = 0;
        for (k, v) in response.iter().enumerate() {
            if *v > response[best] {
                best = k;
            }
        }
        let mut offset = best as f64 - (s / 2) as f64;
        if self.params.parabolic && best > 0 && best + 1 < s {
            let (l, m, r) = (response[best - 1], response[best], response[best + 1]);
            let den = l - 2.0 * m + r;
            if den < 0.0 {
                offset += (0.5 * (l - r) / den).clamp(-0.5, 0.5);
            }
        }
        let multiplier = self.params.step.powf(offset);
        let next = ScaleState {
            current_scale: (self.current_scale * multiplier).clamp(self.min_scale, self.max_scale),
            ..self.clone()
        };
        Ok((
            next,
            ScaleEstimate {
                response,
                best_index: best,
                multiplier,
            },
        ))
    }
}

/// Descriptor matrix for the scale pyramid centered on `bbox`, whose size is
/// taken as the scale-1 reference.
pub fn scale_sample(frame: &Image, bbox: &BoundingBox, state: &ScaleState) -> Result<ScaleSample> {
    if !bbox.is_valid() {
        return Err(Error::invalid(format!("degenerate box {bbox}")));
    }
    let (cx, cy) = bbox.center();
    let (mw, mh) = state.model_size;
    let factors = state.params.factors();
    let s = factors.len();
    let mut columns = Vec::with_capacity(s);
    for f in &factors {
        let (w, h) = (bbox.w * f, bbox.h * f);
        let patch = frame.resample_region(cx - w / 2.0, cy - h / 2.0, w, h, mw, mh);
        columns.push(hog(&patch, state.params.cell_size)?);
    }
    let dim = columns[0].as_slice().len();
    let mut data = vec![0.0; dim * s];
    for (k, col) in columns.iter().enumerate() {
        let wk = state.window[k];
        for (i, v) in col.as_slice().iter().enumerate() {
            data[i * s + k] = v * wk;
        }
    }
    Ok(ScaleSample { dim, scales: s, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{render, Sprite, Texture};
    use approx::assert_abs_diff_eq;

    fn scene(size: f64, seed: u64) -> (Image, BoundingBox) {
        let bg = Texture::random(seed ^ 77, [0.4, 0.4, 0.4], 0.15, 3.0);
        let fg = Texture::random(seed, [0.6, 0.4, 0.3], 0.35, 2.5);
        let b = BoundingBox::from_center(100.0, 90.0, size, size);
        (render(200, 180, &bg, &[Sprite { bbox: b, texture: &fg }]), b)
    }

    fn trained(frame: &Image, b: &BoundingBox, params: ScaleParams) -> ScaleState {
        let st = ScaleState::new(params, (b.w, b.h), frame.dims()).unwrap();
        let sample = scale_sample(frame, b, &st).unwrap();
        st.update_filter(&sample).unwrap()
    }

    #[test]
    fn factor_sweep() {
        let f = ScaleParams::default().factors();
        assert_eq!(f.len(), 17);
        assert_abs_diff_eq!(f[8], 1.0);
        assert_abs_diff_eq!(f[0], 1.02f64.powi(-8), epsilon = 1e-15);
        assert_abs_diff_eq!(f[16], 1.02f64.powi(8), epsilon = 1e-15);
        assert!((f[0] - 0.853).abs() < 1e-3 && (f[16] - 1.172).abs() < 1e-3);
        for k in 0..17 {
            assert_abs_diff_eq!(f[k] * f[16 - k], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn single_scale_sample() {
        let (img, b) = scene(40.0, 1);
        let params = ScaleParams { num_scales: 1, ..Default::default() };
        let st = ScaleState::new(params, (b.w, b.h), img.dims()).unwrap();
        let s = scale_sample(&img, &b, &st).unwrap();
        assert_eq!(s.scales, 1);
        let (mw, mh) = st.model_size();
        let patch = img.resample_region(b.x, b.y, b.w, b.h, mw, mh);
        assert_eq!(s.column(0), hog(&patch, 4).unwrap().as_slice());
    }

    #[test]
    fn uniform_image_columns_match() {
        let img = Image::filled(120, 120, 3, 0.5);
        let b = BoundingBox::from_center(60.0, 60.0, 30.0, 30.0);
        let st = ScaleState::new(ScaleParams { num_scales: 5, ..Default::default() }, (30.0, 30.0), img.dims()).unwrap();
        let s = scale_sample(&img, &b, &st).unwrap();
        for k in 1..5 {
            assert_eq!(s.column(k), s.column(0));
        }
    }

    #[test]
    fn unchanged_target_stays_at_center() {
        let (img, b) = scene(40.0, 2);
        let st = trained(&img, &b, ScaleParams::default());
        let sample = scale_sample(&img, &b, &st).unwrap();
        let (next, est) = st.estimate_scale(&sample).unwrap();
        assert_eq!(est.best_index, 8);
        assert!((est.multiplier - 1.0).abs() < 1e-3);
        assert!((next.current_scale - 1.0).abs() < 1e-3);
    }

    #[test]
    fn zoom_by_two_steps() {
        let a = 1.02f64;
        let (f1, b1) = scene(40.0, 3);
        let (f2, _) = scene(40.0 * a * a, 3);
        let st = trained(&f1, &b1, ScaleParams::default());
        let sample = scale_sample(&f2, &b1, &st).unwrap();
        let (_, est) = st.estimate_scale(&sample).unwrap();
        assert!(est.multiplier >= a && est.multiplier <= a.powi(3), "{}", est.multiplier);
    }

    #[test]
    fn zoom_direction_sign_test() {
        for trial in 0..20u64 {
            let zoom_in = trial % 2 == 0;
            let factor = if zoom_in { 1.06 } else { 1.0 / 1.06 };
            let (f1, b1) = scene(44.0, 100 + trial);
            let (f2, _) = scene(44.0 * factor, 100 + trial);
            let st = trained(&f1, &b1, ScaleParams::default());
            let (_, est) = st.estimate_scale(&scale_sample(&f2, &b1, &st).unwrap()).unwrap();
            if zoom_in {
                assert!(est.best_index > 8, "trial {trial}: {}", est.best_index);
            } else {
                assert!(est.best_index < 8, "trial {trial}: {}", est.best_index);
            }
        }
    }

    #[test]
    fn scale_is_clamped() {
        let (img, b) = scene(40.0, 4);
        let mut st = trained(&img, &b, ScaleParams::default());
        st.current_scale = st.max_scale;
        // forcing a zoom-in at the upper bound cannot exceed it
        let (big, _) = scene(48.0, 4);
        let (next, _) = st.estimate_scale(&scale_sample(&big, &b, &st).unwrap()).unwrap();
        assert!(next.current_scale <= st.max_scale);
        assert!(st.min_scale * b.w >= 4.0 - 1e-9);
        assert!(st.max_scale * b.w <= 200.0 + 1e-9);
        let mut tiny = st.clone();
        tiny.current_scale = tiny.min_scale;
        let (small, _) = scene(36.0, 4);
        let (next, _) = tiny.estimate_scale(&scale_sample(&small, &b, &tiny).unwrap()).unwrap();
        assert!(next.current_scale >= tiny.min_scale);
    }

    #[test]
    fn untrained_and_invalid() {
        let (img, b) = scene(40.0, 5);
        let st = ScaleState::new(ScaleParams::default(), (b.w, b.h), img.dims()).unwrap();
        let s = scale_sample(&img, &b, &st).unwrap();
        assert!(matches!(st.estimate_scale(&s), Err(Error::Uninitialized(_))));
        assert!(ScaleState::new(ScaleParams { num_scales: 4, ..Default::default() }, (10.0, 10.0), (50, 50)).is_err());
        assert!(ScaleState::new(ScaleParams::default(), (0.0, 10.0), (50, 50)).is_err());
        assert!(scale_sample(&img, &BoundingBox::new(0.0, 0.0, 0.0, 3.0), &st).is_err());
    }

    #[test]
    fn deterministic_update() {
        let (img, b) = scene(40.0, 6);
        assert_eq!(trained(&img, &b, ScaleParams::default()), trained(&img, &b, ScaleParams::default()));
    }
}
