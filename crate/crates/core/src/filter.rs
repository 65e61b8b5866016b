//! Frequency-domain kernelized ridge regression over cyclic samples.
//!
//! A training patch `x` implicitly stands for every cyclic shift of itself.
//! Sample `tau` reads `x` at `i + tau`, so the kernel correlation of two maps
//! at shift `tau` compares `x` with `z` read at offset `tau`. With that
//! convention the dual solution is `alpha_hat = y_hat / (k_hat + lambda)` and
//! the response over all shifts of `z` is `ifft(alpha_hat * k_hat_xz)`.

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;
use crate::grid::Grid;

/// `width x height x layers` real feature cells, layer-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    width: usize,
    height: usize,
    layers: usize,
    cell_size: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(
        width: usize,
        height: usize,
        layers: usize,
        cell_size: usize,
        data: Vec<f64>,
    ) -> Result<Self> {
        if width == 0 || height == 0 || layers == 0 {
            return Err(Error::Empty("feature map with a zero dimension"));
        }
        if data.len() != width * height * layers {
            return Err(Error::mismatch(width * height * layers, data.len()));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite feature value at index {i}")));
        }
        Ok(FeatureMap {
            width,
            height,
            layers,
            cell_size,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize, layers: usize, cell_size: usize) -> Self {
        FeatureMap {
            width,
            height,
            layers,
            cell_size,
            data: vec![0.0; width * height * layers],
        }
    }

    /// Stack single-layer grids of equal size.
    pub fn from_layers(layers: &[Grid], cell_size: usize) -> Result<Self> {
        let first = layers.first().ok_or(Error::Empty("no layers"))?;
        let (w, h) = first.dims();
        let mut data = Vec::with_capacity(w * h * layers.len());
        for g in layers {
            if g.dims() != (w, h) {
                return Err(Error::mismatch((w, h), g.dims()));
            }
            data.extend_from_slice(g.as_slice());
        }
        FeatureMap::new(w, h, layers.len(), cell_size, data)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn layers(&self) -> usize {
        self.layers
    }

    #[inline]
    pub fn cell_size(&self) -> usize {
        self.cell_size
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.width, self.height, self.layers)
    }

    pub fn layer(&self, l: usize) -> &[f64] {
        let n = self.width * self.height;
        &self.data[l * n..(l + 1) * n]
    }

    pub fn layer_mut(&mut self, l: usize) -> &mut [f64] {
        let n = self.width * self.height;
        &mut self.data[l * n..(l + 1) * n]
    }

    pub fn layer_grid(&self, l: usize) -> Grid {
        Grid::new(self.width, self.height, self.layer(l).to_vec()).expect("layer shape")
    }

    #[inline]
    pub fn get(&self, w: usize, h: usize, l: usize) -> f64 {
        self.data[(l * self.height + h) * self.width + w]
    }

    #[inline]
    pub fn set(&mut self, w: usize, h: usize, l: usize, v: f64) {
        self.data[(l * self.height + h) * self.width + w] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Multiply every layer by a `width x height` window.
    pub fn apply_window(&mut self, window: &Grid) -> Result<()> {
        if window.dims() != (self.width, self.height) {
            return Err(Error::mismatch((self.width, self.height), window.dims()));
        }
        let win = window.as_slice();
        for l in 0..self.layers {
            for (v, w) in self.layer_mut(l).iter_mut().zip(win) {
                *v *= w;
            }
        }
        Ok(())
    }

    /// Concatenate the layers of two maps on the same grid.
    pub fn concat(&self, other: &FeatureMap) -> Result<FeatureMap> {
        if (self.width, self.height) != (other.width, other.height) {
            return Err(Error::mismatch(
                (self.width, self.height),
                (other.width, other.height),
            ));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(FeatureMap {
            width: self.width,
            height: self.height,
            layers: self.layers + other.layers,
            cell_size: self.cell_size,
            data,
        })
    }

    /// Cyclic shift: the value at `(w, h)` moves to `(w + dx, h + dy)` modulo the grid.
    pub fn cyclic_shift(&self, dx: isize, dy: isize) -> FeatureMap {
        let (w, h) = (self.width as isize, self.height as isize);
        let mut out = FeatureMap::zeros(self.width, self.height, self.layers, self.cell_size);
        for l in 0..self.layers {
            for y in 0..h {
                for x in 0..w {
                    let nx = (x + dx).rem_euclid(w) as usize;
                    let ny = (y + dy).rem_euclid(h) as usize;
                    out.set(nx, ny, l, self.get(x as usize, y as usize, l));
                }
            }
        }
        out
    }
}

/// Complex spectrum with the same layout as [`FeatureMap`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumMap {
    width: usize,
    height: usize,
    layers: usize,
    data: Vec<Complex64>,
}

impl SpectrumMap {
    pub fn new(width: usize, height: usize, layers: usize, data: Vec<Complex64>) -> Result<Self> {
        if width == 0 || height == 0 || layers == 0 {
            return Err(Error::Empty("spectrum with a zero dimension"));
        }
        if data.len() != width * height * layers {
            return Err(Error::mismatch(width * height * layers, data.len()));
        }
        Ok(SpectrumMap {
            width,
            height,
            layers,
            data,
        })
    }

    /// Per-layer forward transform of a feature map.
    pub fn forward(map: &FeatureMap) -> SpectrumMap {
        let (w, h, layers) = map.dims();
        let mut data = Vec::with_capacity(w * h * layers);
        for l in 0..layers {
            data.extend(fft::forward_real(map.layer(l), w, h));
        }
        SpectrumMap {
            width: w,
            height: h,
            layers,
            data,
        }
    }

    pub fn forward_grid(grid: &Grid) -> SpectrumMap {
        let (w, h) = grid.dims();
        SpectrumMap {
            width: w,
            height: h,
            layers: 1,
            data: fft::forward_real(grid.as_slice(), w, h),
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.width, self.height, self.layers)
    }

    pub fn layer(&self, l: usize) -> &[Complex64] {
        let n = self.width * self.height;
        &self.data[l * n..(l + 1) * n]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    /// Inverse transform of a single-layer spectrum, dropping the imaginary residue.
    pub fn inverse_real(&self) -> (Grid, f64) {
        debug_assert_eq!(self.layers, 1);
        let (values, residue) = fft::inverse_real(&self.data, self.width, self.height);
        (
            Grid::new(self.width, self.height, values).expect("spectrum shape"),
            residue,
        )
    }

    fn check_same(&self, other: &SpectrumMap) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::mismatch(self.dims(), other.dims()));
        }
        Ok(())
    }
}

/// Desired regression output: a Gaussian bump on the cell grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMap {
    pub values: Grid,
    pub sigma: f64,
    pub peak: (usize, usize),
}

/// Gaussian label with its maximum `1.0` at `peak`; distances wrap around the grid.
pub fn gaussian_label(
    width: usize,
    height: usize,
    sigma: f64,
    peak: (usize, usize),
) -> Result<LabelMap> {
    if width == 0 || height == 0 {
        return Err(Error::Empty("label grid"));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("label sigma must be positive, got {sigma}")));
    }
    if peak.0 >= width || peak.1 >= height {
        return Err(Error::invalid(format!(
            "label peak {peak:?} outside {width}x{height} grid"
        )));
    }
    let wrap = |a: usize, b: usize, n: usize| {
        let d = a.abs_diff(b);
        d.min(n - d) as f64
    };
    let values = Grid::from_fn(width, height, |w, h| {
        let dw = wrap(w, peak.0, width);
        let dh = wrap(h, peak.1, height);
        (-(dw * dw + dh * dh) / (2.0 * sigma * sigma)).exp()
    });
    Ok(LabelMap {
        values,
        sigma,
        peak,
    })
}

fn hann_1d(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos()))
        .collect()
}

/// Separable raised-cosine window. A single-point window is `1`.
pub fn hann_window(width: usize, height: usize) -> Result<Grid> {
    if width == 0 || height == 0 {
        return Err(Error::Empty("window grid"));
    }
    let wx = hann_1d(width);
    let wy = hann_1d(height);
    Ok(Grid::from_fn(width, height, |w, h| wx[w] * wy[h]))
}

pub(crate) fn hann_vector(n: usize) -> Vec<f64> {
    hann_1d(n)
}

fn check_pair(x: &FeatureMap, z: &FeatureMap) -> Result<()> {
    if x.dims() != z.dims() {
        return Err(Error::mismatch(x.dims(), z.dims()));
    }
    Ok(())
}

/// Sum over layers of `conj(x_hat) * z_hat`.
fn cross_spectrum(xf: &SpectrumMap, zf: &SpectrumMap) -> Vec<Complex64> {
    let n = xf.width * xf.height;
    let mut acc = vec![Complex64::default(); n];
    for l in 0..xf.layers {
        for ((a, x), z) in acc.iter_mut().zip(xf.layer(l)).zip(zf.layer(l)) {
            *a += x.conj() * z;
        }
    }
    acc
}

/// Gaussian kernel correlation from precomputed spectra and squared norms.
pub(crate) fn gaussian_kernel_from_spectra(
    xf: &SpectrumMap,
    zf: &SpectrumMap,
    x_norm: f64,
    z_norm: f64,
    kernel_sigma: f64,
) -> SpectrumMap {
    let (w, h, layers) = xf.dims();
    let n = (w * h * layers) as f64;
    let cross = cross_spectrum(xf, zf);
    let (xz, _) = fft::inverse_real(&cross, w, h);
    let k: Vec<f64> = xz
        .iter()
        .map(|&c| {
            let d = (x_norm + z_norm - 2.0 * c).max(0.0);
            (-d / (kernel_sigma * kernel_sigma * n)).exp()
        })
        .collect();
    SpectrumMap {
        width: w,
        height: h,
        layers: 1,
        data: fft::forward_real(&k, w, h),
    }
}

/// Spectrum of the Gaussian kernel `k(x, z)` evaluated at every cyclic shift.
pub fn gaussian_kernel_correlation(
    x: &FeatureMap,
    z: &FeatureMap,
    kernel_sigma: f64,
) -> Result<SpectrumMap> {
    check_pair(x, z)?;
    if !(kernel_sigma > 0.0) {
        return Err(Error::invalid(format!(
            "kernel sigma must be positive, got {kernel_sigma}"
        )));
    }
    let xf = SpectrumMap::forward(x);
    let zf = SpectrumMap::forward(z);
    Ok(gaussian_kernel_from_spectra(
        &xf,
        &zf,
        x.norm_sqr(),
        z.norm_sqr(),
        kernel_sigma,
    ))
}

/// Spectrum of the unnormalized linear kernel `sum_i x_i z_(i + tau)`.
pub fn linear_kernel_correlation(x: &FeatureMap, z: &FeatureMap) -> Result<SpectrumMap> {
    check_pair(x, z)?;
    let xf = SpectrumMap::forward(x);
    let zf = SpectrumMap::forward(z);
    Ok(SpectrumMap {
        width: x.width,
        height: x.height,
        layers: 1,
        data: cross_spectrum(&xf, &zf),
    })
}

/// Closed-form dual solution `y_hat / (k_hat + lambda)`, element-wise.
pub fn train_filter(k_hat: &SpectrumMap, y_hat: &SpectrumMap, lambda: f64) -> Result<SpectrumMap> {
    k_hat.check_same(y_hat)?;
    if !(lambda >= 0.0) {
        return Err(Error::invalid(format!("lambda must be >= 0, got {lambda}")));
    }
    let mut data = Vec::with_capacity(k_hat.data.len());
    for (i, (k, y)) in k_hat.data.iter().zip(&y_hat.data).enumerate() {
        let den = k + lambda;
        let magnitude = den.norm();
        if magnitude < 1e-12 {
            return Err(Error::DegenerateTraining { index: i, magnitude });
        }
        data.push(y / den);
    }
    Ok(SpectrumMap { data, ..*k_hat })
}

/// Primal ridge regression `(X^T X + lambda I)^-1 X^T y` for a row-major
/// `rows x cols` design matrix.
pub fn ridge_closed_form(
    x: &[f64],
    rows: usize,
    cols: usize,
    y: &[f64],
    lambda: f64,
) -> Result<Vec<f64>> {
    if rows == 0 || cols == 0 {
        return Err(Error::Empty("ridge design matrix"));
    }
    if x.len() != rows * cols {
        return Err(Error::mismatch(rows * cols, x.len()));
    }
    if y.len() != rows {
        return Err(Error::mismatch(rows, y.len()));
    }
    if !(lambda >= 0.0) {
        return Err(Error::invalid(format!("lambda must be >= 0, got {lambda}")));
    }
    let xm = DMatrix::from_row_slice(rows, cols, x);
    let yv = DVector::from_column_slice(y);
    let gram = xm.transpose() * &xm + DMatrix::identity(cols, cols) * lambda;
    let rhs = xm.transpose() * yv;
    let scale = gram.diagonal().max().max(f64::MIN_POSITIVE);
    let chol = gram
        .cholesky()
        .ok_or(Error::Singular("X^T X + lambda I is not positive definite"))?;
    let l = chol.l_dirty();
    if (0..cols).any(|i| l[(i, i)] * l[(i, i)] <= scale * 1e-13) {
        return Err(Error::Singular("X^T X + lambda I is numerically singular"));
    }
    let beta = chol.solve(&rhs);
    if beta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("ridge solution is not finite"));
    }
    Ok(beta.iter().copied().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterParams {
    pub kernel_sigma: f64,
    pub lambda: f64,
    pub eta: f64,
}

impl Default for FilterParams {
    fn default() -> Self {
        FilterParams {
            kernel_sigma: 0.5,
            lambda: 1e-4,
            eta: 0.02,
        }
    }
}

/// Dual filter coefficients and their training metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterModel {
    spectrum: Option<SpectrumMap>,
    pub params: FilterParams,
    /// Index of the last frame folded into the model (0 while untrained).
    pub frame_index: u64,
}

impl FilterModel {
    pub fn new(params: FilterParams) -> Result<Self> {
        if !(params.kernel_sigma > 0.0) {
            return Err(Error::invalid("kernel sigma must be positive"));
        }
        if !(params.lambda >= 0.0) {
            return Err(Error::invalid("lambda must be >= 0"));
        }
        if !(0.0..=1.0).contains(&params.eta) {
            return Err(Error::invalid(format!(
                "learning rate must lie in [0, 1], got {}",
                params.eta
            )));
        }
        Ok(FilterModel {
            spectrum: None,
            params,
            frame_index: 0,
        })
    }

    pub fn spectrum(&self) -> Option<&SpectrumMap> {
        self.spectrum.as_ref()
    }

    pub fn is_trained(&self) -> bool {
        self.spectrum.is_some()
    }

    /// Fold in a freshly trained spectrum: the first frame replaces the
    /// model, later frames interpolate with the learning rate.
    pub fn update_model(&self, fresh: &SpectrumMap) -> Result<FilterModel> {
        let spectrum = match &self.spectrum {
            None => fresh.clone(),
            Some(prev) => {
                prev.check_same(fresh)?;
                let eta = self.params.eta;
                let data = prev
                    .data
                    .iter()
                    .zip(&fresh.data)
                    .map(|(p, n)| p * (1.0 - eta) + n * eta)
                    .collect();
                SpectrumMap { data, ..*prev }
            }
        };
        Ok(FilterModel {
            spectrum: Some(spectrum),
            params: self.params,
            frame_index: self.frame_index + 1,
        })
    }

    /// Response over all cyclic shifts: `ifft(alpha_hat * k_hat)`.
    pub fn detect_response(&self, k_hat: &SpectrumMap) -> Result<Grid> {
        let spectrum = self
            .spectrum
            .as_ref()
            .ok_or(Error::Uninitialized("filter model has not been trained"))?;
        spectrum.check_same(k_hat)?;
        let product: Vec<Complex64> = spectrum
            .data
            .iter()
            .zip(&k_hat.data)
            .map(|(a, k)| a * k)
            .collect();
        let (values, residue) = fft::inverse_real(&product, spectrum.width, spectrum.height);
        debug_assert!(residue < 1e-6, "response imaginary residue {residue}");
        Grid::new(spectrum.width, spectrum.height, values)
    }
}

/// Interpolate two real feature templates in place: `(1 - eta) * prev + eta * fresh`.
pub fn interpolate_features(prev: &FeatureMap, fresh: &FeatureMap, eta: f64) -> Result<FeatureMap> {
    check_pair(prev, fresh)?;
    let data = prev
        .data
        .iter()
        .zip(&fresh.data)
        .map(|(p, n)| (1.0 - eta) * p + eta * n)
        .collect();
    Ok(FeatureMap {
        data,
        ..prev.clone()
    })
}
