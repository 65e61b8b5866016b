//! Tracking pipelines assembled from the filter, feature, confidence, fusion
//! and scale modules.
//!
//! Every frame the search window is re-centered on the previous position.
//! Per-feature kernel filters score all cyclic shifts of the window; the
//! responses are merged, the merged argmax gives the translation, a scale
//! filter refines the size, and the confidence gate decides whether the
//! whole model (filters, templates, scale filter, color histograms) learns
//! from the frame.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::color_names::CN_TABLE_ENV;
use crate::features::{
    color_names, foreground_probability, hog, intensity_channels, ColorHistogram,
    ColorNameTable, ColorProbabilityMap,
};
use crate::filter::{
    gaussian_kernel_correlation, gaussian_label, hann_window, interpolate_features, train_filter,
    FeatureMap, FilterModel, FilterParams, SpectrumMap,
};
use crate::fusion::{eam_factor, fixed_merge, merge_tracker_responses, EamParams, MergeBranch};
use crate::geometry::BoundingBox;
use crate::grid::Grid;
use crate::image::{extract_patch, Image, ImagePatch};
use crate::peaks::{
    adaptive_thresholds, apce, check_mask_half_width, confidence, psr, update_gate,
    AdaptiveThresholds, ConfidenceReport, ResponseMap, MU_RANGE, NU_MAX,
};
use crate::scale::{scale_sample, ScaleParams, ScaleState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    /// HOG and color-name (or intensity) filters, PSMD-gated.
    #[serde(rename = "MDRCF")]
    Mdrcf,
    /// HOG filter plus color histogram, merged with the adaptive factor.
    #[serde(rename = "EAMStaple")]
    EamStaple,
    /// `EAMStaple` with the PSMD gate.
    #[serde(rename = "EAMStaple_PSMD")]
    EamStaplePsmd,
    /// HOG filter plus color histogram with the fixed factor.
    #[serde(rename = "Staple_baseline")]
    StapleBaseline,
    /// `MDRCF` updating on every frame.
    #[serde(rename = "always_update_ablation")]
    AlwaysUpdateAblation,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Mdrcf,
        Variant::EamStaple,
        Variant::EamStaplePsmd,
        Variant::StapleBaseline,
        Variant::AlwaysUpdateAblation,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Variant::Mdrcf => "MDRCF",
            Variant::EamStaple => "EAMStaple",
            Variant::EamStaplePsmd => "EAMStaple_PSMD",
            Variant::StapleBaseline => "Staple_baseline",
            Variant::AlwaysUpdateAblation => "always_update_ablation",
        }
    }

    pub fn names() -> Vec<&'static str> {
        Variant::ALL.iter().map(Variant::name).collect()
    }

    fn uses_histogram(&self) -> bool {
        matches!(
            self,
            Variant::EamStaple | Variant::EamStaplePsmd | Variant::StapleBaseline
        )
    }

    fn default_gate(&self) -> Option<GateKind> {
        match self {
            Variant::Mdrcf | Variant::EamStaplePsmd => Some(GateKind::Psmd),
            _ => None,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::UnknownVariant(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateKind {
    Psmd,
    Psr,
    Apce,
}

impl GateKind {
    pub fn name(&self) -> &'static str {
        match self {
            GateKind::Psmd => "psmd",
            GateKind::Psr => "psr",
            GateKind::Apce => "apce",
        }
    }
}

impl FromStr for GateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "psmd" => Ok(GateKind::Psmd),
            "psr" => Ok(GateKind::Psr),
            "apce" => Ok(GateKind::Apce),
            _ => Err(Error::invalid(format!(
                "unknown gate {s:?} (expected psmd, psr or apce)"
            ))),
        }
    }
}

/// Which update gate runs. `Auto` follows the variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateMode {
    #[default]
    Auto,
    Off,
    Psmd,
    Psr,
    Apce,
}

impl GateMode {
    fn resolve(&self, variant: Variant) -> Option<GateKind> {
        match self {
            GateMode::Auto => variant.default_gate(),
            GateMode::Off => None,
            GateMode::Psmd => Some(GateKind::Psmd),
            GateMode::Psr => Some(GateKind::Psr),
            GateMode::Apce => Some(GateKind::Apce),
        }
    }
}

impl From<GateKind> for GateMode {
    fn from(kind: GateKind) -> Self {
        match kind {
            GateKind::Psmd => GateMode::Psmd,
            GateKind::Psr => GateMode::Psr,
            GateKind::Apce => GateMode::Apce,
        }
    }
}

/// Tracker hyperparameters. Serialized as flat JSON; omitted fields take the
/// defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    pub variant: Variant,
    /// Half-width `N` of the square masked around the primary peak (cells).
    pub mask_half_width: usize,
    pub mu: f64,
    pub nu: f64,
    pub h_hat: f64,
    pub phi: f64,
    pub epsilon: f64,
    pub eta: f64,
    pub lambda: f64,
    pub kernel_sigma: f64,
    /// Label width as a fraction of the search grid's extent in cells.
    pub label_sigma_factor: f64,
    /// The search window is the target grown by `1 + padding`.
    pub padding: f64,
    pub cell_size: usize,
    /// Approximate pixel area of the resampled search window.
    pub template_area: f64,
    pub hist_bins: usize,
    pub hist_learning_rate: f64,
    /// Weights of the HOG and color responses in the MDRCF merge.
    pub feature_weights: [f64; 2],
    pub staple_merge_factor: f64,
    /// Replaces the adaptive merge factor of the EAM variants when set.
    pub merge_factor_override: Option<f64>,
    pub gate: GateMode,
    pub psr_threshold: f64,
    /// Side of the square around the peak excluded from the PSR sidelobe.
    pub psr_exclusion: usize,
    pub apce_threshold: f64,
    pub scale_count: usize,
    pub scale_step: f64,
    pub scale_learning_rate: f64,
    pub scale_sigma: f64,
    pub scale_lambda: f64,
    pub scale_model_max_area: f64,
    pub scale_parabolic: bool,
    /// Color-name table file; falls back to the environment, then the built-in table.
    pub cn_table: Option<PathBuf>,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        let scale = ScaleParams::default();
        TrackerConfig {
            variant: Variant::Mdrcf,
            mask_half_width: 10,
            mu: 1.06,
            nu: 0.94,
            h_hat: 0.38,
            phi: 1.09,
            epsilon: 2.0,
            eta: 0.02,
            lambda: 1e-4,
            kernel_sigma: 0.5,
            label_sigma_factor: 0.1,
            padding: 1.5,
            cell_size: 4,
            template_area: 150.0 * 150.0,
            hist_bins: 32,
            hist_learning_rate: 0.04,
            feature_weights: [0.5, 0.5],
            staple_merge_factor: 0.3,
            merge_factor_override: None,
            gate: GateMode::Auto,
            psr_threshold: 7.0,
            psr_exclusion: 11,
            apce_threshold: 20.0,
            scale_count: scale.num_scales,
            scale_step: scale.step,
            scale_learning_rate: scale.learning_rate,
            scale_sigma: scale.sigma,
            scale_lambda: scale.lambda,
            scale_model_max_area: scale.model_max_area,
            scale_parabolic: scale.parabolic,
            cn_table: None,
        }
    }
}

impl TrackerConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: TrackerConfig = serde_json::from_str(text).map_err(|e| Error::Json {
            path: PathBuf::from("<config>"),
            source: e,
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: TrackerConfig = serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }

    pub fn scale_params(&self) -> ScaleParams {
        ScaleParams {
            num_scales: self.scale_count,
            step: self.scale_step,
            learning_rate: self.scale_learning_rate,
            sigma: self.scale_sigma,
            lambda: self.scale_lambda,
            model_max_area: self.scale_model_max_area,
            cell_size: self.cell_size,
            parabolic: self.scale_parabolic,
        }
    }

    pub fn filter_params(&self) -> FilterParams {
        FilterParams {
            kernel_sigma: self.kernel_sigma,
            lambda: self.lambda,
            eta: self.eta,
        }
    }

    pub fn eam_params(&self) -> EamParams {
        EamParams {
            h_hat: self.h_hat,
            phi: self.phi,
            epsilon: self.epsilon,
        }
    }

    /// Gate in effect for this configuration, `None` when every frame updates.
    pub fn gate_kind(&self) -> Option<GateKind> {
        self.gate.resolve(self.variant)
    }

    pub fn validate(&self) -> Result<()> {
        check_mask_half_width(self.mask_half_width)?;
        if !(MU_RANGE.0..=MU_RANGE.1).contains(&self.mu) {
            return Err(Error::invalid(format!("mu must lie in [1, 11], got {}", self.mu)));
        }
        if !(self.nu > 0.0 && self.nu <= NU_MAX) {
            return Err(Error::invalid(format!("nu must lie in (0, 5], got {}", self.nu)));
        }
        if !(self.epsilon > 0.0) || !self.h_hat.is_finite() || !self.phi.is_finite() {
            return Err(Error::invalid("merge-factor parameters must be finite, epsilon > 0"));
        }
        FilterModel::new(self.filter_params())?;
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        unit("hist_learning_rate", self.hist_learning_rate)?;
        unit("staple_merge_factor", self.staple_merge_factor)?;
        if let Some(v) = self.merge_factor_override {
            unit("merge_factor_override", v)?;
        }
        if !(self.label_sigma_factor > 0.0) {
            return Err(Error::invalid("label_sigma_factor must be positive"));
        }
        if !(self.padding >= 0.0) {
            return Err(Error::invalid("padding must be >= 0"));
        }
        if self.cell_size == 0 {
            return Err(Error::invalid("cell_size must be positive"));
        }
        let min_area = (4 * self.cell_size * 4 * self.cell_size) as f64;
        if !(self.template_area >= min_area) {
            return Err(Error::invalid(format!(
                "template_area must be at least {min_area} px"
            )));
        }
        if !(1..=256).contains(&self.hist_bins) {
            return Err(Error::invalid("hist_bins must lie in [1, 256]"));
        }
        let [a, b] = self.feature_weights;
        if !(a >= 0.0 && b >= 0.0 && a + b > 0.0) {
            return Err(Error::invalid("feature weights must be >= 0 with a positive sum"));
        }
        if !self.psr_threshold.is_finite() || !self.apce_threshold.is_finite() {
            return Err(Error::invalid("gate thresholds must be finite"));
        }
        self.scale_params().validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureKind {
    Hog,
    ColorNames,
    Intensity,
}

#[derive(Debug, Clone)]
enum CnTable {
    Builtin,
    Loaded(Arc<ColorNameTable>),
}

impl CnTable {
    fn resolve(config: &TrackerConfig) -> Result<Self> {
        let path = config
            .cn_table
            .clone()
            .or_else(|| std::env::var_os(CN_TABLE_ENV).map(PathBuf::from));
        match path {
            Some(p) => Ok(CnTable::Loaded(Arc::new(ColorNameTable::load(&p)?))),
            None => Ok(CnTable::Builtin),
        }
    }

    fn get(&self) -> &ColorNameTable {
        match self {
            CnTable::Builtin => ColorNameTable::builtin(),
            CnTable::Loaded(t) => t,
        }
    }
}

/// One kernel filter over one feature type, with its interpolated template.
#[derive(Debug, Clone)]
struct Learner {
    kind: FeatureKind,
    model: FilterModel,
    template: Option<FeatureMap>,
}

impl Learner {
    fn train(&mut self, x: FeatureMap, label_hat: &SpectrumMap) -> Result<()> {
        let k = gaussian_kernel_correlation(&x, &x, self.model.params.kernel_sigma)?;
        let alpha = train_filter(&k, label_hat, self.model.params.lambda)?;
        self.model = self.model.update_model(&alpha)?;
        self.template = Some(match &self.template {
            None => x,
            Some(t) => interpolate_features(t, &x, self.model.params.eta)?,
        });
        Ok(())
    }

    fn detect(&self, z: &FeatureMap) -> Result<Grid> {
        let template = self
            .template
            .as_ref()
            .ok_or(Error::Uninitialized("filter template missing"))?;
        let k = gaussian_kernel_correlation(template, z, self.model.params.kernel_sigma)?;
        self.model.detect_response(&k)
    }
}

#[derive(Debug, Clone)]
struct ColorModel {
    fg: ColorHistogram,
    bg: ColorHistogram,
}

/// Fixed search-window geometry derived from the initial box.
#[derive(Debug, Clone)]
struct Geometry {
    base_size: (f64, f64),
    /// Template pixels per frame pixel at scale 1, per axis.
    factor: (f64, f64),
    template: (usize, usize),
    grid: (usize, usize),
    label_hat: SpectrumMap,
    window: Grid,
}

impl Geometry {
    fn new(config: &TrackerConfig, size: (f64, f64)) -> Result<Self> {
        let cell = config.cell_size as f64;
        let win = (size.0 * (1.0 + config.padding), size.1 * (1.0 + config.padding));
        let zoom = (config.template_area / (win.0 * win.1)).sqrt();
        let even_cells = |v: f64| {
            let c = ((v * zoom / cell).round() as usize).max(4);
            c + c % 2
        };
        let grid = (even_cells(win.0), even_cells(win.1));
        let template = (grid.0 * config.cell_size, grid.1 * config.cell_size);
        let factor = (template.0 as f64 / win.0, template.1 as f64 / win.1);
        let sigma = config.label_sigma_factor * ((grid.0 * grid.1) as f64).sqrt();
        let label = gaussian_label(grid.0, grid.1, sigma, (grid.0 / 2, grid.1 / 2))?;
        Ok(Geometry {
            base_size: size,
            factor,
            template,
            grid,
            label_hat: SpectrumMap::forward_grid(&label.values),
            window: hann_window(grid.0, grid.1)?,
        })
    }

    /// Target extent inside the template, in template pixels.
    fn target_in_template(&self) -> (f64, f64) {
        (
            self.base_size.0 * self.factor.0,
            self.base_size.1 * self.factor.1,
        )
    }
}

/// Merge factor used on a frame by the histogram variants. `branch` is `None`
/// for a fixed factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergeInfo {
    pub lambda_hat: f64,
    pub branch: Option<MergeBranch>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackOutput {
    pub bbox: BoundingBox,
    pub report: ConfidenceReport,
    pub merge: Option<MergeInfo>,
    pub scale: f64,
}

/// Everything the tracker carries between frames.
#[derive(Debug, Clone)]
pub struct TrackerState {
    frame_size: (usize, usize),
    gray: bool,
    frame_index: u64,
    center: (f64, f64),
    geometry: Geometry,
    learners: Vec<Learner>,
    color: Option<ColorModel>,
    scale: ScaleState,
    thresholds: Option<AdaptiveThresholds>,
}

impl TrackerState {
    /// 1-based index of the last processed frame.
    pub fn frame_index(&self) -> u64 {
        self.frame_index
    }

    pub fn thresholds(&self) -> Option<&AdaptiveThresholds> {
        self.thresholds.as_ref()
    }

    pub fn feature_kinds(&self) -> Vec<FeatureKind> {
        self.learners.iter().map(|l| l.kind).collect()
    }

    /// Whether the first frame was single-channel.
    pub fn is_gray(&self) -> bool {
        self.gray
    }

    pub fn has_color_histogram(&self) -> bool {
        self.color.is_some()
    }

    pub fn scale(&self) -> f64 {
        self.scale.current_scale
    }

    pub fn bbox(&self) -> BoundingBox {
        let (w, h) = self.scale.current_size();
        BoundingBox::from_center(self.center.0, self.center.1, w, h)
    }

    /// Response cells of the search grid.
    pub fn grid(&self) -> (usize, usize) {
        self.geometry.grid
    }

    /// Half-extent of the current search window in frame pixels.
    pub fn search_radius(&self) -> (f64, f64) {
        let s = self.scale.current_scale;
        (
            self.geometry.template.0 as f64 / self.geometry.factor.0 * s / 2.0,
            self.geometry.template.1 as f64 / self.geometry.factor.1 * s / 2.0,
        )
    }

    /// SHA-256 over every learned quantity: filter spectra, templates, the
    /// scale filter and the color histograms.
    pub fn model_digest(&self) -> String {
        let mut h = Sha256::new();
        let mut put = |v: f64| h.update(v.to_bits().to_le_bytes());
        for l in &self.learners {
            put(l.model.frame_index as f64);
            if let Some(s) = l.model.spectrum() {
                for c in s.as_slice() {
                    put(c.re);
                    put(c.im);
                }
            }
            if let Some(t) = &l.template {
                t.as_slice().iter().for_each(|v| put(*v));
            }
        }
        if let Some((num, den)) = self.scale.filter() {
            for c in num {
                put(c.re);
                put(c.im);
            }
            den.iter().for_each(|v| put(*v));
        }
        if let Some(c) = &self.color {
            c.fg.counts().iter().for_each(|v| put(*v));
            c.bg.counts().iter().for_each(|v| put(*v));
        }
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Clone)]
pub struct Tracker {
    config: TrackerConfig,
    table: CnTable,
    state: Option<TrackerState>,
}

impl Tracker {
    pub fn new(config: TrackerConfig) -> Result<Self> {
        config.validate()?;
        let table = CnTable::resolve(&config)?;
        Ok(Tracker {
            config,
            table,
            state: None,
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn state(&self) -> Option<&TrackerState> {
        self.state.as_ref()
    }

    /// Train every model on the first frame. The reported box is `bbox`.
    pub fn init(&mut self, frame: &Image, bbox: &BoundingBox) -> Result<BoundingBox> {
        if !bbox.is_valid() {
            return Err(Error::invalid(format!("degenerate initial box {bbox}")));
        }
        let frame_box = BoundingBox::new(0.0, 0.0, frame.width() as f64, frame.height() as f64);
        if bbox.intersection_area(&frame_box) <= 0.0 {
            return Err(Error::OutOfFrame(bbox.to_string()));
        }
        let cfg = &self.config;
        let gray = !frame.is_color();
        let geometry = Geometry::new(cfg, (bbox.w, bbox.h))?;
        let color_kind = if gray {
            FeatureKind::Intensity
        } else {
            FeatureKind::ColorNames
        };
        let kinds = if cfg.variant.uses_histogram() {
            vec![FeatureKind::Hog]
        } else {
            vec![FeatureKind::Hog, color_kind]
        };
        let model = FilterModel::new(cfg.filter_params())?;
        let learners = kinds
            .into_iter()
            .map(|kind| Learner {
                kind,
                model: model.clone(),
                template: None,
            })
            .collect();
        let scale = ScaleState::new(cfg.scale_params(), (bbox.w, bbox.h), frame.dims())?;
        let mut state = TrackerState {
            frame_size: frame.dims(),
            gray,
            frame_index: 1,
            center: bbox.center(),
            geometry,
            learners,
            color: None,
            scale,
            thresholds: None,
        };
        self.learn(&mut state, frame)?;
        self.state = Some(state);
        Ok(*bbox)
    }

    /// Process the next frame.
    pub fn track(&mut self, frame: &Image) -> Result<TrackOutput> {
        let mut state = self
            .state
            .take()
            .ok_or(Error::Uninitialized("call init before track"))?;
        let result = self.step(&mut state, frame);
        self.state = Some(state);
        result
    }

    fn step(&self, state: &mut TrackerState, frame: &Image) -> Result<TrackOutput> {
        if frame.dims() != state.frame_size {
            return Err(Error::FrameSizeMismatch {
                expected: state.frame_size,
                actual: frame.dims(),
            });
        }
        let cfg = &self.config;
        let geo = &state.geometry;
        let patch = self.search_patch(state, frame)?;

        let mut responses = Vec::with_capacity(state.learners.len());
        for learner in &state.learners {
            let z = self.features(learner.kind, &patch, geo)?;
            responses.push(learner.detect(&z)?);
        }
        let (merged, merge) = match &state.color {
            Some(color) => {
                let alpha = foreground_probability(&patch, &color.fg, &color.bg)?;
                let r_ch = histogram_response(&alpha, geo, cfg.cell_size);
                let info = self.merge_factor(&alpha)?;
                (fixed_merge(&responses[0], &r_ch, info.lambda_hat)?, Some(info))
            }
            None => (merge_tracker_responses(&responses, &cfg.feature_weights)?, None),
        };

        let mut report = confidence(&ResponseMap::single(merged.clone())?, cfg.mask_half_width)?;
        let (dx, dy) = subcell_peak(&merged, report.primary);
        let s = state.scale.current_scale;
        let cell = cfg.cell_size as f64;
        let (fw, fh) = (state.frame_size.0 as f64, state.frame_size.1 as f64);
        state.center = (
            (state.center.0 + dx * cell / geo.factor.0 * s).clamp(0.0, fw),
            (state.center.1 + dy * cell / geo.factor.1 * s).clamp(0.0, fh),
        );

        let sample = scale_sample(frame, &state.bbox(), &state.scale)?;
        let (next_scale, _) = state.scale.estimate_scale(&sample)?;
        state.scale = next_scale;

        state.frame_index += 1;
        let flag = if state.frame_index == 2 {
            state.thresholds = Some(adaptive_thresholds(&report, cfg.mu, cfg.nu)?);
            true
        } else {
            match cfg.gate_kind() {
                None => true,
                Some(GateKind::Psmd) => {
                    let t = state
                        .thresholds
                        .as_ref()
                        .ok_or(Error::Uninitialized("adaptive thresholds"))?;
                    update_gate(&report, t)
                }
                Some(GateKind::Psr) => psr(&merged, cfg.psr_exclusion)?.value >= cfg.psr_threshold,
                Some(GateKind::Apce) => {
                    apce(&ResponseMap::single(merged.clone())?) >= cfg.apce_threshold
                }
            }
        };
        report.update_flag = flag;
        if flag {
            self.learn(state, frame)?;
        }
        Ok(TrackOutput {
            bbox: state.bbox(),
            report,
            merge,
            scale: state.scale.current_scale,
        })
    }

    fn merge_factor(&self, alpha: &ColorProbabilityMap) -> Result<MergeInfo> {
        let cfg = &self.config;
        Ok(match (cfg.variant, cfg.merge_factor_override) {
            (Variant::StapleBaseline, _) => MergeInfo {
                lambda_hat: cfg.staple_merge_factor,
                branch: None,
            },
            (_, Some(v)) => MergeInfo {
                lambda_hat: v,
                branch: None,
            },
            (_, None) => {
                let m = eam_factor(alpha, &cfg.eam_params())?;
                MergeInfo {
                    lambda_hat: m.lambda_hat,
                    branch: Some(m.branch),
                }
            }
        })
    }

    fn search_patch(&self, state: &TrackerState, frame: &Image) -> Result<ImagePatch> {
        extract_patch(
            frame,
            &state.bbox(),
            self.config.padding,
            state.geometry.template,
        )
    }

    fn features(&self, kind: FeatureKind, patch: &ImagePatch, geo: &Geometry) -> Result<FeatureMap> {
        let cell = self.config.cell_size;
        let mut map = match kind {
            FeatureKind::Hog => hog(patch, cell)?,
            FeatureKind::ColorNames => color_names(patch, cell, self.table.get())?,
            FeatureKind::Intensity => intensity_channels(patch, cell)?,
        };
        map.apply_window(&geo.window)?;
        Ok(map)
    }

    /// Fold the window around the current position into every model.
    fn learn(&self, state: &mut TrackerState, frame: &Image) -> Result<()> {
        let patch = self.search_patch(state, frame)?;
        for i in 0..state.learners.len() {
            let x = self.features(state.learners[i].kind, &patch, &state.geometry)?;
            state.learners[i].train(x, &state.geometry.label_hat)?;
        }
        if self.config.variant.uses_histogram() {
            let (fg, bg) = histograms(&patch, &state.geometry, self.config.hist_bins)?;
            state.color = Some(match &state.color {
                None => ColorModel { fg, bg },
                Some(prev) => {
                    let rate = self.config.hist_learning_rate;
                    ColorModel {
                        fg: prev.fg.interpolate(&fg, rate)?,
                        bg: prev.bg.interpolate(&bg, rate)?,
                    }
                }
            });
        }
        let sample = scale_sample(frame, &state.bbox(), &state.scale)?;
        state.scale = state.scale.update_filter(&sample)?;
        Ok(())
    }
}

/// Normalized foreground (target box) and background (rest of the window)
/// histograms of a search patch.
fn histograms(
    patch: &ImagePatch,
    geo: &Geometry,
    bins: usize,
) -> Result<(ColorHistogram, ColorHistogram)> {
    let (tw, th) = geo.target_in_template();
    let (cx, cy) = (patch.width() as f64 / 2.0, patch.height() as f64 / 2.0);
    let inside = |x: usize, y: usize| {
        let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
        (px - cx).abs() < tw / 2.0 && (py - cy).abs() < th / 2.0
    };
    let fg = ColorHistogram::from_region(patch, bins, inside)?;
    let bg = ColorHistogram::from_region(patch, bins, |x, y| !inside(x, y))?;
    Ok((fg.normalized()?, bg.normalized()?))
}

/// Mean foreground probability inside a target-sized box placed at every
/// displacement of the response grid.
fn histogram_response(alpha: &ColorProbabilityMap, geo: &Geometry, cell_size: usize) -> Grid {
    let (w, h) = (alpha.width, alpha.height);
    let mut integral = vec![0.0; (w + 1) * (h + 1)];
    for y in 0..h {
        let mut row = 0.0;
        for x in 0..w {
            row += alpha.get(x, y);
            integral[(y + 1) * (w + 1) + x + 1] = integral[y * (w + 1) + x + 1] + row;
        }
    }
    let sum = |x0: usize, y0: usize, x1: usize, y1: usize| {
        integral[y1 * (w + 1) + x1] - integral[y0 * (w + 1) + x1] - integral[y1 * (w + 1) + x0]
            + integral[y0 * (w + 1) + x0]
    };
    let (tw, th) = geo.target_in_template();
    let (gw, gh) = geo.grid;
    let cell = cell_size as f64;
    Grid::from_fn(gw, gh, |i, j| {
        let cx = w as f64 / 2.0 + (i as f64 - (gw / 2) as f64) * cell;
        let cy = h as f64 / 2.0 + (j as f64 - (gh / 2) as f64) * cell;
        let clip = |v: f64, n: usize| v.round().clamp(0.0, n as f64) as usize;
        let (x0, x1) = (clip(cx - tw / 2.0, w), clip(cx + tw / 2.0, w));
        let (y0, y1) = (clip(cy - th / 2.0, h), clip(cy + th / 2.0, h));
        let area = (x1 - x0) * (y1 - y0);
        if area == 0 {
            0.0
        } else {
            sum(x0, y0, x1, y1) / area as f64
        }
    })
}

/// Displacement of the response peak from the grid center, in cells, refined
/// by a parabola through the peak and its (cyclic) neighbors on each axis.
fn subcell_peak(r: &Grid, peak: (usize, usize)) -> (f64, f64) {
    let (w, h) = r.dims();
    let (px, py) = peak;
    let refine = |l: f64, m: f64, rr: f64| {
        let den = l - 2.0 * m + rr;
        if den < 0.0 {
            (0.5 * (l - rr) / den).clamp(-0.5, 0.5)
        } else {
            0.0
        }
    };
    let ox = if w >= 3 {
        refine(r.get((px + w - 1) % w, py), r.get(px, py), r.get((px + 1) % w, py))
    } else {
        0.0
    };
    let oy = if h >= 3 {
        refine(r.get(px, (py + h - 1) % h), r.get(px, py), r.get(px, (py + 1) % h))
    } else {
        0.0
    };
    (
        px as f64 - (w / 2) as f64 + ox,
        py as f64 - (h / 2) as f64 + oy,
    )
}

/// One row of a tracking run. Frame numbers are 1-based; the confidence
/// fields are absent on the initialization frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame: usize,
    pub bbox: BoundingBox,
    pub scale: f64,
    pub v_m: Option<f64>,
    pub v_p: Option<f64>,
    pub v_s: Option<f64>,
    pub psmd: Option<f64>,
    pub update_flag: bool,
    pub lambda_hat: Option<f64>,
    pub branch: Option<MergeBranch>,
}

impl FrameRecord {
    fn initial(bbox: BoundingBox) -> Self {
        FrameRecord {
            frame: 1,
            bbox,
            scale: 1.0,
            v_m: None,
            v_p: None,
            v_s: None,
            psmd: None,
            update_flag: true,
            lambda_hat: None,
            branch: None,
        }
    }

    fn from_output(frame: usize, out: &TrackOutput) -> Self {
        FrameRecord {
            frame,
            bbox: out.bbox,
            scale: out.scale,
            v_m: Some(out.report.v_m),
            v_p: Some(out.report.v_p),
            v_s: Some(out.report.v_s),
            psmd: Some(out.report.psmd),
            update_flag: out.report.update_flag,
            lambda_hat: out.merge.map(|m| m.lambda_hat),
            branch: out.merge.and_then(|m| m.branch),
        }
    }
}

/// Track through `frames` starting from `init_box`, one record per frame.
pub fn run_sequence(
    frames: &[Image],
    init_box: BoundingBox,
    config: &TrackerConfig,
) -> Result<Vec<FrameRecord>> {
    run_frames(frames.iter().map(|f| Ok(f.clone())), init_box, config)
}

/// Like [`run_sequence`], pulling frames lazily (e.g. decoding from disk).
pub fn run_frames<I>(frames: I, init_box: BoundingBox, config: &TrackerConfig) -> Result<Vec<FrameRecord>>
where
    I: IntoIterator<Item = Result<Image>>,
{
    let mut frames = frames.into_iter();
    let first = frames.next().ok_or(Error::Empty("frame sequence"))??;
    let mut tracker = Tracker::new(config.clone())?;
    let mut records = vec![FrameRecord::initial(tracker.init(&first, &init_box)?)];
    for (i, frame) in frames.enumerate() {
        let out = tracker.track(&frame?)?;
        records.push(FrameRecord::from_output(i + 2, &out));
    }
    Ok(records)
}
