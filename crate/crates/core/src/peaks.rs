//! Primary/secondary response peaks and response-quality scores.
//!
//! The secondary peak is the largest response outside a square of half-width
//! `N` (Chebyshev distance) around the primary peak. PSMD compares how far
//! the primary and the secondary peak stand above the layer mean:
//! `(V_p - V_m) / |V_s - V_m|`. PSR and APCE are provided as baselines.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

pub const MASK_HALF_WIDTH_RANGE: (usize, usize) = (2, 15);
pub const MU_RANGE: (f64, f64) = (1.0, 11.0);
pub const NU_MAX: f64 = 5.0;
/// Denominators below this are treated as zero.
pub const EPS_DEN: f64 = 1e-12;
/// Score reported for degenerate (zero-denominator) cases.
pub const PSMD_MAX: f64 = 1e6;

pub type Position = (usize, usize);

/// `W x H x L` detection scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMap {
    layers: Vec<Grid>,
}

impl ResponseMap {
    pub fn new(layers: Vec<Grid>) -> Result<Self> {
        let first = layers.first().ok_or(Error::Empty("response map without layers"))?;
        let dims = first.dims();
        for g in &layers {
            if g.dims() != dims {
                return Err(Error::mismatch(dims, g.dims()));
            }
            if !g.is_finite() {
                return Err(Error::invalid("non-finite response value"));
            }
        }
        Ok(ResponseMap { layers })
    }

    pub fn single(layer: Grid) -> Result<Self> {
        ResponseMap::new(vec![layer])
    }

    pub fn layers(&self) -> &[Grid] {
        &self.layers
    }

    pub fn layer(&self, l: usize) -> &Grid {
        &self.layers[l]
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }
}

/// Binary mask: `true` cells are kept (value 1), `false` cells are masked (0).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    keep: Vec<bool>,
}

impl Mask {
    #[inline]
    pub fn get(&self, w: usize, h: usize) -> bool {
        self.keep[h * self.width + w]
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn ones(&self) -> usize {
        self.keep.iter().filter(|&&k| k).count()
    }

    pub fn zeros(&self) -> usize {
        self.keep.len() - self.ones()
    }

    pub fn as_grid(&self) -> Grid {
        Grid::from_fn(self.width, self.height, |w, h| if self.get(w, h) { 1.0 } else { 0.0 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakReport {
    pub layer: usize,
    pub primary: Position,
    pub v_p: f64,
    pub secondary: Option<Position>,
    pub v_s: f64,
    pub mask_half_width: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsmdScore {
    pub value: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceReport {
    pub v_m: f64,
    pub v_p: f64,
    pub v_s: f64,
    pub psmd: f64,
    pub psmd_degenerate: bool,
    pub primary: Position,
    pub secondary: Option<Position>,
    pub update_flag: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveThresholds {
    pub t_psmd: f64,
    pub t_max: f64,
    pub mu: f64,
    pub nu: f64,
}

/// Layer holding the global maximum; ties go to the lowest layer index.
pub fn max_response_layer(r: &ResponseMap) -> usize {
    let mut best = 0;
    let mut best_val = r.layers[0].max();
    for (l, g) in r.layers.iter().enumerate().skip(1) {
        let v = g.max();
        if v > best_val {
            best = l;
            best_val = v;
        }
    }
    best
}

/// Row-major first argmax.
pub fn primary_peak(layer: &Grid) -> (Position, f64) {
    layer.argmax()
}

pub fn check_mask_half_width(n: usize) -> Result<()> {
    let (lo, hi) = MASK_HALF_WIDTH_RANGE;
    if n < lo || n > hi {
        return Err(Error::invalid(format!(
            "mask half-width N must lie in [{lo}, {hi}], got {n}"
        )));
    }
    Ok(())
}

/// Zero out the `(2N + 1)`-sided square centered on `primary`, clipped at the
/// borders.
pub fn build_mask(width: usize, height: usize, primary: Position, n: usize) -> Result<Mask> {
    check_mask_half_width(n)?;
    if width == 0 || height == 0 {
        return Err(Error::Empty("mask grid"));
    }
    if primary.0 >= width || primary.1 >= height {
        return Err(Error::invalid(format!(
            "primary {primary:?} outside {width}x{height} grid"
        )));
    }
    let mut keep = Vec::with_capacity(width * height);
    for h in 0..height {
        for w in 0..width {
            let d = w.abs_diff(primary.0).max(h.abs_diff(primary.1));
            keep.push(d > n);
        }
    }
    Ok(Mask {
        width,
        height,
        keep,
    })
}

/// Largest value among unmasked cells (row-major first occurrence).
pub fn secondary_peak(layer: &Grid, mask: &Mask) -> Result<(Position, f64)> {
    if layer.dims() != mask.dims() {
        return Err(Error::mismatch(layer.dims(), mask.dims()));
    }
    let mut best: Option<(Position, f64)> = None;
    for h in 0..layer.height() {
        for w in 0..layer.width() {
            if !mask.get(w, h) {
                continue;
            }
            let v = layer.get(w, h);
            if best.map_or(true, |(_, b)| v > b) {
                best = Some(((w, h), v));
            }
        }
    }
    best.ok_or(Error::NoSecondaryPeak)
}

pub fn layer_mean(layer: &Grid) -> f64 {
    layer.mean()
}

/// `(V_p - V_m) / |V_s - V_m|`, capped at [`PSMD_MAX`].
pub fn psmd(v_p: f64, v_s: f64, v_m: f64) -> PsmdScore {
    let num = v_p - v_m;
    let den = (v_s - v_m).abs();
    if den < EPS_DEN {
        return PsmdScore {
            value: if num > EPS_DEN { PSMD_MAX } else { 0.0 },
            degenerate: true,
        };
    }
    PsmdScore {
        value: (num / den).min(PSMD_MAX),
        degenerate: false,
    }
}

/// Peak analysis of a response map with mask half-width `n`.
pub fn find_peaks(r: &ResponseMap, n: usize) -> Result<PeakReport> {
    check_mask_half_width(n)?;
    let layer = max_response_layer(r);
    let grid = r.layer(layer);
    let (primary, v_p) = primary_peak(grid);
    let mask = build_mask(grid.width(), grid.height(), primary, n)?;
    let (secondary, v_s) = match secondary_peak(grid, &mask) {
        Ok((p, v)) => (Some(p), v),
        Err(Error::NoSecondaryPeak) => (None, 0.0),
        Err(e) => return Err(e),
    };
    Ok(PeakReport {
        layer,
        primary,
        v_p,
        secondary,
        v_s,
        mask_half_width: n,
    })
}

/// `V_m`, `V_p`, `V_s` and PSMD of a response. The update flag is left `true`;
/// callers gate it with [`update_gate`].
pub fn confidence(r: &ResponseMap, n: usize) -> Result<ConfidenceReport> {
    let peaks = find_peaks(r, n)?;
    let v_m = layer_mean(r.layer(peaks.layer));
    let score = psmd(peaks.v_p, peaks.v_s, v_m);
    Ok(ConfidenceReport {
        v_m,
        v_p: peaks.v_p,
        v_s: peaks.v_s,
        psmd: score.value,
        psmd_degenerate: score.degenerate,
        primary: peaks.primary,
        secondary: peaks.secondary,
        update_flag: true,
    })
}

/// Thresholds from the second frame: `t_psmd = PSMD / mu`, `t_max = V_p / nu`.
pub fn adaptive_thresholds(frame2: &ConfidenceReport, mu: f64, nu: f64) -> Result<AdaptiveThresholds> {
    if !(MU_RANGE.0..=MU_RANGE.1).contains(&mu) {
        return Err(Error::invalid(format!("mu must lie in [1, 11], got {mu}")));
    }
    if !(nu > 0.0 && nu <= NU_MAX) {
        return Err(Error::invalid(format!("nu must lie in (0, 5], got {nu}")));
    }
    Ok(AdaptiveThresholds {
        t_psmd: frame2.psmd / mu,
        t_max: frame2.v_p / nu,
        mu,
        nu,
    })
}

pub fn update_gate(report: &ConfidenceReport, thresholds: &AdaptiveThresholds) -> bool {
    report.psmd >= thresholds.t_psmd && report.v_p >= thresholds.t_max
}

/// Peak-to-sidelobe ratio. `exclusion` is the side of the square window around
/// the peak left out of the sidelobe (0 keeps every cell, 11 gives 11x11).
pub fn psr(layer: &Grid, exclusion: usize) -> Result<PsmdScore> {
    let (peak, v) = layer.argmax();
    let half = exclusion / 2;
    let mut sum = 0.0;
    let mut count = 0usize;
    let inside = |w: usize, h: usize| {
        exclusion > 0 && w.abs_diff(peak.0) <= half && h.abs_diff(peak.1) <= half
    };
    for h in 0..layer.height() {
        for w in 0..layer.width() {
            if !inside(w, h) {
                sum += layer.get(w, h);
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::invalid(format!(
            "exclusion window {exclusion} covers the whole {}x{} layer",
            layer.width(),
            layer.height()
        )));
    }
    let mean = sum / count as f64;
    let mut var = 0.0;
    for h in 0..layer.height() {
        for w in 0..layer.width() {
            if !inside(w, h) {
                var += (layer.get(w, h) - mean).powi(2);
            }
        }
    }
    let std = (var / count as f64).sqrt();
    if std < EPS_DEN {
        return Ok(PsmdScore {
            value: PSMD_MAX,
            degenerate: true,
        });
    }
    Ok(PsmdScore {
        value: (v - mean) / std,
        degenerate: false,
    })
}

/// Average peak-to-correlation energy of the maximum layer; 0 for a constant map.
pub fn apce(r: &ResponseMap) -> f64 {
    let layer = r.layer(max_response_layer(r));
    let fmax = layer.max();
    let fmin = layer.min();
    let energy = layer
        .as_slice()
        .iter()
        .map(|v| (v - fmin).powi(2))
        .sum::<f64>()
        / layer.len() as f64;
    if energy < EPS_DEN * EPS_DEN {
        return 0.0;
    }
    (fmax - fmin).powi(2) / energy
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn delta(w: usize, h: usize, at: Position) -> Grid {
        let mut g = Grid::filled(w, h, 0.0);
        g.set(at.0, at.1, 1.0);
        g
    }

    #[test]
    fn max_layer_examples() {
        let single = ResponseMap::single(Grid::filled(3, 3, 0.2)).unwrap();
        assert_eq!(max_response_layer(&single), 0);
        let two = ResponseMap::new(vec![delta(4, 4, (1, 1)).map(|v| v * 0.5), delta(4, 4, (2, 2)).map(|v| v * 0.9)])
            .unwrap();
        assert_eq!(max_response_layer(&two), 1);
        let tie = ResponseMap::new(vec![delta(4, 4, (0, 0)), Grid::filled(4, 4, 0.1), delta(4, 4, (3, 3))]).unwrap();
        assert_eq!(max_response_layer(&tie), 0);
    }

    #[test]
    fn primary_examples() {
        assert_eq!(primary_peak(&delta(10, 10, (3, 7))), ((3, 7), 1.0));
        assert_eq!(primary_peak(&Grid::filled(5, 4, 0.3)), ((0, 0), 0.3));
    }

    #[test]
    fn mask_examples() {
        assert_eq!(build_mask(5, 5, (2, 2), 2).unwrap().ones(), 0);
        assert_eq!(build_mask(50, 50, (25, 25), 10).unwrap().ones(), 50 * 50 - 21 * 21);
        let corner = build_mask(10, 10, (0, 0), 2).unwrap();
        assert_eq!(corner.zeros(), 9);
        for h in 0..3 {
            for w in 0..3 {
                assert!(!corner.get(w, h));
            }
        }
        assert!(build_mask(10, 10, (0, 0), 1).is_err());
        assert!(build_mask(10, 10, (0, 0), 16).is_err());
    }

    #[test]
    fn secondary_examples() {
        let d = delta(10, 10, (5, 5));
        let m = build_mask(10, 10, (5, 5), 2).unwrap();
        assert_eq!(secondary_peak(&d, &m).unwrap(), ((0, 0), 0.0));

        let mut g = Grid::filled(21, 21, 0.0);
        g.set(5, 5, 1.0);
        g.set(15, 15, 0.8);
        let m = build_mask(21, 21, (5, 5), 2).unwrap();
        assert_eq!(secondary_peak(&g, &m).unwrap(), ((15, 15), 0.8));

        let mut g = Grid::filled(21, 21, 0.0);
        g.set(10, 10, 1.0);
        g.set(11, 10, 0.8);
        g.set(2, 18, 0.3);
        let m = build_mask(21, 21, (10, 10), 2).unwrap();
        assert_eq!(secondary_peak(&g, &m).unwrap(), ((2, 18), 0.3));

        let full = build_mask(5, 5, (2, 2), 2).unwrap();
        assert!(matches!(secondary_peak(&d.resample(5, 5), &full), Err(Error::NoSecondaryPeak)));
    }

    #[test]
    fn mean_examples() {
        assert_eq!(layer_mean(&Grid::filled(4, 3, 0.25)), 0.25);
        assert_abs_diff_eq!(layer_mean(&delta(10, 10, (1, 1))), 0.01, epsilon = 1e-15);
    }

    #[test]
    fn psmd_examples() {
        let r = confidence(&ResponseMap::single(delta(10, 10, (4, 4))).unwrap(), 2).unwrap();
        assert_abs_diff_eq!(r.psmd, 99.0, epsilon = 1e-9);

        let mut g = Grid::filled(21, 21, 0.0);
        g.set(5, 5, 1.0);
        g.set(15, 15, 0.8);
        let r = confidence(&ResponseMap::single(g).unwrap(), 2).unwrap();
        let vm = 1.8 / 441.0;
        assert_abs_diff_eq!(r.v_m, vm, epsilon = 1e-15);
        assert_abs_diff_eq!(r.psmd, (1.0 - vm) / (0.8 - vm), epsilon = 1e-12);
        assert_abs_diff_eq!(r.psmd, 1.2513, epsilon = 1e-3);

        for delta in [1e-3, 0.5, 7.0] {
            assert_abs_diff_eq!(psmd(0.2 + delta, 0.2 + delta, 0.2).value, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn psmd_degenerate_is_capped() {
        let s = psmd(1.0, 0.5, 0.5);
        assert!(s.degenerate);
        assert_eq!(s.value, PSMD_MAX);
        let flat = psmd(0.5, 0.5, 0.5);
        assert!(flat.degenerate);
        assert_eq!(flat.value, 0.0);
    }

    fn report(psmd: f64, v_p: f64) -> ConfidenceReport {
        ConfidenceReport {
            v_m: 0.0,
            v_p,
            v_s: 0.0,
            psmd,
            psmd_degenerate: false,
            primary: (0, 0),
            secondary: None,
            update_flag: true,
        }
    }

    #[test]
    fn threshold_examples() {
        let t = adaptive_thresholds(&report(99.0, 1.0), 1.06, 0.94).unwrap();
        assert_abs_diff_eq!(t.t_psmd, 93.396, epsilon = 1e-3);
        assert_abs_diff_eq!(t.t_max, 1.06383, epsilon = 1e-5);
        let t = adaptive_thresholds(&report(42.5, 1.0), 1.0, 1.0).unwrap();
        assert_eq!(t.t_psmd, 42.5);
        assert!(adaptive_thresholds(&report(1.0, 1.0), 0.5, 1.0).is_err());
        assert!(adaptive_thresholds(&report(1.0, 1.0), 12.0, 1.0).is_err());
        assert!(adaptive_thresholds(&report(1.0, 1.0), 1.0, 0.0).is_err());
        assert!(adaptive_thresholds(&report(1.0, 1.0), 1.0, 5.5).is_err());
    }

    #[test]
    fn gate_examples() {
        let t = AdaptiveThresholds { t_psmd: 3.0, t_max: 0.5, mu: 1.0, nu: 1.0 };
        assert!(update_gate(&report(5.0, 0.6), &t));
        assert!(!update_gate(&report(2.0, 0.6), &t));
        assert!(!update_gate(&report(2.0, 5.0), &t));
        assert!(!update_gate(&report(5.0, 0.4), &t));
    }

    #[test]
    fn psr_examples() {
        let flat = psr(&Grid::filled(8, 8, 0.3), 0).unwrap();
        assert!(flat.degenerate);
        let d = psr(&delta(10, 10, (4, 4)), 0).unwrap();
        // direct oracle: 99 zeros and a single 1
        let mean = 0.01;
        let std = ((99.0 * mean * mean + (1.0 - mean) * (1.0 - mean)) / 100.0f64).sqrt();
        assert_abs_diff_eq!(d.value, (1.0 - mean) / std, epsilon = 1e-12);

        let base = Grid::from_fn(20, 20, |w, h| ((w * 7 + h * 3) % 5) as f64 * 0.05);
        let mut low = base.clone();
        low.set(10, 10, 1.0);
        let mut high = base;
        high.set(10, 10, 2.0);
        assert!(psr(&high, 11).unwrap().value > psr(&low, 11).unwrap().value);
        assert!(psr(&Grid::filled(5, 5, 0.0), 11).is_err());
    }

    #[test]
    fn apce_examples() {
        assert_eq!(apce(&ResponseMap::single(Grid::filled(6, 6, 0.7)).unwrap()), 0.0);
        let d = ResponseMap::single(delta(10, 10, (2, 3))).unwrap();
        assert_abs_diff_eq!(apce(&d), 100.0, epsilon = 1e-9);
        let g = Grid::from_fn(9, 7, |w, h| ((w * 5 + h * 11) % 13) as f64 / 13.0);
        let a = apce(&ResponseMap::single(g.clone()).unwrap());
        let b = apce(&ResponseMap::single(g.map(|v| v * 3.7)).unwrap());
        assert_abs_diff_eq!(a, b, epsilon = 1e-9);
    }

    fn arb_grid() -> impl Strategy<Value = Grid> {
        (8usize..30, 8usize..30).prop_flat_map(|(w, h)| {
            prop::collection::vec(-1.0f64..1.0, w * h)
                .prop_map(move |v| Grid::new(w, h, v).unwrap())
        })
    }

    proptest! {
        #[test]
        fn mask_census(w in 1usize..40, h in 1usize..40, pw in 0usize..40, ph in 0usize..40, n in 2usize..=15) {
            let primary = (pw % w, ph % h);
            let m = build_mask(w, h, primary, n).unwrap();
            let span = |p: usize, len: usize| (p + n).min(len - 1) - p.saturating_sub(n) + 1;
            prop_assert_eq!(m.zeros(), span(primary.0, w) * span(primary.1, h));
            for y in 0..h {
                for x in 0..w {
                    if !m.get(x, y) {
                        prop_assert!(x.abs_diff(primary.0).max(y.abs_diff(primary.1)) <= n);
                    }
                }
            }
        }

        #[test]
        fn secondary_outside_mask(g in arb_grid(), n in 2usize..=6) {
            let rep = find_peaks(&ResponseMap::single(g.clone()).unwrap(), n).unwrap();
            if let Some(s) = rep.secondary {
                prop_assert!(s != rep.primary);
                prop_assert!(s.0.abs_diff(rep.primary.0).max(s.1.abs_diff(rep.primary.1)) > n);
                prop_assert!(rep.v_p >= rep.v_s);
            }
        }

        #[test]
        fn psmd_shift_scale_invariant(g in arb_grid(), c in -5.0f64..5.0, s in 0.1f64..10.0) {
            let base = confidence(&ResponseMap::single(g.clone()).unwrap(), 3).unwrap();
            let shifted = confidence(&ResponseMap::single(g.map(|v| v + c)).unwrap(), 3).unwrap();
            let scaled = confidence(&ResponseMap::single(g.map(|v| v * s)).unwrap(), 3).unwrap();
            prop_assume!(!base.psmd_degenerate);
            prop_assert!((base.psmd - shifted.psmd).abs() <= 1e-9 * base.psmd.abs().max(1.0));
            prop_assert!((base.psmd - scaled.psmd).abs() <= 1e-9 * base.psmd.abs().max(1.0));
        }

        #[test]
        fn gate_is_monotone(p in 0.0f64..10.0, v in 0.0f64..2.0, dp in 0.0f64..5.0, dv in 0.0f64..1.0) {
            let t = AdaptiveThresholds { t_psmd: 4.0, t_max: 1.0, mu: 1.0, nu: 1.0 };
            if update_gate(&report(p, v), &t) {
                prop_assert!(update_gate(&report(p + dp, v + dv), &t));
            }
        }

        #[test]
        fn transposition_invariance(g in arb_grid()) {
            let a = ResponseMap::single(g.clone()).unwrap();
            let b = ResponseMap::single(g.transpose()).unwrap();
            let (ca, cb) = (confidence(&a, 3).unwrap(), confidence(&b, 3).unwrap());
            // unique maxima keep the peak geometry transposed
            let pa = find_peaks(&a, 3).unwrap();
            let pb = find_peaks(&b, 3).unwrap();
            prop_assert_eq!(pa.primary, (pb.primary.1, pb.primary.0));
            prop_assert!((ca.psmd - cb.psmd).abs() <= 1e-9 * ca.psmd.abs().max(1.0));
            prop_assert!((apce(&a) - apce(&b)).abs() <= 1e-9 * apce(&a).max(1.0));
            let (sa, sb) = (psr(&g, 5).unwrap(), psr(&g.transpose(), 5).unwrap());
            prop_assert!((sa.value - sb.value).abs() <= 1e-9 * sa.value.abs().max(1.0));
        }
    }
}
