//! Two-dimensional DFT on row-major buffers.
//!
//! Convention: the forward transform is unnormalized and the inverse is scaled
//! by `1 / (width * height)`, so `inverse(forward(v)) == v` and Parseval reads
//! `sum |v|^2 == sum |V|^2 / (width * height)`.

use std::cell::RefCell;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plans(len: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft_forward(len), p.plan_fft_inverse(len))
    })
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Direction {
    Forward,
    Inverse,
}

fn transform(buf: &mut [Complex64], width: usize, height: usize, dir: Direction) {
    debug_assert_eq!(buf.len(), width * height);
    let (fw, iw) = plans(width);
    let row_plan = if dir == Direction::Forward { fw } else { iw };
    let mut scratch = vec![Complex64::default(); row_plan.get_inplace_scratch_len()];
    // rows are contiguous, rustfft processes consecutive chunks
    row_plan.process_with_scratch(buf, &mut scratch);

    if height > 1 {
        let (fh, ih) = plans(height);
        let col_plan = if dir == Direction::Forward { fh } else { ih };
        let mut col = vec![Complex64::default(); height];
        let mut scratch = vec![Complex64::default(); col_plan.get_inplace_scratch_len()];
        for w in 0..width {
            for h in 0..height {
                col[h] = buf[h * width + w];
            }
            col_plan.process_with_scratch(&mut col, &mut scratch);
            for h in 0..height {
                buf[h * width + w] = col[h];
            }
        }
    }

    if dir == Direction::Inverse {
        let scale = 1.0 / (width * height) as f64;
        buf.iter_mut().for_each(|c| *c *= scale);
    }
}

/// Forward transform of a real `width x height` layer.
pub fn forward_real(values: &[f64], width: usize, height: usize) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform(&mut buf, width, height, Direction::Forward);
    buf
}

pub fn forward(buf: &mut [Complex64], width: usize, height: usize) {
    transform(buf, width, height, Direction::Forward);
}

pub fn inverse(buf: &mut [Complex64], width: usize, height: usize) {
    transform(buf, width, height, Direction::Inverse);
}

/// Inverse transform, keeping the real part. Returns the values together with
/// the largest imaginary residue relative to the largest real magnitude.
pub fn inverse_real(spectrum: &[Complex64], width: usize, height: usize) -> (Vec<f64>, f64) {
    let mut buf = spectrum.to_vec();
    transform(&mut buf, width, height, Direction::Inverse);
    let max_re = buf.iter().map(|c| c.re.abs()).fold(0.0, f64::max);
    let max_im = buf.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
    let residue = if max_re > 0.0 { max_im / max_re } else { max_im };
    (buf.into_iter().map(|c| c.re).collect(), residue)
}

/// 1-D forward transform in place.
pub fn forward_1d(buf: &mut [Complex64]) {
    let (f, _) = plans(buf.len());
    f.process(buf);
}

/// 1-D inverse transform in place, scaled by `1 / len`.
pub fn inverse_1d(buf: &mut [Complex64]) {
    let (_, i) = plans(buf.len());
    i.process(buf);
    let scale = 1.0 / buf.len() as f64;
    buf.iter_mut().for_each(|c| *c *= scale);
}
