//! Frames and resampled patches.

use std::path::Path;

use ::image::{DynamicImage, GenericImageView};

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

/// Interleaved image with 1 (gray) or 3 (RGB) channels, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

/// Patches are ordinary images resampled from a frame.
pub type ImagePatch = Image;

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Empty("image with zero width or height"));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::invalid(format!("unsupported channel count {channels}")));
        }
        if data.len() != width * height * channels {
            return Err(Error::mismatch(width * height * channels, data.len()));
        }
        Ok(Image {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Self {
        Image::new(width, height, channels, vec![value; width * height * channels])
            .expect("valid image shape")
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Self {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Image::new(width, height, channels, data).expect("valid image shape")
    }

    pub fn from_dynamic(img: &DynamicImage) -> Self {
        let (w, h) = img.dimensions();
        let (w, h) = (w as usize, h as usize);
        if img.color().has_color() {
            let rgb = img.to_rgb8();
            let data = rgb.as_raw().iter().map(|&v| v as f32 / 255.0).collect();
            Image::new(w, h, 3, data).expect("rgb shape")
        } else {
            let gray = img.to_luma8();
            let data = gray.as_raw().iter().map(|&v| v as f32 / 255.0).collect();
            Image::new(w, h, 1, data).expect("gray shape")
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let img = ::image::open(path).map_err(|source| match source {
            ::image::ImageError::IoError(e) => Error::io(path, e),
            source => Error::Image {
                path: path.to_path_buf(),
                source,
            },
        })?;
        Ok(Image::from_dynamic(&img))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes: Vec<u8> = self
            .data
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        let (w, h) = (self.width as u32, self.height as u32);
        let dynimg = if self.channels == 3 {
            DynamicImage::ImageRgb8(::image::RgbImage::from_raw(w, h, bytes).expect("rgb buffer"))
        } else {
            DynamicImage::ImageLuma8(::image::GrayImage::from_raw(w, h, bytes).expect("gray buffer"))
        };
        dynimg.save(path).map_err(|source| match source {
            ::image::ImageError::IoError(e) => Error::io(path, e),
            source => Error::Image {
                path: path.to_path_buf(),
                source,
            },
        })
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
    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn is_color(&self) -> bool {
        self.channels == 3
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f32) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    /// Pixel at clamped coordinates (edge replication).
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize, c: usize) -> f32 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.get(x, y, c)
    }

    /// Mean over channels.
    pub fn to_gray(&self) -> Image {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(3)
            .map(|p| (p[0] + p[1] + p[2]) / 3.0)
            .collect();
        Image::new(self.width, self.height, 1, data).expect("gray shape")
    }

    pub fn rotate90(&self) -> Image {
        // (x, y) -> (height - 1 - y, x), counter-clockwise in image coordinates
        let (w, h) = (self.width, self.height);
        Image::from_fn(h, w, self.channels, |x, y, c| self.get(y, h - 1 - x, c))
    }

    /// Bilinear resampling of the axis-aligned region with top-left `(x0, y0)`
    /// and size `(rw, rh)` (frame pixels) onto an `out_w x out_h` grid. Pixel
    /// centers are aligned; samples outside the frame replicate the border.
    pub fn resample_region(
        &self,
        x0: f64,
        y0: f64,
        rw: f64,
        rh: f64,
        out_w: usize,
        out_h: usize,
    ) -> Image {
        let sx = rw / out_w as f64;
        let sy = rh / out_h as f64;
        let ch = self.channels;
        let xs: Vec<(isize, isize, f32)> = (0..out_w)
            .map(|i| {
                let x = x0 + (i as f64 + 0.5) * sx - 0.5;
                let xf = x.floor();
                (xf as isize, xf as isize + 1, (x - xf) as f32)
            })
            .collect();
        let mut data = Vec::with_capacity(out_w * out_h * ch);
        for j in 0..out_h {
            let y = y0 + (j as f64 + 0.5) * sy - 0.5;
            let yf = y.floor();
            let (ya, yb, fy) = (yf as isize, yf as isize + 1, (y - yf) as f32);
            for &(xa, xb, fx) in &xs {
                for c in 0..ch {
                    let top = self.get_clamped(xa, ya, c) * (1.0 - fx)
                        + self.get_clamped(xb, ya, c) * fx;
                    let bottom = self.get_clamped(xa, yb, c) * (1.0 - fx)
                        + self.get_clamped(xb, yb, c) * fx;
                    data.push(top * (1.0 - fy) + bottom * fy);
                }
            }
        }
        Image::new(out_w, out_h, ch, data).expect("patch shape")
    }
}

/// Search-window extraction: the box grown by `(1 + padding)` around its
/// center, resampled to `template_size` pixels.
pub fn extract_patch(
    frame: &Image,
    bbox: &BoundingBox,
    padding: f64,
    template_size: (usize, usize),
) -> Result<ImagePatch> {
    if !bbox.is_valid() {
        return Err(Error::invalid(format!("degenerate box {bbox}")));
    }
    if !(padding >= 0.0) {
        return Err(Error::invalid(format!("padding must be >= 0, got {padding}")));
    }
    if template_size.0 == 0 || template_size.1 == 0 {
        return Err(Error::Empty("template size"));
    }
    let frame_box = BoundingBox::new(0.0, 0.0, frame.width as f64, frame.height as f64);
    if bbox.intersection_area(&frame_box) <= 0.0 {
        return Err(Error::OutOfFrame(bbox.to_string()));
    }
    let (cx, cy) = bbox.center();
    let rw = bbox.w * (1.0 + padding);
    let rh = bbox.h * (1.0 + padding);
    Ok(frame.resample_region(
        cx - rw / 2.0,
        cy - rh / 2.0,
        rw,
        rh,
        template_size.0,
        template_size.1,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize) -> Image {
        Image::from_fn(w, h, 3, |x, y, c| ((x * 3 + y * 5 + c) % 17) as f32 / 16.0)
    }

    #[test]
    fn identity_extraction() {
        let f = ramp(12, 9);
        let b = BoundingBox::new(0.0, 0.0, 12.0, 9.0);
        let p = extract_patch(&f, &b, 0.0, (12, 9)).unwrap();
        assert_eq!(p, f);
    }

    #[test]
    fn padding_doubles_the_region() {
        let f = ramp(40, 40);
        let b = BoundingBox::new(15.0, 15.0, 10.0, 10.0);
        // padding 1 => a 20x20 region; sampling it at 20x20 is a pure crop
        let p = extract_patch(&f, &b, 1.0, (20, 20)).unwrap();
        for y in 0..20 {
            for x in 0..20 {
                for c in 0..3 {
                    assert_eq!(p.get(x, y, c), f.get(x + 10, y + 10, c));
                }
            }
        }
    }

    #[test]
    fn border_replication() {
        let f = ramp(20, 10);
        // box straddles the left edge: columns -4..4
        let b = BoundingBox::new(-4.0, 0.0, 8.0, 10.0);
        let p = extract_patch(&f, &b, 0.0, (8, 10)).unwrap();
        for y in 0..10 {
            for x in 0..8 {
                let src = (x as isize - 4).max(0) as usize;
                for c in 0..3 {
                    assert_eq!(p.get(x, y, c), f.get(src, y, c));
                }
            }
        }
    }

    #[test]
    fn out_of_frame_and_degenerate() {
        let f = ramp(10, 10);
        assert!(matches!(
            extract_patch(&f, &BoundingBox::new(20.0, 0.0, 5.0, 5.0), 1.0, (8, 8)),
            Err(Error::OutOfFrame(_))
        ));
        assert!(extract_patch(&f, &BoundingBox::new(2.0, 2.0, 0.0, 5.0), 1.0, (8, 8)).is_err());
        assert!(extract_patch(&f, &BoundingBox::new(2.0, 2.0, 3.0, 5.0), -1.0, (8, 8)).is_err());
    }

    #[test]
    fn rotate_four_times_is_identity() {
        let f = ramp(7, 4);
        assert_eq!(f.rotate90().rotate90().rotate90().rotate90(), f);
    }
}
