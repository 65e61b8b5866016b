//! Deterministic synthetic sequences with analytic ground truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::BoundingBox;
use crate::image::Image;

/// Smooth random RGB texture over the unit square: a sum of plane waves.
#[derive(Debug, Clone)]
pub struct Texture {
    waves: Vec<([f64; 2], f64, [f64; 3])>,
    base: [f64; 3],
    amplitude: f64,
}

impl Texture {
    pub fn random(seed: u64, base: [f64; 3], amplitude: f64, max_freq: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let waves = (0..6)
            .map(|_| {
                let f = [rng.gen_range(-max_freq..max_freq), rng.gen_range(-max_freq..max_freq)];
                let phase = rng.gen_range(0.0..std::f64::consts::TAU);
                let color = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                (f, phase, color)
            })
            .collect();
        Texture {
            waves,
            base,
            amplitude,
        }
    }

    pub fn solid(color: [f64; 3]) -> Self {
        Texture {
            waves: Vec::new(),
            base: color,
            amplitude: 0.0,
        }
    }

    pub fn sample(&self, u: f64, v: f64) -> [f32; 3] {
        let mut c = self.base;
        for (f, phase, color) in &self.waves {
            let s = (std::f64::consts::TAU * (f[0] * u + f[1] * v) + phase).sin();
            for k in 0..3 {
                c[k] += self.amplitude * s * color[k] / self.waves.len() as f64 * 2.0;
            }
        }
        [c[0].clamp(0.0, 1.0) as f32, c[1].clamp(0.0, 1.0) as f32, c[2].clamp(0.0, 1.0) as f32]
    }
}

/// A textured object drawn at a box (texture coordinates follow the box).
#[derive(Debug, Clone)]
pub struct Sprite<'a> {
    pub bbox: BoundingBox,
    pub texture: &'a Texture,
}

/// Render a `width x height` RGB frame. The background texture is sampled in
/// frame coordinates scaled to `[0, 1]`; sprites are painted in order.
pub fn render(width: usize, height: usize, background: &Texture, sprites: &[Sprite<'_>]) -> Image {
    let mut img = Image::from_fn(width, height, 3, |_, _, _| 0.0);
    for y in 0..height {
        for x in 0..width {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            let mut c = background.sample(px / width as f64, py / height as f64);
            for s in sprites {
                let b = &s.bbox;
                if px >= b.x && px < b.x + b.w && py >= b.y && py < b.y + b.h {
                    c = s.texture.sample((px - b.x) / b.w, (py - b.y) / b.h);
                }
            }
            for k in 0..3 {
                img.set(x, y, k, c[k]);
            }
        }
    }
    img
}

#[derive(Debug, Clone)]
pub struct SyntheticSequence {
    pub frames: Vec<Image>,
    pub truth: Vec<BoundingBox>,
}

/// White `size x size` square on black moving `step` px to the right per frame.
pub fn translating_square(frames: usize, size: f64, step: f64) -> SyntheticSequence {
    let (w, h) = (240usize, 160usize);
    let bg = Texture::solid([0.0; 3]);
    let fg = Texture::solid([1.0; 3]);
    let start = BoundingBox::new(30.0, (h as f64 - size) / 2.0, size, size);
    let mut seq = SyntheticSequence {
        frames: Vec::with_capacity(frames),
        truth: Vec::with_capacity(frames),
    };
    for t in 0..frames {
        let b = BoundingBox { x: start.x + step * t as f64, ..start };
        seq.frames.push(render(w, h, &bg, &[Sprite { bbox: b, texture: &fg }]));
        seq.truth.push(b);
    }
    seq
}

/// Textured target growing by `rate` per frame around a fixed center.
pub fn zooming_target(frames: usize, size: f64, rate: f64, seed: u64) -> SyntheticSequence {
    let (w, h) = (320usize, 240usize);
    let bg = Texture::random(seed ^ 0xb0b, [0.35, 0.4, 0.35], 0.15, 3.0);
    let fg = Texture::random(seed, [0.6, 0.45, 0.3], 0.35, 2.5);
    let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
    let mut seq = SyntheticSequence {
        frames: Vec::with_capacity(frames),
        truth: Vec::with_capacity(frames),
    };
    for t in 0..frames {
        let s = size * rate.powi(t as i32);
        let b = BoundingBox::from_center(cx, cy, s, s);
        seq.frames.push(render(w, h, &bg, &[Sprite { bbox: b, texture: &fg }]));
        seq.truth.push(b);
    }
    seq
}

/// Textured target drifting right by 1 px/frame; during `occluded` frames
/// (0-based, inclusive) a differently colored occluder covers it completely
/// and afterwards slides away upwards.
pub fn occlusion(frames: usize, occluded: std::ops::RangeInclusive<usize>, seed: u64) -> SyntheticSequence {
    let (w, h) = (320usize, 240usize);
    let bg = Texture::random(seed ^ 0x5eed, [0.45, 0.45, 0.5], 0.2, 3.0);
    let fg = Texture::random(seed, [0.75, 0.35, 0.25], 0.35, 2.0);
    let occ = Texture::random(seed ^ 0x0cc, [0.2, 0.55, 0.8], 0.35, 2.0);
    let size = 40.0;
    let mut seq = SyntheticSequence {
        frames: Vec::with_capacity(frames),
        truth: Vec::with_capacity(frames),
    };
    let mut occluder_at: Option<BoundingBox> = None;
    for t in 0..frames {
        let b = BoundingBox::new(100.0 + t as f64, 100.0, size, size);
        let mut sprites = vec![Sprite { bbox: b, texture: &fg }];
        let cover = BoundingBox::from_center(b.center().0, b.center().1, size + 12.0, size + 12.0);
        if occluded.contains(&t) {
            occluder_at = Some(cover);
        } else if t > *occluded.end() {
            if let Some(o) = occluder_at.as_mut() {
                o.y -= 6.0;
                o.x += 1.0;
            }
        }
        let occluder = occluder_at.filter(|_| t >= *occluded.start());
        if let Some(o) = occluder {
            sprites.push(Sprite { bbox: o, texture: &occ });
        }
        seq.frames.push(render(w, h, &bg, &sprites));
        seq.truth.push(b);
    }
    seq
}

/// Large frames with a textured target on a slow diagonal path.
pub fn moving_target(frames: usize, width: usize, height: usize, seed: u64) -> SyntheticSequence {
    let bg = Texture::random(seed ^ 0xface, [0.4, 0.42, 0.45], 0.2, 6.0);
    let fg = Texture::random(seed, [0.7, 0.5, 0.3], 0.35, 2.0);
    let mut seq = SyntheticSequence {
        frames: Vec::with_capacity(frames),
        truth: Vec::with_capacity(frames),
    };
    for t in 0..frames {
        let b = BoundingBox::new(150.0 + 1.5 * t as f64, 100.0 + 0.75 * t as f64, 64.0, 64.0);
        seq.frames.push(render(width, height, &bg, &[Sprite { bbox: b, texture: &fg }]));
        seq.truth.push(b);
    }
    seq
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_sequence_geometry() {
        let s = translating_square(5, 40.0, 2.0);
        assert_eq!(s.frames.len(), 5);
        assert_eq!(s.truth[4].x - s.truth[0].x, 8.0);
        let f = &s.frames[0];
        let (cx, cy) = s.truth[0].center();
        assert_eq!(f.get(cx as usize, cy as usize, 0), 1.0);
        assert_eq!(f.get(2, 2, 1), 0.0);
    }

    #[test]
    fn rendering_is_deterministic() {
        let a = zooming_target(3, 30.0, 1.02, 4);
        let b = zooming_target(3, 30.0, 1.02, 4);
        assert_eq!(a.frames, b.frames);
    }
}
