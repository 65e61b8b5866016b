#![allow(dead_code)]

use std::path::Path;

use cftrack_core::synthetic::{render, Sprite, Texture};
use cftrack_core::BoundingBox;

/// Write an OTB-layout sequence of a textured box drifting by `step` px/frame.
/// Ground truth is stored 1-based, as on disk in the benchmark.
pub fn write_toy_sequence(dir: &Path, frames: usize, step: (f64, f64), seed: u64) {
    std::fs::create_dir_all(dir.join("img")).unwrap();
    let bg = Texture::random(seed ^ 0xabc, [0.35, 0.4, 0.45], 0.2, 3.0);
    let fg = Texture::random(seed, [0.75, 0.45, 0.25], 0.35, 2.0);
    let mut gt = String::new();
    for t in 0..frames {
        let b = BoundingBox::new(50.0 + step.0 * t as f64, 40.0 + step.1 * t as f64, 32.0, 28.0);
        render(160, 120, &bg, &[Sprite { bbox: b, texture: &fg }])
            .save(&dir.join("img").join(format!("{:04}.png", t + 1)))
            .unwrap();
        gt.push_str(&format!("{},{},{},{}\n", b.x + 1.0, b.y + 1.0, b.w, b.h));
    }
    std::fs::write(dir.join("groundtruth_rect.txt"), gt).unwrap();
}

pub fn write_toy_dataset(root: &Path) {
    write_toy_sequence(&root.join("Drift"), 6, (2.0, 1.0), 1);
    write_toy_sequence(&root.join("Still"), 5, (0.0, 0.0), 2);
    std::fs::write(root.join("manifest.json"), r#"{"Drift": ["FM", "BC"], "Still": ["IV"]}"#).unwrap();
}
