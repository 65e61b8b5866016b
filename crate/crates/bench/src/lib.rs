//! Fixtures shared by the pipeline benchmarks.

use cftrack_core::synthetic::{moving_target, SyntheticSequence};
use cftrack_core::FeatureMap;

/// A 640x360 color clip with a 64 px target, the size used for throughput targets.
pub fn benchmark_clip(frames: usize) -> SyntheticSequence {
    moving_target(frames, 640, 360, 5)
}

/// Deterministic pseudo-random feature map (xorshift, values in [-1, 1)).
pub fn feature_map(width: usize, height: usize, layers: usize, seed: u64) -> FeatureMap {
    let mut s = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) | 1;
    let data = (0..width * height * layers)
        .map(|_| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 52) as f64 - 1.0
        })
        .collect();
    FeatureMap::new(width, height, layers, 4, data).expect("fixture shape")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_deterministic_and_bounded() {
        let a = feature_map(8, 6, 3, 1);
        assert_eq!(a.as_slice(), feature_map(8, 6, 3, 1).as_slice());
        assert_ne!(a.as_slice(), feature_map(8, 6, 3, 2).as_slice());
        assert!(a.as_slice().iter().all(|v| (-1.0..1.0).contains(v)));
        let clip = benchmark_clip(3);
        assert_eq!(clip.frames.len(), 3);
        assert_eq!(clip.frames[0].dims(), (640, 360));
    }
}
