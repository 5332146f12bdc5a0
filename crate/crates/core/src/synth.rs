//! Seeded synthetic images for tests, experiments and sweeps.
//!
//! Everything here is deterministic in the seed, so expected values frozen in
//! tests stay valid across runs and platforms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::image::Image;
use crate::psf::psf_random_centrosymmetric;

/// Uniform `[0, 1)` noise image with the default centered origin.
pub fn random_image(width: usize, height: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..width * height).map(|_| rng.random::<f64>()).collect();
    Image::new(width, height, samples).expect("positive dimensions")
}

/// Seeded centrosymmetric image (a normalized random kernel); convenient as
/// an in-class blur for centrosymmetric tests.
pub fn random_centrosymmetric(half_size: usize, seed: u64) -> Image {
    psf_random_centrosymmetric(half_size, seed).expect("valid kernel parameters").into_image()
}

/// Smooth positive scene: a sum of randomly placed anisotropic Gaussian
/// bumps, peak-normalized to 1. Smoothness keeps interpolation errors small,
/// which makes these scenes suitable for resampling-based operators.
pub fn smooth_blobs(width: usize, height: usize, blobs: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (width as f64, height as f64);
    let mut samples = vec![0.0f64; width * height];
    for _ in 0..blobs.max(1) {
        let cx = rng.random_range(0.2 * w..0.8 * w);
        let cy = rng.random_range(0.2 * h..0.8 * h);
        let sx = rng.random_range(0.05 * w..0.18 * w);
        let sy = rng.random_range(0.05 * h..0.18 * h);
        let amp = rng.random_range(0.3..1.0);
        let theta = rng.random_range(0.0..std::f64::consts::PI);
        let (c, s) = (theta.cos(), theta.sin());
        for iy in 0..height {
            for ix in 0..width {
                let dx = ix as f64 - cx;
                let dy = iy as f64 - cy;
                let u = c * dx + s * dy;
                let v = -s * dx + c * dy;
                samples[iy * width + ix] +=
                    amp * (-0.5 * (u * u / (sx * sx) + v * v / (sy * sy))).exp();
            }
        }
    }
    let peak = samples.iter().copied().fold(f64::MIN, f64::max);
    if peak > 0.0 {
        for v in &mut samples {
            *v /= peak;
        }
    }
    Image::new(width, height, samples).expect("positive dimensions")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(random_image(8, 6, 5).samples(), random_image(8, 6, 5).samples());
        assert_eq!(smooth_blobs(16, 16, 3, 7).samples(), smooth_blobs(16, 16, 3, 7).samples());
        assert_ne!(random_image(8, 6, 5).samples(), random_image(8, 6, 6).samples());
    }

    #[test]
    fn blobs_are_positive_and_peak_normalized() {
        let f = smooth_blobs(32, 24, 4, 11);
        let peak = f.samples().iter().copied().fold(f64::MIN, f64::max);
        assert!((peak - 1.0).abs() <= 1e-12);
        assert!(f.samples().iter().all(|&v| v >= 0.0));
    }
}
