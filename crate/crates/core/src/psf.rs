//! Generators for the point-spread functions used throughout: circular,
//! polygonal, Gaussian, linear-motion and seeded random centrosymmetric
//! kernels.
//!
//! Every generator returns a normalized nonnegative kernel whose origin is
//! its geometric center. Symmetries the blur classes rely on hold exactly:
//! the random kernel is centrosymmetric bit-for-bit, the motion kernel is
//! splatted in mirrored pairs, and axis-aligned trigonometry is snapped so
//! that e.g. a four-fold polygon rasterizes with exact quarter-turn symmetry.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::Image;

/// Subsamples per pixel edge for area antialiasing of sharp shapes.
const AA: usize = 32;

/// A normalized nonnegative convolution kernel.
#[derive(Debug, Clone)]
pub struct Psf {
    inner: Image,
}

impl Psf {
    /// Wraps a raw nonnegative mass distribution, normalizing it to unit sum.
    fn normalized(raw: Image) -> Result<Psf> {
        let mass = raw.mass();
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::VanishingMass);
        }
        let mut inner = raw;
        for v in inner.samples_mut() {
            *v /= mass;
        }
        Ok(Psf { inner })
    }

    pub fn image(&self) -> &Image {
        &self.inner
    }

    pub fn into_image(self) -> Image {
        self.inner
    }

    pub fn width(&self) -> usize {
        self.inner.width()
    }

    pub fn height(&self) -> usize {
        self.inner.height()
    }
}

/// Unit vector at angle `theta`, with values snapped to exact 0 / ±1 near the
/// axes so that axis-aligned kernels are exactly horizontal or vertical.
fn snapped_dir(theta: f64) -> (f64, f64) {
    let snap = |v: f64| {
        if v.abs() < 1e-12 {
            0.0
        } else if (v.abs() - 1.0).abs() < 1e-12 {
            v.signum()
        } else {
            v
        }
    };
    (snap(theta.cos()), snap(theta.sin()))
}

/// Rasterizes the indicator of a shape by pixel-area antialiasing on a grid
/// covering `[-extent, extent]^2`, then trims empty border rows and columns.
fn rasterize(extent: f64, inside: impl Fn(f64, f64) -> bool) -> Result<Image> {
    let r = (extent + 0.5).ceil() as usize;
    let n = 2 * r + 1;
    let mut samples = vec![0.0f64; n * n];
    let sub: Vec<f64> = (0..AA).map(|j| (j as f64 + 0.5) / AA as f64 - 0.5).collect();
    let weight = 1.0 / (AA * AA) as f64;
    for iy in 0..n {
        let y = r as f64 - iy as f64;
        for ix in 0..n {
            let x = ix as f64 - r as f64;
            let mut hit = 0usize;
            for dv in &sub {
                for du in &sub {
                    if inside(x + du, y + dv) {
                        hit += 1;
                    }
                }
            }
            samples[iy * n + ix] = hit as f64 * weight;
        }
    }
    trim_zero_border(Image::new(n, n, samples)?)
}

/// Crops away all-zero border rows and columns, keeping coordinates intact.
pub(crate) fn trim_zero_border(img: Image) -> Result<Image> {
    let (w, h) = (img.width(), img.height());
    let nonzero_row = |iy: usize| (0..w).any(|ix| img.get(ix, iy) != 0.0);
    let nonzero_col = |ix: usize| (0..h).any(|iy| img.get(ix, iy) != 0.0);
    let y0 = (0..h).find(|&iy| nonzero_row(iy)).ok_or(Error::VanishingMass)?;
    let y1 = (0..h).rev().find(|&iy| nonzero_row(iy)).expect("nonzero row exists");
    let x0 = (0..w).find(|&ix| nonzero_col(ix)).ok_or(Error::VanishingMass)?;
    let x1 = (0..w).rev().find(|&ix| nonzero_col(ix)).expect("nonzero col exists");
    img.cropped(x0, y0, x1 - x0 + 1, y1 - y0 + 1)
}

/// Circular out-of-focus kernel of the given radius in pixels.
pub fn psf_disk(radius: f64) -> Result<Psf> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidParam("disk radius must be positive".into()));
    }
    let r2 = radius * radius;
    Psf::normalized(rasterize(radius, |x, y| x * x + y * y <= r2)?)
}

/// Regular `n`-gon aperture kernel with the given circumradius, rotated by
/// `rotation` radians (vertex 0 starts on the +x axis).
pub fn psf_polygon(n: u32, circumradius: f64, rotation: f64) -> Result<Psf> {
    if n < 3 {
        return Err(Error::InvalidParam("polygon needs at least 3 vertices".into()));
    }
    if !(circumradius > 0.0) || !circumradius.is_finite() {
        return Err(Error::InvalidParam("circumradius must be positive".into()));
    }
    let verts: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let (c, s) = snapped_dir(rotation + 2.0 * std::f64::consts::PI * k as f64 / n as f64);
            (circumradius * c, circumradius * s)
        })
        .collect();
    // Convex, counterclockwise: inside iff left of (or on) every edge.
    let inside = move |x: f64, y: f64| {
        verts.iter().zip(verts.iter().cycle().skip(1)).all(|(a, b)| {
            (b.0 - a.0) * (y - a.1) - (b.1 - a.1) * (x - a.0) >= 0.0
        })
    };
    Psf::normalized(rasterize(circumradius, inside)?)
}

/// Correlated bivariate Gaussian kernel sampled at pixel centers on a
/// `(2*half_size+1)^2` grid.
pub fn psf_gaussian(sigma_x: f64, sigma_y: f64, rho: f64, half_size: usize) -> Result<Psf> {
    if !(sigma_x > 0.0) || !(sigma_y > 0.0) {
        return Err(Error::InvalidParam("gaussian sigmas must be positive".into()));
    }
    if !(rho.abs() < 1.0) {
        return Err(Error::InvalidParam("gaussian correlation must satisfy |rho| < 1".into()));
    }
    if half_size == 0 {
        return Err(Error::InvalidParam("gaussian half_size must be positive".into()));
    }
    let n = 2 * half_size + 1;
    let mut samples = vec![0.0f64; n * n];
    let det = 1.0 - rho * rho;
    for iy in 0..n {
        let y = half_size as f64 - iy as f64;
        for ix in 0..n {
            let x = ix as f64 - half_size as f64;
            let q = (x * x / (sigma_x * sigma_x) - 2.0 * rho * x * y / (sigma_x * sigma_y)
                + y * y / (sigma_y * sigma_y))
                / det;
            samples[iy * n + ix] = (-0.5 * q).exp();
        }
    }
    Psf::normalized(Image::new(n, n, samples)?)
}

/// Linear-motion kernel: a unit-mass segment of the given length through the
/// origin at angle `angle`. Samples are splatted bilinearly in mirrored
/// pairs, so the kernel is exactly centrosymmetric.
pub fn psf_motion(length: f64, angle: f64) -> Result<Psf> {
    if !(length > 0.0) || !length.is_finite() {
        return Err(Error::InvalidParam("motion length must be positive".into()));
    }
    let (c, s) = snapped_dir(angle);
    let rx = (0.5 * length * c.abs()).ceil() as usize + 1;
    let ry = (0.5 * length * s.abs()).ceil() as usize + 1;
    let (w, h) = (2 * rx + 1, 2 * ry + 1);
    let mut samples = vec![0.0f64; w * h];
    let n = (length * 8.0).ceil().max(2.0) as usize;
    let node = 1.0 / n as f64;

    let mut splat_pair = |t: f64, weight: f64, mirrored: bool| {
        let fx = rx as f64 + t * c;
        let fy = ry as f64 - t * s;
        let (x0, y0) = (fx.floor() as isize, fy.floor() as isize);
        let (ax, ay) = (fx - x0 as f64, fy - y0 as f64);
        for (dy, wy) in [(0isize, 1.0 - ay), (1, ay)] {
            for (dx, wx) in [(0isize, 1.0 - ax), (1, ax)] {
                let (cx, cy) = (x0 + dx, y0 + dy);
                samples[cy as usize * w + cx as usize] += weight * wy * wx;
                if mirrored {
                    // Mirror each touched cell through the center with the
                    // same weight; this is the bilinear splat of -t and makes
                    // centrosymmetry exact.
                    let (mx, my) = (2 * rx as isize - cx, 2 * ry as isize - cy);
                    samples[my as usize * w + mx as usize] += weight * wy * wx;
                }
            }
        }
    };

    for i in 0..n / 2 {
        let t = ((i as f64 + 0.5) / n as f64 - 0.5) * length;
        splat_pair(t, node, true);
    }
    if n % 2 == 1 {
        splat_pair(0.0, node, false);
    }
    Psf::normalized(trim_zero_border(Image::new(w, h, samples)?)?)
}

/// Seeded random centrosymmetric kernel on a `(2*half_size+1)^2` grid, built
/// as `s(x) + s(-x)` of a uniform nonnegative field. The symmetry
/// `h(x, y) = h(-x, -y)` holds bit-for-bit.
pub fn psf_random_centrosymmetric(half_size: usize, seed: u64) -> Result<Psf> {
    let n = 2 * half_size + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let field: Vec<f64> = (0..n * n).map(|_| rng.random::<f64>()).collect();
    let samples: Vec<f64> =
        (0..n * n).map(|i| field[i] + field[n * n - 1 - i]).collect();
    Psf::normalized(Image::new(n, n, samples)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subpixel_disk_collapses_to_unit_impulse() {
        let p = psf_disk(0.4).unwrap();
        assert_eq!((p.width(), p.height()), (1, 1));
        assert_eq!(p.image().samples(), &[1.0]);
        assert_eq!(p.image().origin(), (0.0, 0.0));
    }

    #[test]
    fn disk_covers_expected_area() {
        let p = psf_disk(6.0).unwrap();
        assert_eq!((p.width(), p.height()), (13, 13));
        assert!((p.image().mass() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn random_kernel_is_exactly_centrosymmetric() {
        let p = psf_random_centrosymmetric(3, 42).unwrap();
        let (w, h) = (p.width(), p.height());
        for iy in 0..h {
            for ix in 0..w {
                assert_eq!(p.image().get(ix, iy), p.image().get(w - 1 - ix, h - 1 - iy));
            }
        }
    }

    #[test]
    fn motion_kernel_is_centrosymmetric_and_axis_snapped() {
        let p = psf_motion(7.3, 0.7).unwrap();
        let (w, h) = (p.width(), p.height());
        assert!((p.image().mass() - 1.0).abs() <= 1e-12);
        for iy in 0..h {
            for ix in 0..w {
                assert_eq!(p.image().get(ix, iy), p.image().get(w - 1 - ix, h - 1 - iy));
            }
        }

        let horizontal = psf_motion(7.0, 0.0).unwrap();
        assert_eq!(horizontal.height(), 1);
        assert!(horizontal.width() >= 7);

        let vertical = psf_motion(5.0, std::f64::consts::FRAC_PI_2).unwrap();
        assert_eq!(vertical.width(), 1);
    }

    #[test]
    fn gaussian_kernel_is_symmetric_unit_mass() {
        let p = psf_gaussian(1.5, 2.5, 0.4, 6).unwrap();
        assert!((p.image().mass() - 1.0).abs() <= 1e-12);
        let (w, h) = (p.width(), p.height());
        for iy in 0..h {
            for ix in 0..w {
                assert_eq!(p.image().get(ix, iy), p.image().get(w - 1 - ix, h - 1 - iy));
            }
        }
        assert!(matches!(psf_gaussian(1.0, 1.0, 1.0, 3), Err(Error::InvalidParam(_))));
    }

    #[test]
    fn four_fold_polygon_has_exact_quarter_turn_symmetry() {
        let p = psf_polygon(4, 5.3, 0.0).unwrap();
        let (w, h) = (p.width(), p.height());
        assert_eq!(w, h);
        for iy in 0..h {
            for ix in 0..w {
                // Quarter turn in the y-up frame maps cell (ix, iy) to
                // (iy, w-1-ix).
                assert_eq!(p.image().get(ix, iy), p.image().get(iy, w - 1 - ix));
            }
        }
    }

    #[test]
    fn degenerate_parameters_are_rejected() {
        assert!(psf_disk(0.0).is_err());
        assert!(psf_polygon(2, 4.0, 0.0).is_err());
        assert!(psf_motion(-1.0, 0.0).is_err());
    }
}
