//! Discrete image representation with exact coordinate bookkeeping.
//!
//! An [`Image`] is a rectangular grid of real samples together with an
//! explicit continuous origin. The grid is interpreted as a weighted set of
//! point masses at pixel coordinates, which keeps convolution, moments and
//! Fourier phases mutually consistent to floating-point precision. The
//! continuous x axis points right, the y axis points up: row 0 carries the
//! largest y coordinate.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Real-valued 2-D sample grid with an explicit coordinate origin.
///
/// `origin = (ox, oy)` gives the grid position of the continuous point 0, so
/// the pixel at column `ix`, row `iy` sits at continuous coordinates
/// `(ix - ox, oy - iy)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    samples: Vec<f64>,
    origin: (f64, f64),
}

impl Image {
    /// Creates an image from row-major samples with the default centered
    /// origin `((w-1)/2, (h-1)/2)`.
    pub fn new(width: usize, height: usize, samples: Vec<f64>) -> Result<Self> {
        let origin = ((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0);
        Self::with_origin(width, height, samples, origin)
    }

    /// Creates an image with an explicit origin.
    pub fn with_origin(
        width: usize,
        height: usize,
        samples: Vec<f64>,
        origin: (f64, f64),
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParam("image dimensions must be positive".into()));
        }
        if samples.len() != width * height {
            return Err(Error::InvalidParam(format!(
                "sample count {} does not match {}x{}",
                samples.len(),
                width,
                height
            )));
        }
        if samples.iter().any(|v| !v.is_finite()) || !origin.0.is_finite() || !origin.1.is_finite()
        {
            return Err(Error::InvalidParam("samples and origin must be finite".into()));
        }
        Ok(Self { width, height, samples, origin })
    }

    /// All-zero image with the default centered origin.
    pub fn zeros(width: usize, height: usize) -> Self {
        Self::new(width, height, vec![0.0; width * height]).expect("positive dimensions")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn origin(&self) -> (f64, f64) {
        self.origin
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.samples
    }

    #[inline]
    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.samples[iy * self.width + ix]
    }

    #[inline]
    pub fn set(&mut self, ix: usize, iy: usize, value: f64) {
        self.samples[iy * self.width + ix] = value;
    }

    /// Continuous x coordinate of column `ix`.
    #[inline]
    pub fn x_of(&self, ix: usize) -> f64 {
        ix as f64 - self.origin.0
    }

    /// Continuous y coordinate of row `iy` (y axis points up).
    #[inline]
    pub fn y_of(&self, iy: usize) -> f64 {
        self.origin.1 - iy as f64
    }

    /// Sum of all samples (the discrete integral).
    pub fn mass(&self) -> f64 {
        crate::moments::kahan_sum(self.samples.iter().copied())
    }

    /// Population variance of the samples.
    pub fn variance(&self) -> f64 {
        let n = self.samples.len() as f64;
        let mean = self.mass() / n;
        crate::moments::kahan_sum(self.samples.iter().map(|v| (v - mean) * (v - mean))) / n
    }

    /// Replaces the origin without touching the samples. This re-interprets
    /// the image as a translated function; moments and spectra change
    /// accordingly.
    pub fn with_moved_origin(mut self, origin: (f64, f64)) -> Self {
        self.origin = origin;
        self
    }

    /// Bilinear sample at continuous grid position `(px, py)` (column/row
    /// units, not continuous coordinates). Outside the canvas the image is
    /// zero.
    pub fn sample_bilinear(&self, px: f64, py: f64) -> f64 {
        let x0 = px.floor();
        let y0 = py.floor();
        let fx = px - x0;
        let fy = py - y0;
        let mut acc = 0.0;
        for (dy, wy) in [(0isize, 1.0 - fy), (1, fy)] {
            if wy == 0.0 {
                continue;
            }
            let iy = y0 as isize + dy;
            if iy < 0 || iy >= self.height as isize {
                continue;
            }
            for (dx, wx) in [(0isize, 1.0 - fx), (1, fx)] {
                if wx == 0.0 {
                    continue;
                }
                let ix = x0 as isize + dx;
                if ix < 0 || ix >= self.width as isize {
                    continue;
                }
                acc += wy * wx * self.get(ix as usize, iy as usize);
            }
        }
        acc
    }

    /// Copies the image onto a `width x height` zero canvas at integer grid
    /// offset `(dx, dy)`; the origin moves with the content so the continuous
    /// function is unchanged.
    pub fn embedded(&self, width: usize, height: usize, dx: usize, dy: usize) -> Result<Self> {
        if dx + self.width > width || dy + self.height > height {
            return Err(Error::InvalidParam("embedding exceeds target canvas".into()));
        }
        let mut out = vec![0.0; width * height];
        for iy in 0..self.height {
            let src = &self.samples[iy * self.width..(iy + 1) * self.width];
            let dst = &mut out[(iy + dy) * width + dx..(iy + dy) * width + dx + self.width];
            dst.copy_from_slice(src);
        }
        Image::with_origin(
            width,
            height,
            out,
            (self.origin.0 + dx as f64, self.origin.1 + dy as f64),
        )
    }

    /// Embeds into a canvas of the given size with the content roughly
    /// centered.
    pub fn embedded_centered(&self, width: usize, height: usize) -> Result<Self> {
        let dx = (width - self.width.min(width)) / 2;
        let dy = (height - self.height.min(height)) / 2;
        self.embedded(width, height, dx, dy)
    }

    /// Rectangular crop starting at grid cell `(x0, y0)`; the origin moves
    /// with the content, so surviving pixels keep their continuous
    /// coordinates.
    pub fn cropped(&self, x0: usize, y0: usize, width: usize, height: usize) -> Result<Self> {
        if x0 + width > self.width || y0 + height > self.height {
            return Err(Error::InvalidParam("crop exceeds canvas".into()));
        }
        let mut out = Vec::with_capacity(width * height);
        for iy in y0..y0 + height {
            out.extend_from_slice(&self.samples[iy * self.width + x0..iy * self.width + x0 + width]);
        }
        Image::with_origin(width, height, out, (self.origin.0 - x0 as f64, self.origin.1 - y0 as f64))
    }

    /// Content moved by an integer number of grid cells; canvas and origin
    /// stay put, so this represents the translated function
    /// `g(ix, iy) = f(ix - dx, iy - dy)` with zero fill.
    pub fn shifted(&self, dx: isize, dy: isize) -> Self {
        let mut out = Image {
            width: self.width,
            height: self.height,
            samples: vec![0.0; self.samples.len()],
            origin: self.origin,
        };
        for iy in 0..self.height as isize {
            let sy = iy - dy;
            if sy < 0 || sy >= self.height as isize {
                continue;
            }
            for ix in 0..self.width as isize {
                let sx = ix - dx;
                if sx < 0 || sx >= self.width as isize {
                    continue;
                }
                out.samples[iy as usize * self.width + ix as usize] =
                    self.get(sx as usize, sy as usize);
            }
        }
        out
    }
}

/// The discrete Dirac impulse: a 1x1 unit image with origin (0, 0). It is the
/// identity element of [`convolve_full`].
pub fn delta() -> Image {
    Image::with_origin(1, 1, vec![1.0], (0.0, 0.0)).expect("static construction")
}

/// Zero-padded full discrete convolution.
///
/// The output canvas is `(wf + wh - 1) x (hf + hh - 1)` and the output origin
/// is the componentwise sum of the input origins, which makes
/// continuous-coordinate additivity (and hence the moment convolution
/// theorem) exact in floating point.
pub fn convolve_full(f: &Image, h: &Image) -> Result<Image> {
    let ow = f.width + h.width - 1;
    let oh = f.height + h.height - 1;
    if ow.checked_mul(oh).is_none_or(|n| n > 1 << 30) {
        return Err(Error::SizeOverflow(ow, oh));
    }
    let mut out = vec![0.0; ow * oh];
    // Scatter the (usually smaller) second operand over the first; swap so
    // the inner loops run over the longer rows.
    let (a, b) = if f.samples.len() >= h.samples.len() { (f, h) } else { (h, f) };
    out.par_chunks_mut(ow).enumerate().for_each(|(oy, row)| {
        for by in 0..b.height {
            if oy < by || oy - by >= a.height {
                continue;
            }
            let ay = oy - by;
            let arow = &a.samples[ay * a.width..(ay + 1) * a.width];
            let brow = &b.samples[by * b.width..(by + 1) * b.width];
            for (bx, &bv) in brow.iter().enumerate() {
                if bv == 0.0 {
                    continue;
                }
                for (ax, &av) in arow.iter().enumerate() {
                    row[ax + bx] += av * bv;
                }
            }
        }
    });
    Image::with_origin(ow, oh, out, (f.origin.0 + h.origin.0, f.origin.1 + h.origin.1))
}

/// Adds i.i.d. zero-mean Gaussian noise with variance `var(f) / 10^(snr_db/10)`.
///
/// Deterministic for a fixed seed. `snr_db = f64::INFINITY` returns the input
/// unchanged; a constant input is rejected because its SNR is undefined.
pub fn add_white_gaussian_noise(f: &Image, snr_db: f64, seed: u64) -> Result<Image> {
    if snr_db == f64::INFINITY {
        return Ok(f.clone());
    }
    let var = f.variance();
    if var <= 0.0 {
        return Err(Error::ConstantImage);
    }
    let sigma = (var / 10f64.powf(snr_db / 10.0)).sqrt();
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidParam(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = f.clone();
    for v in out.samples.iter_mut() {
        *v += normal.sample(&mut rng);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::random_image;

    #[test]
    fn delta_is_unit_impulse() {
        let d = delta();
        assert_eq!((d.width(), d.height()), (1, 1));
        assert_eq!(d.samples(), &[1.0]);
        assert_eq!(d.origin(), (0.0, 0.0));
    }

    #[test]
    fn convolution_with_delta_is_identity() {
        let f = random_image(5, 4, 1);
        let g = convolve_full(&f, &delta()).unwrap();
        assert_eq!(g.samples(), f.samples());
        assert_eq!(g.origin(), f.origin());
    }

    #[test]
    fn convolution_shifts_origin_additively() {
        let f = Image::with_origin(1, 1, vec![1.0], (0.0, 0.0)).unwrap();
        let h = Image::with_origin(2, 1, vec![0.5, 0.5], (0.5, 0.0)).unwrap();
        let g = convolve_full(&f, &h).unwrap();
        assert_eq!(g.samples(), &[0.5, 0.5]);
        assert_eq!(g.origin(), (0.5, 0.0));
    }

    #[test]
    fn convolution_commutes_and_associates() {
        let f = random_image(8, 8, 2);
        let g = random_image(8, 8, 3);
        let k = random_image(8, 8, 4);
        let fg = convolve_full(&f, &g).unwrap();
        let gf = convolve_full(&g, &f).unwrap();
        let scale = fg.samples().iter().map(|v| v.abs()).fold(0.0, f64::max);
        for (a, b) in fg.samples().iter().zip(gf.samples()) {
            assert!((a - b).abs() <= 1e-12 * scale);
        }
        let fg_k = convolve_full(&fg, &k).unwrap();
        let f_gk = convolve_full(&f, &convolve_full(&g, &k).unwrap()).unwrap();
        let scale = fg_k.samples().iter().map(|v| v.abs()).fold(0.0, f64::max);
        for (a, b) in fg_k.samples().iter().zip(f_gk.samples()) {
            assert!((a - b).abs() <= 1e-12 * scale);
        }
        assert_eq!(fg_k.origin(), f_gk.origin());
    }

    #[test]
    fn convolution_preserves_mass_product() {
        let f = random_image(7, 5, 5);
        let h = random_image(4, 6, 6);
        let g = convolve_full(&f, &h).unwrap();
        let expect = f.mass() * h.mass();
        assert!((g.mass() - expect).abs() <= 1e-12 * expect.abs());
    }

    #[test]
    fn noise_is_deterministic_and_calibrated() {
        let f = random_image(256, 256, 7);
        let a = add_white_gaussian_noise(&f, 50.0, 99).unwrap();
        let b = add_white_gaussian_noise(&f, 50.0, 99).unwrap();
        assert_eq!(a.samples(), b.samples());

        let noise: Vec<f64> = a.samples().iter().zip(f.samples()).map(|(x, y)| x - y).collect();
        let n = noise.len() as f64;
        let mean = noise.iter().sum::<f64>() / n;
        let var = noise.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let snr = 10.0 * (f.variance() / var).log10();
        assert!((snr - 50.0).abs() < 0.5, "empirical snr {snr}");
    }

    #[test]
    fn infinite_snr_is_identity_and_constant_image_rejected() {
        let f = random_image(8, 8, 8);
        let g = add_white_gaussian_noise(&f, f64::INFINITY, 0).unwrap();
        assert_eq!(g.samples(), f.samples());

        let c = Image::new(4, 4, vec![3.0; 16]).unwrap();
        assert!(matches!(add_white_gaussian_noise(&c, 20.0, 0), Err(Error::ConstantImage)));
    }

    #[test]
    fn shifted_moves_content_not_origin() {
        let f = random_image(6, 6, 9);
        let g = f.shifted(2, -1);
        assert_eq!(g.origin(), f.origin());
        assert_eq!(g.get(3, 0), f.get(1, 1));
        assert_eq!(g.get(0, 0), 0.0);
    }

    #[test]
    fn embedding_preserves_continuous_coordinates() {
        let f = random_image(5, 5, 10);
        let e = f.embedded(11, 9, 3, 2).unwrap();
        assert_eq!(e.get(3, 2), f.get(0, 0));
        // The same pixel keeps its continuous position.
        assert_eq!(e.x_of(3), f.x_of(0));
        assert_eq!(e.y_of(2), f.y_of(0));
    }
}
