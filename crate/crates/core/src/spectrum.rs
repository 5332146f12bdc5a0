//! Fourier-domain blur invariants.
//!
//! The invariant spectrum of an image is `I(u) = F(f)(u) / F(Pf)(u)`,
//! sampled on the DFT lattice of a chosen canvas and masked wherever the
//! denominator falls below a relative threshold. Both transforms are
//! phase-referenced to the image origin — the linear phase tied to the
//! origin position is divided out — so spectra are independent of where
//! content happens to sit on its canvas.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::projectors::{project, BlurClass};

/// Invariant spectrum on a `width x height` DFT lattice, in wrapped
/// (standard DFT) slot order: slot `(kx, ky)` holds the signed frequency
/// `(sx, sy)` with `sx = kx` for `kx <= width/2`, else `kx - width`, and
/// likewise for `sy`. Values are zero outside the validity mask.
#[derive(Debug, Clone)]
pub struct InvariantSpectrum {
    width: usize,
    height: usize,
    eps: f64,
    values: Vec<Complex64>,
    mask: Vec<bool>,
}

impl InvariantSpectrum {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Relative denominator threshold the mask was built with.
    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Value at wrapped slot `(kx, ky)`.
    pub fn get(&self, kx: usize, ky: usize) -> Complex64 {
        self.values[ky * self.width + kx]
    }

    /// Mask at wrapped slot `(kx, ky)`.
    pub fn is_valid(&self, kx: usize, ky: usize) -> bool {
        self.mask[ky * self.width + kx]
    }

    /// Value at a signed frequency pair (periodic in the lattice).
    pub fn at_signed(&self, sx: i64, sy: i64) -> Complex64 {
        let kx = sx.rem_euclid(self.width as i64) as usize;
        let ky = sy.rem_euclid(self.height as i64) as usize;
        self.get(kx, ky)
    }

    /// Mask at a signed frequency pair.
    pub fn is_valid_signed(&self, sx: i64, sy: i64) -> bool {
        let kx = sx.rem_euclid(self.width as i64) as usize;
        let ky = sy.rem_euclid(self.height as i64) as usize;
        self.is_valid(kx, ky)
    }

    /// Signed frequency of a wrapped slot along an axis of length `n`.
    pub fn signed_frequency(k: usize, n: usize) -> i64 {
        if k <= n / 2 {
            k as i64
        } else {
            k as i64 - n as i64
        }
    }

    /// Normalized frequency radius of a slot, in fractions of the Nyquist
    /// frequency (so the lattice corner maps to sqrt(2)).
    pub fn nyquist_radius(&self, kx: usize, ky: usize) -> f64 {
        let fx = Self::signed_frequency(kx, self.width) as f64 / self.width as f64;
        let fy = Self::signed_frequency(ky, self.height) as f64 / self.height as f64;
        (fx * fx + fy * fy).sqrt() / 0.5
    }

    /// Serializes as `BIS1`: an ASCII header `BIS1 W H eps\n`, then W*H
    /// little-endian (re, im) f64 pairs row-major in wrapped order, then a
    /// W*H byte mask plane (1 = valid).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = format!("BIS1 {} {} {}\n", self.width, self.height, self.eps).into_bytes();
        out.reserve(self.values.len() * 17);
        for v in &self.values {
            out.extend_from_slice(&v.re.to_le_bytes());
            out.extend_from_slice(&v.im.to_le_bytes());
        }
        out.extend(self.mask.iter().map(|&m| m as u8));
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Format("missing header line".into()))?;
        let header = std::str::from_utf8(&bytes[..nl])
            .map_err(|_| Error::Format("header is not ASCII".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 || fields[0] != "BIS1" {
            return Err(Error::Format("expected `BIS1 W H eps` header".into()));
        }
        let width: usize =
            fields[1].parse().map_err(|_| Error::Format("bad width field".into()))?;
        let height: usize =
            fields[2].parse().map_err(|_| Error::Format("bad height field".into()))?;
        let eps: f64 =
            fields[3].parse().map_err(|_| Error::Format("bad threshold field".into()))?;
        let n = width
            .checked_mul(height)
            .ok_or(Error::SizeOverflow(width, height))?;
        let payload = &bytes[nl + 1..];
        if payload.len() != n * 16 + n {
            return Err(Error::Format("truncated payload".into()));
        }
        let mut values = Vec::with_capacity(n);
        for i in 0..n {
            let at = |o: usize| {
                let mut b = [0u8; 8];
                b.copy_from_slice(&payload[o..o + 8]);
                f64::from_le_bytes(b)
            };
            values.push(Complex64::new(at(i * 16), at(i * 16 + 8)));
        }
        let mask = payload[n * 16..].iter().map(|&b| b != 0).collect();
        Ok(InvariantSpectrum { width, height, eps, values, mask })
    }
}

/// Writes a spectrum in the `BIS1` format.
pub fn write_spectrum(path: impl AsRef<Path>, spectrum: &InvariantSpectrum) -> Result<()> {
    fs::write(path.as_ref(), spectrum.to_bytes())
        .map_err(|source| Error::Io { path: path.as_ref().into(), source })
}

/// Reads a spectrum written by [`write_spectrum`].
pub fn read_spectrum(path: impl AsRef<Path>) -> Result<InvariantSpectrum> {
    let bytes = fs::read(path.as_ref())
        .map_err(|source| Error::Io { path: path.as_ref().into(), source })?;
    InvariantSpectrum::from_bytes(&bytes)
}

/// Phase-referenced DFT of `img` on a `w x h` frequency lattice.
///
/// The image is folded into the lattice period (exact: lattice frequencies
/// cannot distinguish coordinates a full period apart), transformed, and
/// multiplied by the conjugate origin phase, yielding
/// `F[s] = sum_x f(x) exp(-2*pi*i*(sx*X/w + sy*Y/h))` with `(X, Y)` the
/// origin-relative, y-up pixel coordinates. Content is free to overhang the
/// canvas; fractional origins are honored exactly.
pub(crate) fn phase_referenced_spectrum(img: &Image, w: usize, h: usize) -> Vec<Complex64> {
    let mut grid = vec![Complex64::ZERO; w * h];
    for iy in 0..img.height() {
        let jy = iy % h;
        for ix in 0..img.width() {
            let jx = ix % w;
            grid[jy * w + jx] += img.get(ix, iy);
        }
    }
    fft2d(&mut grid, w, h, FftDirection::Forward);

    let (ox, oy) = img.origin();
    let tau = std::f64::consts::TAU;
    let mut out = vec![Complex64::ZERO; w * h];
    for ky in 0..h {
        let sy = InvariantSpectrum::signed_frequency(ky, h);
        let py = Complex64::cis(-tau * sy as f64 * oy / h as f64);
        let jy = (h - ky % h) % h;
        for kx in 0..w {
            let sx = InvariantSpectrum::signed_frequency(kx, w);
            let px = Complex64::cis(tau * sx as f64 * ox / w as f64);
            out[ky * w + kx] = px * py * grid[jy * w + kx];
        }
    }
    out
}

/// In-place 2-D DFT, rows then columns.
pub(crate) fn fft2d(grid: &mut [Complex64], w: usize, h: usize, direction: FftDirection) {
    let mut planner = FftPlanner::new();
    let row_fft = planner.plan_fft(w, direction);
    for row in grid.chunks_exact_mut(w) {
        row_fft.process(row);
    }
    let col_fft = planner.plan_fft(h, direction);
    let mut column = vec![Complex64::ZERO; h];
    for kx in 0..w {
        for iy in 0..h {
            column[iy] = grid[iy * w + kx];
        }
        col_fft.process(&mut column);
        for iy in 0..h {
            grid[iy * w + kx] = column[iy];
        }
    }
}

/// Computes the invariant spectrum of `f` for the given class on a canvas
/// of the given size, masking frequencies where the projection's spectrum
/// drops below `eps` times its peak magnitude.
pub fn fourier_invariant(
    f: &Image,
    class: &BlurClass,
    canvas: (usize, usize),
    eps: f64,
) -> Result<InvariantSpectrum> {
    let (w, h) = canvas;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParam("threshold must lie in (0, 1)".into()));
    }
    if w < f.width() || h < f.height() {
        return Err(Error::InvalidParam("canvas must be at least the image size".into()));
    }
    let fe = f.embedded_centered(w, h)?;
    let pe = project(&fe, class)?;
    if pe.samples().iter().all(|v| *v == 0.0) {
        return Err(Error::VanishingProjection);
    }

    let numerator = phase_referenced_spectrum(&fe, w, h);
    let denominator = phase_referenced_spectrum(&pe, w, h);
    let peak = denominator.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    if peak <= 0.0 {
        return Err(Error::VanishingProjection);
    }

    let mut values = vec![Complex64::ZERO; w * h];
    let mut mask = vec![false; w * h];
    for i in 0..w * h {
        if denominator[i].norm() > eps * peak {
            values[i] = numerator[i] / denominator[i];
            mask[i] = true;
        }
    }
    Ok(InvariantSpectrum { width: w, height: h, eps, values, mask })
}

/// Root-mean-square difference of two spectra over the intersection of
/// their masks, restricted to frequencies below `lowpass_radius` times the
/// Nyquist frequency.
pub fn spectrum_distance(
    a: &InvariantSpectrum,
    b: &InvariantSpectrum,
    lowpass_radius: f64,
) -> Result<f64> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::MismatchedConfig(format!(
            "{}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    if !(lowpass_radius > 0.0) {
        return Err(Error::InvalidParam("low-pass radius must be positive".into()));
    }
    let mut acc = 0.0;
    let mut count = 0usize;
    for ky in 0..a.height {
        for kx in 0..a.width {
            if !a.is_valid(kx, ky) || !b.is_valid(kx, ky) {
                continue;
            }
            if a.nyquist_radius(kx, ky) > lowpass_radius {
                continue;
            }
            acc += (a.get(kx, ky) - b.get(kx, ky)).norm_sqr();
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    Ok((acc / count as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{convolve_full, add_white_gaussian_noise};
    use crate::psf::{psf_disk, psf_random_centrosymmetric};
    use crate::synth::{random_centrosymmetric, random_image, smooth_blobs};
    use crate::transform::centro_flip_exact;

    const EPS: f64 = 1e-3;

    #[test]
    fn dc_value_is_one_and_real_images_have_conjugate_symmetry() {
        let f = random_image(11, 9, 70);
        let spec = fourier_invariant(&f, &BlurClass::Centrosymmetric, (33, 27), EPS).unwrap();
        assert!((spec.at_signed(0, 0) - Complex64::ONE).norm() <= 1e-12);
        for sy in -13..=13i64 {
            for sx in -16..=16i64 {
                if !spec.is_valid_signed(sx, sy) || !spec.is_valid_signed(-sx, -sy) {
                    continue;
                }
                let a = spec.at_signed(sx, sy);
                let b = spec.at_signed(-sx, -sy).conj();
                assert!((a - b).norm() <= 1e-10 * a.norm().max(1.0), "({sx},{sy})");
            }
        }
    }

    #[test]
    fn class_members_have_unit_spectrum_on_the_mask() {
        // Exactly centrosymmetric input: the projector returns it bit for
        // bit, so the quotient is exactly one wherever defined.
        let f = random_centrosymmetric(5, 71);
        let spec = fourier_invariant(&f, &BlurClass::Centrosymmetric, (25, 25), EPS).unwrap();
        let mut masked = 0;
        for (v, &m) in spec.values().iter().zip(spec.mask()) {
            if m {
                masked += 1;
                assert!((v - Complex64::ONE).norm() <= 1e-13);
            }
        }
        assert!(masked > 25, "mask unexpectedly small: {masked}");
    }

    /// Intersection of two masks, lowest-radius quarter, as slot pairs.
    fn low_frequency_quartile(
        a: &InvariantSpectrum,
        b: &InvariantSpectrum,
    ) -> Vec<(usize, usize)> {
        let mut slots: Vec<(usize, usize)> = (0..a.height())
            .flat_map(|ky| (0..a.width()).map(move |kx| (kx, ky)))
            .filter(|&(kx, ky)| a.is_valid(kx, ky) && b.is_valid(kx, ky))
            .collect();
        slots.sort_by(|&(ax, ay), &(bx, by)| {
            a.nyquist_radius(ax, ay).total_cmp(&a.nyquist_radius(bx, by))
        });
        slots.truncate((slots.len() / 4).max(1));
        slots
    }

    #[test]
    fn radial_member_spectrum_is_near_one_within_rasterization_accuracy() {
        // A rasterized disk is radial up to pixel-area antialiasing, and the
        // angular-bin projector only matches it to that same accuracy, so
        // the quotient is 1 to interpolation level, not machine level. The
        // absolute mismatch is roughly flat across frequencies, and the
        // quotient amplifies it inversely to the denominator magnitude
        // (badly near the disk spectrum's zero rings), so agreement is
        // asserted at well-conditioned slots only.
        let (n, radius) = (41, 4.5);
        let f = psf_disk(radius).unwrap().into_image();
        let fe = f.embedded_centered(n, n).unwrap();
        let pe = project(&fe, &BlurClass::Radial).unwrap();
        let denominator = phase_referenced_spectrum(&pe, n, n);
        let peak = denominator.iter().fold(0.0f64, |m, v| m.max(v.norm()));

        let spec = fourier_invariant(&f, &BlurClass::Radial, (n, n), EPS).unwrap();
        let mut strong = 0;
        for (i, d) in denominator.iter().enumerate() {
            if d.norm() < 0.2 * peak {
                continue;
            }
            strong += 1;
            let v = spec.values()[i];
            assert!(
                (v - Complex64::ONE).norm() <= 0.05,
                "slot ({},{}): {v}",
                i % n,
                i / n
            );
        }
        assert!(strong >= 30, "too few well-conditioned slots: {strong}");
        assert!((spec.at_signed(0, 0) - Complex64::ONE).norm() <= 1e-12);
    }

    #[test]
    fn spectrum_is_invariant_under_in_class_blur() {
        let f = smooth_blobs(16, 16, 3, 72);
        let h = psf_random_centrosymmetric(4, 73).unwrap();
        let g = convolve_full(&f, h.image()).unwrap();
        let sf = fourier_invariant(&f, &BlurClass::Centrosymmetric, (40, 40), EPS).unwrap();
        let sg = fourier_invariant(&g, &BlurClass::Centrosymmetric, (40, 40), EPS).unwrap();
        let mut compared = 0;
        for i in 0..sf.values().len() {
            if sf.mask()[i] && sg.mask()[i] {
                compared += 1;
                let (a, b) = (sf.values()[i], sg.values()[i]);
                assert!((a - b).norm() <= 1e-6 * a.norm().max(1.0), "slot {i}: {a} vs {b}");
            }
        }
        assert!(compared > 100, "intersection mask too small: {compared}");
        assert!(spectrum_distance(&sf, &sg, 0.25).unwrap() <= 1e-6);
    }

    #[test]
    fn low_frequencies_survive_noise() {
        let f = smooth_blobs(64, 64, 5, 74);
        let h = psf_random_centrosymmetric(4, 75).unwrap();
        let g = convolve_full(&f, h.image()).unwrap();
        let noisy = add_white_gaussian_noise(&g, 10.0, 76).unwrap();
        // At SNR 10 the default threshold sits below the spectral noise
        // floor and the mask stops rejecting noise-dominated slots; a
        // noise-aware threshold restores the intended selection.
        let eps = 0.02;
        let sf = fourier_invariant(&f, &BlurClass::Centrosymmetric, (96, 96), eps).unwrap();
        let sg = fourier_invariant(&noisy, &BlurClass::Centrosymmetric, (96, 96), eps).unwrap();
        let slots = low_frequency_quartile(&sf, &sg);
        assert!(slots.len() >= 10, "low-frequency mask too small: {}", slots.len());
        let mut err = 0.0;
        for &(kx, ky) in &slots {
            err += (sf.get(kx, ky) - sg.get(kx, ky)).norm() / sf.get(kx, ky).norm().max(1e-9);
        }
        let mre = err / slots.len() as f64;
        assert!(mre <= 0.05, "mean relative error {mre} over {} slots", slots.len());
    }

    #[test]
    fn antisymmetric_images_have_no_spectrum() {
        let r = random_image(9, 9, 77);
        let flipped = centro_flip_exact(&r);
        let mut f = r.clone();
        for (v, w) in f.samples_mut().iter_mut().zip(flipped.samples()) {
            *v -= w;
        }
        assert!(matches!(
            fourier_invariant(&f, &BlurClass::Centrosymmetric, (15, 15), EPS),
            Err(Error::VanishingProjection)
        ));
    }

    #[test]
    fn different_equivalence_classes_are_separated() {
        // An image and a shifted copy of its point reflection share the
        // centrosymmetric projection class only if they are blur-equivalent;
        // a generic image is not, so the distance must be visibly nonzero.
        let f = smooth_blobs(16, 16, 3, 78);
        let g = centro_flip_exact(&smooth_blobs(16, 16, 4, 79));
        let sf = fourier_invariant(&f, &BlurClass::Centrosymmetric, (32, 32), EPS).unwrap();
        let sg = fourier_invariant(&g, &BlurClass::Centrosymmetric, (32, 32), EPS).unwrap();
        assert!(spectrum_distance(&sf, &sg, 0.25).unwrap() > 1e-3);
        assert_eq!(spectrum_distance(&sf, &sf, 0.25).unwrap(), 0.0);
    }

    #[test]
    fn bis_round_trip_is_bit_identical() {
        let f = random_image(10, 8, 80);
        let spec = fourier_invariant(&f, &BlurClass::Centrosymmetric, (20, 16), EPS).unwrap();
        let back = InvariantSpectrum::from_bytes(&spec.to_bytes()).unwrap();
        assert_eq!(back.width(), spec.width());
        assert_eq!(back.height(), spec.height());
        assert_eq!(back.eps(), spec.eps());
        assert_eq!(back.values(), spec.values());
        assert_eq!(back.mask(), spec.mask());

        let dir = std::env::temp_dir().join("blurinv-spectrum-tests");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("round_trip.bis");
        write_spectrum(&path, &spec).unwrap();
        let loaded = read_spectrum(&path).unwrap();
        assert_eq!(loaded.values(), spec.values());
    }

    #[test]
    fn degenerate_parameters_are_rejected() {
        let f = random_image(8, 8, 81);
        assert!(matches!(
            fourier_invariant(&f, &BlurClass::Centrosymmetric, (16, 16), 0.0),
            Err(Error::InvalidParam(_))
        ));
        assert!(matches!(
            fourier_invariant(&f, &BlurClass::Centrosymmetric, (4, 16), 1e-3),
            Err(Error::InvalidParam(_))
        ));
        let a = fourier_invariant(&f, &BlurClass::Centrosymmetric, (16, 16), 1e-3).unwrap();
        let b = fourier_invariant(&f, &BlurClass::Centrosymmetric, (18, 18), 1e-3).unwrap();
        assert!(matches!(spectrum_distance(&a, &b, 0.25), Err(Error::MismatchedConfig(_))));
    }
}
