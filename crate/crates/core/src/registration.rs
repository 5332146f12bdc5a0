//! Blur-tolerant image alignment.
//!
//! Two views of a scene degraded by *different* kernels from the same blur
//! class share one invariant quotient up to the geometry between them: a
//! translation contributes a pure phase ramp and, for isotropic and n-fold
//! classes, a rotation turns the frequency plane. Whitened cross-correlation
//! of the quotients therefore recovers shift and rotation while the blur
//! discrepancy cancels — including any displacement of the kernel centroids,
//! which divides out of the quotient entirely.
//!
//! One wrinkle makes this more than classical phase correlation: the
//! projector in the quotient's denominator symmetrizes about the phase
//! reference, so a large translation does not pass through the quotient as
//! a clean ramp — it degenerates into sign flips wherever the symmetrized
//! spectrum changes sign. Alignment therefore proceeds in two parts: each
//! view is first re-referenced to the integer grid point nearest its own
//! content centroid (an exact bookkeeping move; kernels of the symmetric
//! classes are centroid-free, and a kernel centroid is indistinguishable
//! from translation anyway), the whitened correlation then measures only
//! the subinteger residue, and the integer centroid difference is added
//! back to the answer.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::moments::{geometric_moments, MultiIndex};
use crate::projectors::BlurClass;
use crate::spectrum::{fft2d, fourier_invariant, InvariantSpectrum};
use crate::transform::{corner_reach, resample_rotated};

/// Width of the raised-cosine border taper applied before any spectrum is
/// taken, in pixels. The taper suppresses the spectral ringing of the canvas
/// cutoff, which would otherwise leak across the whitened correlation.
const TAPER_WIDTH: f64 = 8.0;

/// Peak-to-runner-up ratio below which a correlation outcome is flagged
/// unreliable.
const RELIABLE_RATIO: f64 = 1.05;

/// Chebyshev half-width of the exclusion zone around the main peak when
/// hunting for the runner-up, in correlation cells.
const PEAK_EXCLUSION: i64 = 3;

/// Angular resolution of the rotation search (0.5 degrees per sample).
const ANGULAR_SAMPLES: usize = 720;

/// Lattice refinement factor for the rotation search. Ring profiles read
/// off the coarse lattice carry a canvas-locked interpolation wobble strong
/// enough to pin the angular correlation at zero; evaluating the quotient on
/// an `OVERSAMPLE`-times-finer lattice (exact trigonometric interpolation of
/// the same data) suppresses it quadratically.
const OVERSAMPLE: usize = 4;

/// Innermost ring of the rotation search, in coarse slots. Closer to the
/// center a ring crosses too few lattice cells to resolve angles.
const RING_MIN_RADIUS: i64 = 4;

/// Minimum peak correlation coefficient for a ring to vote on the rotation;
/// rings near a null of the projection's spectrum decohere and would only
/// dilute the aggregate.
const RING_GATE: f64 = 0.7;

/// Outcome of an alignment query.
///
/// The recovered model is "rotate the first image by `theta` about its
/// origin, then displace by `(dx, dy)`"; for plain shift registration
/// `theta` is absent. Displacements live in the same y-up frame as image
/// origins: `dx` points right, `dy` points up.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RegistrationResult {
    /// Rightward displacement of the second image relative to the first.
    pub dx: f64,
    /// Upward displacement of the second image relative to the first.
    pub dy: f64,
    /// Recovered rotation in radians, present only for rotation searches.
    pub theta: Option<f64>,
    /// Ratio between the strongest correlation peak and the runner-up
    /// outside its exclusion zone; at least one by construction.
    pub confidence: f64,
    /// False when any correlation stage fell below the confidence threshold.
    pub reliable: bool,
}

/// Estimates the translation between two views blurred by kernels from
/// `class`.
///
/// Both inputs are tapered, embedded centered into a common power-of-two
/// canvas, and reduced to invariant quotients with mask threshold `eps`.
/// The whitened cross-power is evaluated on the intersection of the two
/// masks restricted to the lowpass disk `nyquist_radius <=
/// lowpass_radius`, inverted, and the correlation peak is wrapped to signed
/// shifts. With `refine` a three-point parabola per axis interpolates the
/// peak to subpixel precision.
pub fn register_shift(
    f: &Image,
    g: &Image,
    class: &BlurClass,
    eps: f64,
    lowpass_radius: f64,
    refine: bool,
) -> Result<RegistrationResult> {
    let pair = spectra_on_common_canvas(f, g, class, eps, lowpass_radius)?;
    let mut out = shift_from_spectra(&pair.first, &pair.second, lowpass_radius, refine)?;
    out.dx += pair.second_reference.0 - pair.first_reference.0;
    out.dy += pair.second_reference.1 - pair.first_reference.1;
    Ok(out)
}

/// Estimates rotation and translation between two views blurred by kernels
/// from a rotation-compatible class (`Radial` or `NFold`).
///
/// The rotation is read off first by circular correlation of the two
/// quotient magnitudes resampled along frequency-plane rings; the magnitude
/// spectrum of a real image is centrally symmetric, so the angle is only
/// determined modulo a half turn and the search window is `(-pi/2, pi/2]`,
/// tightened to `(-pi/N, pi/N]` for `NFold(N)` — the period beyond which an
/// n-fold class cannot distinguish rotations anyway. The second image is
/// then derotated and handed to [`register_shift`]. A flat angular
/// correlation (for instance on radially symmetric content) reports
/// `theta = 0` and clears the `reliable` flag rather than failing.
pub fn register_shift_rotation(
    f: &Image,
    g: &Image,
    class: &BlurClass,
    eps: f64,
    lowpass_radius: f64,
    refine: bool,
) -> Result<RegistrationResult> {
    let half_range = match class {
        BlurClass::Radial => FRAC_PI_2,
        BlurClass::NFold(n) => (PI / *n as f64).min(FRAC_PI_2),
        _ => {
            return Err(Error::InvalidParam(format!(
                "rotation search needs an isotropic or n-fold class, not {class}"
            )))
        }
    };
    if !(lowpass_radius > 0.0 && lowpass_radius.is_finite()) {
        return Err(Error::InvalidParam("lowpass radius must be positive".into()));
    }
    let (tf, _) = referenced_to_centroid(tapered(f))?;
    let (tg, _) = referenced_to_centroid(tapered(g))?;
    let side = common_square_side(f, g);
    let fine = OVERSAMPLE * side;
    let sf = fourier_invariant(&tf, class, (fine, fine), eps)?;
    let sg = fourier_invariant(&tg, class, (fine, fine), eps)?;
    let (theta, rot_confidence) = rotation_angle(&sf, &sg, side, lowpass_radius, half_range);
    let (theta, rot_reliable) =
        if rot_confidence >= RELIABLE_RATIO { (theta, true) } else { (0.0, false) };

    let derotated = if theta != 0.0 {
        // Rotate back about the origin onto a canvas sized for the turned
        // content; what remains between the two views is pure translation.
        let half = corner_reach(g).ceil() as usize + 1;
        let side = 2 * half + 1;
        resample_rotated(g, -theta, side, side, (half as f64, half as f64))
    } else {
        g.clone()
    };
    let mut out = register_shift(f, &derotated, class, eps, lowpass_radius, refine)?;
    // The measured displacement lives in the derotated frame; turn it
    // forward so the reported model composes as rotate-then-translate.
    let (c, s) = (theta.cos(), theta.sin());
    let (mx, my) = (out.dx, out.dy);
    out.dx = c * mx - s * my;
    out.dy = s * mx + c * my;
    out.theta = Some(theta);
    out.confidence = out.confidence.min(rot_confidence);
    out.reliable = out.reliable && rot_reliable;
    Ok(out)
}

/// Centroid-referenced quotients of the two views on a shared canvas,
/// together with the y-up positions of the references in the original
/// frames.
struct SpectrumPair {
    first: InvariantSpectrum,
    second: InvariantSpectrum,
    first_reference: (f64, f64),
    second_reference: (f64, f64),
}

/// Tapers both inputs, re-references each to its rounded content centroid,
/// and reduces them to invariant quotients on a shared square power-of-two
/// canvas.
fn spectra_on_common_canvas(
    f: &Image,
    g: &Image,
    class: &BlurClass,
    eps: f64,
    lowpass_radius: f64,
) -> Result<SpectrumPair> {
    if !(lowpass_radius > 0.0 && lowpass_radius.is_finite()) {
        return Err(Error::InvalidParam("lowpass radius must be positive".into()));
    }
    let (tf, cf) = referenced_to_centroid(tapered(f))?;
    let (tg, cg) = referenced_to_centroid(tapered(g))?;
    let side = common_square_side(f, g);
    Ok(SpectrumPair {
        first: fourier_invariant(&tf, class, (side, side), eps)?,
        second: fourier_invariant(&tg, class, (side, side), eps)?,
        first_reference: cf,
        second_reference: cg,
    })
}

/// Side of the shared square power-of-two canvas. A square keeps
/// frequency-plane rotations isotropic in slot coordinates, so the same
/// embedding serves both entry points.
fn common_square_side(f: &Image, g: &Image) -> usize {
    f.width().max(f.height()).max(g.width()).max(g.height()).next_power_of_two()
}

/// Moves the phase reference — and with it the projector's symmetry center —
/// to the integer grid point nearest the content centroid, and reports the
/// y-up displacement of the new reference from the old one.
///
/// Integer moves keep every exact-projector origin alignment intact, and an
/// integer translation of the content moves the rounded centroid by exactly
/// the same integers, which is what makes integer registration exact.
fn referenced_to_centroid(img: Image) -> Result<(Image, (f64, f64))> {
    let m = geometric_moments(&img, 1, 1.0)?;
    let mass = m.get(MultiIndex::new(0, 0)).re;
    if mass == 0.0 {
        return Ok((img, (0.0, 0.0)));
    }
    let (ox, oy) = img.origin();
    let cx = (m.get(MultiIndex::new(1, 0)).re / mass).round();
    let cy = (m.get(MultiIndex::new(0, 1)).re / mass).round();
    // Signed content with near-zero mass can put the moment ratio anywhere,
    // and a reference outside the canvas would gut the projector; such
    // content keeps its original reference.
    let inside = cx >= -ox
        && cx <= img.width() as f64 - 1.0 - ox
        && cy >= oy - (img.height() as f64 - 1.0)
        && cy <= oy;
    if !inside {
        return Ok((img, (0.0, 0.0)));
    }
    Ok((img.with_moved_origin((ox + cx, oy - cy)), (cx, cy)))
}

/// Multiplies the image by a separable raised-cosine window falling from one
/// to zero over [`TAPER_WIDTH`] pixels at each canvas border.
fn tapered(f: &Image) -> Image {
    let wx = axis_taper(f.width());
    let wy = axis_taper(f.height());
    let mut out = f.clone();
    for iy in 0..f.height() {
        for ix in 0..f.width() {
            out.set(ix, iy, f.get(ix, iy) * wx[ix] * wy[iy]);
        }
    }
    out
}

fn axis_taper(n: usize) -> Vec<f64> {
    let width = TAPER_WIDTH.min((n as f64 - 1.0) / 2.0);
    (0..n)
        .map(|i| {
            let d = (i as f64).min(n as f64 - 1.0 - i as f64);
            if width <= 0.0 || d >= width {
                1.0
            } else {
                0.5 * (1.0 - (PI * d / width).cos())
            }
        })
        .collect()
}

/// Correlates two quotients and reads the translation off the peak.
fn shift_from_spectra(
    sf: &InvariantSpectrum,
    sg: &InvariantSpectrum,
    lowpass_radius: f64,
    refine: bool,
) -> Result<RegistrationResult> {
    let (w, h) = (sf.width(), sf.height());
    let mut slots = Vec::new();
    let mut mean_f = Complex64::ZERO;
    let mut mean_g = Complex64::ZERO;
    for ky in 0..h {
        for kx in 0..w {
            let i = ky * w + kx;
            if sf.mask()[i] && sg.mask()[i] && sf.nyquist_radius(kx, ky) <= lowpass_radius {
                slots.push(i);
                mean_f += sf.values()[i];
                mean_g += sg.values()[i];
            }
        }
    }
    if slots.is_empty() {
        return Err(Error::EmptyMask);
    }
    mean_f /= slots.len() as f64;
    mean_g /= slots.len() as f64;

    // Each quotient's denominator is the symmetric part of its own
    // numerator, which biases the whole spectrum toward one; two unrelated
    // images would correlate confidently through that shared bias, so each
    // spectrum is centered on its mean before whitening. Identical content
    // still cancels exactly, since both sides lose the same constant.
    let mut grid = vec![Complex64::ZERO; w * h];
    let mut kept = 0usize;
    for &i in &slots {
        let cross = (sf.values()[i] - mean_f) * (sg.values()[i] - mean_g).conj();
        let modulus = cross.norm();
        if modulus > 0.0 {
            grid[i] = cross / modulus;
            kept += 1;
        }
    }
    if kept == 0 {
        // Both quotients are constant over the usable slots — for instance
        // when a degenerate projector divides an image by itself — so there
        // is no alignment information to correlate.
        return Ok(RegistrationResult {
            dx: 0.0,
            dy: 0.0,
            theta: None,
            confidence: 1.0,
            reliable: false,
        });
    }
    fft2d(&mut grid, w, h, FftDirection::Inverse);
    let corr: Vec<f64> = grid.iter().map(|z| z.re).collect();

    let peak = corr
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("correlation grid is nonempty");
    let (px, py) = (peak % w, peak / w);
    let confidence = peak_confidence(&corr, w, h, px, py);

    // The displaced view contributes exp(+i u . d) to the cross power, so
    // the correlation spikes where the inverse-transform index cancels the
    // displacement: the peak sits at minus the shift, wrapped.
    let mut jx = px as f64;
    let mut jy = py as f64;
    if refine {
        jx += parabolic_offset(
            corr[py * w + (px + w - 1) % w],
            corr[py * w + px],
            corr[py * w + (px + 1) % w],
        );
        jy += parabolic_offset(
            corr[((py + h - 1) % h) * w + px],
            corr[py * w + px],
            corr[((py + 1) % h) * w + px],
        );
    }
    let wrap = |v: f64, n: usize| if v > n as f64 / 2.0 { v - n as f64 } else { v };
    Ok(RegistrationResult {
        dx: -wrap(jx, w),
        dy: -wrap(jy, h),
        theta: None,
        confidence,
        reliable: confidence >= RELIABLE_RATIO,
    })
}

/// Ratio between the peak and the best value outside its exclusion zone.
fn peak_confidence(corr: &[f64], w: usize, h: usize, px: usize, py: usize) -> f64 {
    let wrapped_near = |a: usize, b: usize, n: usize| {
        let d = (a as i64 - b as i64).rem_euclid(n as i64);
        d.min(n as i64 - d) <= PEAK_EXCLUSION
    };
    let mut second = f64::NEG_INFINITY;
    for iy in 0..h {
        let near_y = wrapped_near(iy, py, h);
        for ix in 0..w {
            if near_y && wrapped_near(ix, px, w) {
                continue;
            }
            second = second.max(corr[iy * w + ix]);
        }
    }
    let peak = corr[py * w + px];
    if second > 0.0 && peak > 0.0 {
        peak / second
    } else if peak > 0.0 {
        f64::INFINITY
    } else {
        1.0
    }
}

/// Vertex offset of the parabola through three equally spaced samples,
/// clamped to the sampling cell; zero when the triple is not a local peak.
fn parabolic_offset(before: f64, center: f64, after: f64) -> f64 {
    let curvature = before - 2.0 * center + after;
    if curvature >= 0.0 {
        return 0.0;
    }
    let offset = 0.5 * (before - after) / curvature;
    if offset.is_finite() && offset.abs() <= 1.0 {
        offset
    } else {
        0.0
    }
}

/// Reads the relative rotation off ring-wise circular correlation of the
/// two quotients' log magnitudes; returns the parabola-refined angle and
/// its peak-to-runner-up confidence.
///
/// Rings march at unit coarse-slot spacing from [`RING_MIN_RADIUS`] to the
/// lowpass edge, each resampled at [`ANGULAR_SAMPLES`] angles on the fine
/// lattice. A ring's profile is stripped of its fourfold canvas harmonics
/// and normalized; rings that fail to produce a correlation coefficient of
/// at least [`RING_GATE`] anywhere in the window abstain, and the rest vote
/// by summing their correlation functions over lags within `±half_range`.
fn rotation_angle(
    sf: &InvariantSpectrum,
    sg: &InvariantSpectrum,
    coarse_side: usize,
    lowpass_radius: f64,
    half_range: f64,
) -> (f64, f64) {
    let n = ANGULAR_SAMPLES;
    let max_lag = (((half_range / TAU) * n as f64).floor() as i64).min(n as i64 / 2);
    let lag_count = (2 * max_lag + 1) as usize;
    let r_max = (0.5 * lowpass_radius * coarse_side as f64).floor() as i64;

    let mut total = vec![0.0f64; lag_count];
    let mut used = 0usize;
    for ri in RING_MIN_RADIUS..=r_max {
        let radius = (ri * OVERSAMPLE as i64) as f64;
        let (Some(ra), Some(rb)) = (sample_ring(sf, radius), sample_ring(sg, radius)) else {
            continue;
        };
        let (Some(na), Some(nb)) = (normalize(drop_fourfold(ra)), normalize(drop_fourfold(rb)))
        else {
            continue;
        };
        let mut corr = vec![0.0f64; lag_count];
        for (idx, c) in corr.iter_mut().enumerate() {
            let t = idx as i64 - max_lag;
            let mut acc = 0.0;
            for (j, a) in na.iter().enumerate() {
                acc += a * nb[(j as i64 + t).rem_euclid(n as i64) as usize];
            }
            *c = acc / n as f64;
        }
        if corr.iter().cloned().fold(f64::NEG_INFINITY, f64::max) >= RING_GATE {
            for (sum, c) in total.iter_mut().zip(&corr) {
                *sum += c;
            }
            used += 1;
        }
    }
    if used == 0 {
        return (0.0, 1.0);
    }

    let best = (0..lag_count).max_by(|a, b| total[*a].total_cmp(&total[*b])).unwrap();
    let peak = total[best];
    if !(peak > 0.0) {
        return (0.0, 1.0);
    }
    // Content features span tens of degrees, so the peak's own lobe is far
    // wider than any fixed exclusion zone; the runner-up is instead the best
    // value beyond the lobe's half-height edges, where a genuinely
    // competing angle would live.
    let mut left = best;
    while left > 0 && total[left - 1] >= 0.5 * peak {
        left -= 1;
    }
    let mut right = best;
    while right + 1 < lag_count && total[right + 1] >= 0.5 * peak {
        right += 1;
    }
    let mut second = f64::NEG_INFINITY;
    for (idx, value) in total.iter().enumerate() {
        if idx < left || idx > right {
            second = second.max(*value);
        }
    }
    let confidence = if second > 0.0 { peak / second } else { f64::INFINITY };
    let mut refined = best as f64;
    if best > 0 && best + 1 < lag_count {
        refined += parabolic_offset(total[best - 1], peak, total[best + 1]);
    }
    let mut theta = (refined - max_lag as f64) * TAU / n as f64;
    if theta <= -half_range {
        theta += 2.0 * half_range;
    } else if theta > half_range {
        theta -= 2.0 * half_range;
    }
    (theta, confidence)
}

/// Log magnitude of the quotient along a frequency-plane ring, resampled at
/// [`ANGULAR_SAMPLES`] angles. A ring with more than a tenth of its samples
/// over mask holes is discarded; surviving holes take the ring mean so they
/// stay neutral under correlation.
fn sample_ring(s: &InvariantSpectrum, radius: f64) -> Option<Vec<f64>> {
    let mut ring = Vec::with_capacity(ANGULAR_SAMPLES);
    let mut holes = 0usize;
    for it in 0..ANGULAR_SAMPLES {
        let angle = TAU * it as f64 / ANGULAR_SAMPLES as f64;
        match log_magnitude_at(s, radius * angle.cos(), radius * angle.sin()) {
            Some(v) => ring.push(Some(v)),
            None => {
                ring.push(None);
                holes += 1;
            }
        }
    }
    if holes * 10 > ANGULAR_SAMPLES {
        return None;
    }
    let fill = ring.iter().flatten().sum::<f64>() / (ANGULAR_SAMPLES - holes) as f64;
    Some(ring.into_iter().map(|v| v.unwrap_or(fill)).collect())
}

/// Bilinear interpolation of `ln(1 + |I|)` at a continuous signed
/// frequency. Masked-out neighbors drop out and the remaining weights are
/// renormalized; `None` when less than half the weight survives. The
/// logarithm tames the quotient near nulls of the projection's spectrum,
/// where its magnitude is huge and only its angular shape is trustworthy.
fn log_magnitude_at(s: &InvariantSpectrum, u: f64, v: f64) -> Option<f64> {
    let (u0, v0) = (u.floor(), v.floor());
    let (fu, fv) = (u - u0, v - v0);
    let mut acc = 0.0;
    let mut weight = 0.0;
    for (dv, wv) in [(0i64, 1.0 - fv), (1, fv)] {
        for (du, wu) in [(0i64, 1.0 - fu), (1, fu)] {
            let w = wu * wv;
            if w == 0.0 {
                continue;
            }
            let sx = u0 as i64 + du;
            let sy = v0 as i64 + dv;
            if s.is_valid_signed(sx, sy) {
                acc += w * s.at_signed(sx, sy).norm().ln_1p();
                weight += w;
            }
        }
    }
    if weight >= 0.5 {
        Some(acc / weight)
    } else {
        None
    }
}

/// Removes the constant and every angular harmonic of order divisible by
/// four. The discretized projector is invariant under quarter turns of a
/// square lattice, so its canvas-locked imprint on a ring profile lives
/// entirely in those harmonics, while generic content keeps the rest.
fn drop_fourfold(ring: Vec<f64>) -> Vec<f64> {
    let n = ring.len();
    let mut grid: Vec<Complex64> = ring.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut grid);
    for (k, value) in grid.iter_mut().enumerate() {
        if k.min(n - k) % 4 == 0 {
            *value = Complex64::ZERO;
        }
    }
    planner.plan_fft_inverse(n).process(&mut grid);
    grid.iter().map(|z| z.re / n as f64).collect()
}

/// Shifts a profile to zero mean and unit standard deviation; `None` for
/// profiles whose variance is numerical dust, such as the ring profile of
/// radially symmetric content once its lattice wobble is removed.
fn normalize(ring: Vec<f64>) -> Option<Vec<f64>> {
    let n = ring.len() as f64;
    let mean = ring.iter().sum::<f64>() / n;
    let var = ring.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    if var <= 1e-12 {
        return None;
    }
    let sd = var.sqrt();
    Some(ring.iter().map(|v| (v - mean) / sd).collect())
}
