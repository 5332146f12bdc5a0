//! Geometric resampling helpers shared by the projection operators and the
//! registration pipeline: origin-centered padding, exact quarter-turn and
//! axis-flip index maps, bilinear rotation/reflection, and polar averaging.
//!
//! Exactness matters here: wherever a symmetry operation can be realized as
//! a pure index permutation (quarter turns, axis flips, centrosymmetric
//! flips), it is, so that projector identities hold to machine precision and
//! only genuinely oblique angles pay an interpolation penalty.

use crate::error::Result;
use crate::image::Image;

/// A copy of an image zero-padded onto a square canvas whose exact center is
/// the coordinate origin (when the origin alignment permits), remembering how
/// to crop back to the original canvas.
pub(crate) struct CenteredFrame {
    pub img: Image,
    x0: usize,
    y0: usize,
    src_width: usize,
    src_height: usize,
}

impl CenteredFrame {
    /// Crops a processed same-size canvas back to the original. Content that
    /// moved outside the original canvas is discarded, which is why callers
    /// that rotate real mass should pad their inputs up front.
    pub fn crop_back(&self, processed: &Image) -> Result<Image> {
        processed.cropped(self.x0, self.y0, self.src_width, self.src_height)
    }
}

/// True when `v` is an integer or half-integer, i.e. a coordinate that can
/// sit exactly on the pixel grid or exactly between two pixels.
pub(crate) fn is_half_integer(v: f64) -> bool {
    (2.0 * v).fract() == 0.0
}

/// True when quarter turns about the origin can be realized as exact index
/// permutations once the image is padded to an origin-centered square.
pub(crate) fn quarter_turn_alignable(f: &Image) -> bool {
    let (ox, oy) = f.origin();
    is_half_integer(ox) && is_half_integer(oy) && (ox - oy).fract() == 0.0
}

/// Distance from the origin to the farthest canvas corner.
pub(crate) fn corner_reach(f: &Image) -> f64 {
    let xs = [f.x_of(0), f.x_of(f.width() - 1)];
    let ys = [f.y_of(0), f.y_of(f.height() - 1)];
    let mut reach = 0.0f64;
    for x in xs {
        for y in ys {
            reach = reach.max(x.hypot(y));
        }
    }
    reach
}

/// Pads onto a square canvas large enough that no rotation about the origin
/// clips content. When the origin alignment permits, it lands on the exact
/// canvas center so quarter turns become index permutations.
pub(crate) fn centered_square(f: &Image) -> Result<CenteredFrame> {
    let (ox, oy) = f.origin();
    let half = corner_reach(f).ceil() as usize + 2;
    let aligned = quarter_turn_alignable(f);
    let (n, center) = if aligned && ox.fract() == 0.0 {
        (2 * half + 1, half as f64)
    } else if aligned {
        // Half-integer origins center exactly on an even-sized canvas.
        (2 * half + 2, half as f64 + 0.5)
    } else {
        (2 * half + 1, half as f64)
    };
    let x0 = (center - ox).round() as usize;
    let y0 = (center - oy).round() as usize;
    Ok(CenteredFrame {
        img: f.embedded(n, n, x0, y0)?,
        x0,
        y0,
        src_width: f.width(),
        src_height: f.height(),
    })
}

/// Exact quarter turn (`k` times 90° counterclockwise) on a square canvas
/// whose origin is the exact canvas center. Pure index permutation.
pub(crate) fn rotate_quarter_exact(f: &Image, k: u32) -> Image {
    let n = f.width();
    debug_assert_eq!(n, f.height(), "quarter turns need a square canvas");
    let last = n - 1;
    let mut out = f.clone();
    for iy in 0..n {
        for ix in 0..n {
            let v = match k % 4 {
                0 => f.get(ix, iy),
                // In the y-up frame a CCW turn pulls each output pixel from
                // the location a clockwise turn would send it to.
                1 => f.get(last - iy, ix),
                2 => f.get(last - ix, last - iy),
                _ => f.get(iy, last - ix),
            };
            out.set(ix, iy, v);
        }
    }
    out
}

/// Content rotated by `angle` (counterclockwise) about the origin, resampled
/// bilinearly onto a target canvas with the given size and origin.
pub(crate) fn resample_rotated(
    src: &Image,
    angle: f64,
    width: usize,
    height: usize,
    origin: (f64, f64),
) -> Image {
    let (c, s) = (angle.cos(), angle.sin());
    let (sx0, sy0) = src.origin();
    let mut out = Image::with_origin(width, height, vec![0.0; width * height], origin)
        .expect("caller supplies positive dimensions");
    for iy in 0..height {
        let y = origin.1 - iy as f64;
        for ix in 0..width {
            let x = ix as f64 - origin.0;
            // Inverse-rotate the output coordinate into the source frame.
            let xs = c * x + s * y;
            let ys = -s * x + c * y;
            out.set(ix, iy, src.sample_bilinear(sx0 + xs, sy0 - ys));
        }
    }
    out
}

/// Exact centrosymmetric flip about the origin, `g(x) = f(-x)`, valid when
/// both doubled origin coordinates are integers. Out-of-range sources read
/// as zero.
pub(crate) fn centro_flip_exact(f: &Image) -> Image {
    let (ox, oy) = f.origin();
    debug_assert!(is_half_integer(ox) && is_half_integer(oy));
    let (jx0, jy0) = ((2.0 * ox).round() as isize, (2.0 * oy).round() as isize);
    let mut out = Image::with_origin(
        f.width(),
        f.height(),
        vec![0.0; f.width() * f.height()],
        f.origin(),
    )
    .expect("same dimensions as input");
    for iy in 0..f.height() as isize {
        let jy = jy0 - iy;
        if jy < 0 || jy >= f.height() as isize {
            continue;
        }
        for ix in 0..f.width() as isize {
            let jx = jx0 - ix;
            if jx < 0 || jx >= f.width() as isize {
                continue;
            }
            out.set(ix as usize, iy as usize, f.get(jx as usize, jy as usize));
        }
    }
    out
}

/// Reflection of content over the line through the origin at angle `alpha`,
/// resampled onto the same canvas. Axis and diagonal lines on aligned
/// canvases use exact index maps; oblique lines fall back to bilinear
/// sampling of the reflected point.
pub(crate) fn reflect_over_line(f: &Image, alpha: f64) -> Image {
    let (ox, oy) = f.origin();
    let n = f.width();
    let square_centered = f.height() == n
        && quarter_turn_alignable(f)
        && (2.0 * ox).round() as usize == n - 1
        && (2.0 * oy).round() as usize == n - 1;

    // Exact index maps exist for alpha in {0, pi/4, pi/2, 3pi/4} modulo pi.
    let quadrant = alpha.rem_euclid(std::f64::consts::PI) / std::f64::consts::FRAC_PI_4;
    let near = |q: f64, k: f64| (q - k).abs() < 1e-12;
    if near(quadrant, 0.0) || near(quadrant, 4.0) {
        // Mirror across the x axis: y -> -y.
        if is_half_integer(oy) {
            return flip_rows_exact(f);
        }
    } else if near(quadrant, 2.0) {
        // Mirror across the y axis: x -> -x.
        if is_half_integer(ox) {
            return flip_cols_exact(f);
        }
    } else if near(quadrant, 1.0) && square_centered {
        // Mirror across y = x: anti-transpose in display indices.
        let last = n - 1;
        let mut out = f.clone();
        for iy in 0..n {
            for ix in 0..n {
                out.set(ix, iy, f.get(last - iy, last - ix));
            }
        }
        return out;
    } else if near(quadrant, 3.0) && square_centered {
        // Mirror across y = -x: plain transpose in display indices.
        let mut out = f.clone();
        for iy in 0..n {
            for ix in 0..n {
                out.set(ix, iy, f.get(iy, ix));
            }
        }
        return out;
    }

    // General line: sample the reflected point bilinearly.
    let (c2, s2) = ((2.0 * alpha).cos(), (2.0 * alpha).sin());
    let mut out = f.clone();
    for iy in 0..f.height() {
        let y = oy - iy as f64;
        for ix in 0..f.width() {
            let x = ix as f64 - ox;
            let rx = c2 * x + s2 * y;
            let ry = s2 * x - c2 * y;
            out.set(ix, iy, f.sample_bilinear(ox + rx, oy - ry));
        }
    }
    out
}

fn flip_rows_exact(f: &Image) -> Image {
    let jy0 = (2.0 * f.origin().1).round() as isize;
    let mut out = f.clone();
    for v in out.samples_mut() {
        *v = 0.0;
    }
    for iy in 0..f.height() as isize {
        let jy = jy0 - iy;
        if jy < 0 || jy >= f.height() as isize {
            continue;
        }
        for ix in 0..f.width() {
            out.set(ix, iy as usize, f.get(ix, jy as usize));
        }
    }
    out
}

fn flip_cols_exact(f: &Image) -> Image {
    let jx0 = (2.0 * f.origin().0).round() as isize;
    let mut out = f.clone();
    for v in out.samples_mut() {
        *v = 0.0;
    }
    for iy in 0..f.height() {
        for ix in 0..f.width() as isize {
            let jx = jx0 - ix;
            if jx < 0 || jx >= f.width() as isize {
                continue;
            }
            out.set(ix as usize, iy, f.get(jx as usize, iy));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::random_image;

    #[test]
    fn quarter_turns_compose_and_invert() {
        let frame = centered_square(&random_image(6, 9, 30)).unwrap();
        let f = &frame.img;
        let once = rotate_quarter_exact(f, 1);
        let twice = rotate_quarter_exact(&once, 1);
        assert_eq!(twice.samples(), rotate_quarter_exact(f, 2).samples());
        let full = rotate_quarter_exact(&twice, 2);
        assert_eq!(full.samples(), f.samples());
    }

    #[test]
    fn bilinear_rotation_matches_exact_quarter_turn() {
        let frame = centered_square(&random_image(7, 7, 31)).unwrap();
        let f = &frame.img;
        let exact = rotate_quarter_exact(f, 1);
        let sampled = resample_rotated(
            f,
            std::f64::consts::FRAC_PI_2,
            f.width(),
            f.height(),
            f.origin(),
        );
        for (a, b) in exact.samples().iter().zip(sampled.samples()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn centered_square_preserves_coordinates_and_crops_back() {
        // (8, 3) mixes integer and half-integer origin coordinates, which no
        // integer padding can center exactly; it must still round-trip.
        for (w, h) in [(5, 5), (6, 4), (8, 3)] {
            let f = random_image(w, h, 32);
            let frame = centered_square(&f).unwrap();
            let n = frame.img.width();
            assert_eq!(n, frame.img.height());
            let center = (n as f64 - 1.0) / 2.0;
            let (ox, oy) = frame.img.origin();
            if quarter_turn_alignable(&f) {
                assert_eq!((ox, oy), (center, center));
            } else {
                assert!((ox - center).abs() <= 0.5 && (oy - center).abs() <= 0.5);
            }
            let back = frame.crop_back(&frame.img).unwrap();
            assert_eq!(back.samples(), f.samples());
            assert_eq!(back.origin(), f.origin());
        }
    }

    #[test]
    fn centro_flip_is_an_involution() {
        let frame = centered_square(&random_image(5, 8, 33)).unwrap();
        let flipped = centro_flip_exact(&frame.img);
        assert_eq!(centro_flip_exact(&flipped).samples(), frame.img.samples());
        assert_ne!(flipped.samples(), frame.img.samples());
    }

    #[test]
    fn reflections_are_involutions() {
        let frame = centered_square(&random_image(6, 6, 34)).unwrap();
        let f = &frame.img;
        let quarter = std::f64::consts::FRAC_PI_4;
        for alpha in [0.0, quarter, 2.0 * quarter, 3.0 * quarter] {
            let r = reflect_over_line(f, alpha);
            let rr = reflect_over_line(&r, alpha);
            assert_eq!(rr.samples(), f.samples(), "alpha = {alpha}");
        }
    }

}
