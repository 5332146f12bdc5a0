//! Blur families, their projection operators, and the moment index sets on
//! which each family separates.
//!
//! A blur family S (centrosymmetric kernels, N-fold symmetric kernels,
//! radial kernels, ...) comes with a linear projector P mapping any image
//! onto S. The projectors here realize their continuous definitions on the
//! pixel grid, using exact index permutations wherever the symmetry allows
//! (flips, quarter turns, axis-aligned reflections) and bilinear resampling
//! for genuinely oblique angles. Most families also *separate* on a set D of
//! moment indices — projection preserves moments inside D and annihilates
//! the rest — which is what makes the fast recurrence for descriptor
//! computation possible.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::moments::{
    complex_moments, geometric_moments, rotated_geometric_moments, Basis, Kahan, MomentTable,
    MultiIndex,
};
use crate::psf::trim_zero_border;
use crate::transform::{
    centered_square, centro_flip_exact, is_half_integer, reflect_over_line, resample_rotated,
    rotate_quarter_exact,
};

/// A family of admissible blur kernels.
#[derive(Debug, Clone, PartialEq)]
pub enum BlurClass {
    /// Any kernel at all; only trivial descriptors survive.
    TrivialIdentity,
    /// No blur (the impulse alone); everything is a descriptor.
    TrivialDelta,
    /// Even kernels on single-row images.
    Even1D,
    /// Centrosymmetric kernels, `h(x) = h(-x)`.
    Centrosymmetric,
    /// Kernels invariant under rotation by `2*pi/N`.
    NFold(u32),
    /// Fully rotationally symmetric kernels.
    Radial,
    /// N-fold kernels additionally symmetric over the axis at angle `alpha`.
    Dihedral(u32, f64),
    /// Line-segment kernels along the direction at angle `beta`.
    Directional(f64),
    /// Gaussian kernels of arbitrary covariance.
    Gaussian,
}

impl BlurClass {
    /// The basis in which the class separates on a moment index set, if any.
    pub fn separating_basis(&self) -> Option<Basis> {
        match self {
            BlurClass::TrivialIdentity | BlurClass::TrivialDelta => Some(Basis::Geometric),
            BlurClass::Even1D | BlurClass::Centrosymmetric | BlurClass::Directional(_) => {
                Some(Basis::Geometric)
            }
            BlurClass::NFold(_) | BlurClass::Radial => Some(Basis::Complex),
            BlurClass::Dihedral(..) | BlurClass::Gaussian => None,
        }
    }

    /// True for classes whose projector is a pure index permutation on
    /// aligned grids, so identities hold to machine precision rather than
    /// interpolation accuracy.
    pub fn is_grid_exact(&self) -> bool {
        match self {
            BlurClass::TrivialIdentity
            | BlurClass::TrivialDelta
            | BlurClass::Even1D
            | BlurClass::Centrosymmetric => true,
            BlurClass::NFold(n) => matches!(n, 1 | 2 | 4),
            BlurClass::Directional(beta) => *beta == 0.0,
            _ => false,
        }
    }
}

impl fmt::Display for BlurClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlurClass::TrivialIdentity => write!(f, "identity"),
            BlurClass::TrivialDelta => write!(f, "delta"),
            BlurClass::Even1D => write!(f, "even1d"),
            BlurClass::Centrosymmetric => write!(f, "centro"),
            BlurClass::NFold(n) => write!(f, "nfold:{n}"),
            BlurClass::Radial => write!(f, "radial"),
            BlurClass::Dihedral(n, alpha) => write!(f, "dihedral:{n}:{alpha}"),
            BlurClass::Directional(beta) => write!(f, "directional:{beta}"),
            BlurClass::Gaussian => write!(f, "gauss"),
        }
    }
}

impl FromStr for BlurClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(':');
        let head = parts.next().unwrap_or_default();
        let mut arg = |name: &str| {
            parts
                .next()
                .ok_or_else(|| Error::InvalidParam(format!("blur class {head} needs {name}")))
        };
        let class = match head {
            "identity" => BlurClass::TrivialIdentity,
            "delta" => BlurClass::TrivialDelta,
            "even1d" => BlurClass::Even1D,
            "centro" => BlurClass::Centrosymmetric,
            "radial" => BlurClass::Radial,
            "gauss" => BlurClass::Gaussian,
            "nfold" => {
                let n: u32 = arg("an order, e.g. nfold:4")?
                    .parse()
                    .map_err(|_| Error::InvalidParam("nfold order must be an integer".into()))?;
                if n == 0 {
                    return Err(Error::InvalidParam("nfold order must be at least 1".into()));
                }
                BlurClass::NFold(n)
            }
            "dihedral" => {
                let n: u32 = arg("an order and axis angle, e.g. dihedral:4:0")?
                    .parse()
                    .map_err(|_| Error::InvalidParam("dihedral order must be an integer".into()))?;
                let alpha: f64 = arg("an axis angle in radians")?
                    .parse()
                    .map_err(|_| Error::InvalidParam("dihedral axis angle must be a number".into()))?;
                if n == 0 {
                    return Err(Error::InvalidParam("dihedral order must be at least 1".into()));
                }
                BlurClass::Dihedral(n, alpha.rem_euclid(std::f64::consts::PI))
            }
            "directional" => {
                let beta: f64 = arg("a direction angle in radians")?
                    .parse()
                    .map_err(|_| Error::InvalidParam("direction angle must be a number".into()))?;
                BlurClass::Directional(beta.rem_euclid(std::f64::consts::PI))
            }
            other => {
                return Err(Error::InvalidParam(format!(
                    "unknown blur class {other:?} (expected centro, nfold:N, radial, \
                     dihedral:N:alpha, directional:beta, gauss, even1d, identity or delta)"
                )))
            }
        };
        if parts.next().is_some() {
            return Err(Error::InvalidParam(format!("trailing arguments in blur class {s:?}")));
        }
        Ok(class)
    }
}

/// The moment indices a separating class preserves under projection.
#[derive(Debug, Clone)]
pub struct IndexSet {
    basis: Basis,
    kind: SetKind,
    frame_rotation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum SetKind {
    All,
    Origin,
    EvenOrder,
    EvenX1D,
    ModN(u32),
    Diagonal,
    AxisX,
}

impl IndexSet {
    pub fn basis(&self) -> Basis {
        self.basis
    }

    /// Angle of the rotated coordinate frame the basis lives in (nonzero
    /// only for oblique directional classes).
    pub fn frame_rotation(&self) -> f64 {
        self.frame_rotation
    }

    pub fn contains(&self, idx: MultiIndex) -> bool {
        match self.kind {
            SetKind::All => true,
            SetKind::Origin => idx.order() == 0,
            SetKind::EvenOrder => idx.order() % 2 == 0,
            SetKind::EvenX1D => idx.q == 0 && idx.p % 2 == 0,
            SetKind::ModN(n) => (idx.p as i64 - idx.q as i64).rem_euclid(n as i64) == 0,
            SetKind::Diagonal => idx.p == idx.q,
            SetKind::AxisX => idx.q == 0,
        }
    }

    /// Whether `p - k` stays in the set for all contained `p, k` with
    /// componentwise `p >= k`. All the families realized here are closed,
    /// which is what lets the descriptor recurrence skip the projected image
    /// entirely.
    pub fn difference_closed(&self) -> bool {
        true
    }

    /// Member indices with order at most `r`, ascending by (order, q).
    pub fn enumerate(&self, r: u32) -> Vec<MultiIndex> {
        MultiIndex::up_to(r).filter(|idx| self.contains(*idx)).collect()
    }
}

/// The separating index set of a class in the requested basis.
///
/// Classes without a separating basis (dihedral, Gaussian) and basis
/// mismatches signal that descriptors must go through the projected-image
/// path instead.
pub fn index_set(class: &BlurClass, basis: Basis) -> Result<IndexSet> {
    let natural = class
        .separating_basis()
        .ok_or_else(|| Error::NoSeparatingBasis(class.to_string()))?;
    // The parity set is basis-agnostic; everything else is tied to one basis.
    let flexible = matches!(
        class,
        BlurClass::Centrosymmetric | BlurClass::TrivialIdentity | BlurClass::TrivialDelta
    );
    if basis != natural && !flexible {
        return Err(Error::NoSeparatingBasis(format!(
            "{class} separates only in the {natural:?} basis"
        )));
    }
    let kind = match class {
        BlurClass::TrivialIdentity => SetKind::All,
        BlurClass::TrivialDelta => SetKind::Origin,
        BlurClass::Even1D => SetKind::EvenX1D,
        BlurClass::Centrosymmetric => SetKind::EvenOrder,
        BlurClass::NFold(n) => SetKind::ModN(*n),
        BlurClass::Radial => SetKind::Diagonal,
        BlurClass::Directional(_) => SetKind::AxisX,
        BlurClass::Dihedral(..) | BlurClass::Gaussian => unreachable!("no separating basis"),
    };
    let frame_rotation = match class {
        BlurClass::Directional(beta) => *beta,
        _ => 0.0,
    };
    Ok(IndexSet { basis, kind, frame_rotation })
}

/// Projects an image onto the blur family of `class`.
///
/// The result lives on the same canvas with the same origin. Operations that
/// move content (rotations, reflections) run on an internal origin-centered
/// square and are cropped back, so inputs should be padded far enough that
/// no projected mass falls outside the original canvas.
pub fn project(f: &Image, class: &BlurClass) -> Result<Image> {
    match class {
        BlurClass::TrivialIdentity => Ok(f.clone()),
        BlurClass::TrivialDelta => {
            let m00 = checked_mass(f)?;
            let mut out = zero_like(f);
            splat(&mut out, f.origin().0, f.origin().1, m00);
            Ok(out)
        }
        BlurClass::Even1D => {
            if f.height() != 1 {
                return Err(Error::InvalidParam(
                    "even1d projection is defined for single-row images".into(),
                ));
            }
            let reflected = reflect_over_line(f, std::f64::consts::FRAC_PI_2);
            Ok(average(f, &reflected))
        }
        BlurClass::Centrosymmetric => {
            let flipped = if is_half_integer(f.origin().0) && is_half_integer(f.origin().1) {
                centro_flip_exact(f)
            } else {
                resample_rotated(f, std::f64::consts::PI, f.width(), f.height(), f.origin())
            };
            Ok(average(f, &flipped))
        }
        BlurClass::NFold(n) => {
            if matches!(n, 1 | 2 | 4) {
                let frame = centered_square(f)?;
                frame.crop_back(&nfold_average(&frame.img, *n))
            } else {
                Ok(polar_bin_mean(f, AngularLaw::ModN(*n)))
            }
        }
        BlurClass::Radial => Ok(polar_bin_mean(f, AngularLaw::Isotropic)),
        BlurClass::Dihedral(n, alpha) => {
            let quarter = std::f64::consts::FRAC_PI_4;
            let axis_steps = alpha / quarter;
            let aligned_axis = (axis_steps - axis_steps.round()).abs() < 1e-12;
            if matches!(n, 1 | 2 | 4) && aligned_axis {
                // The 2N permutations exist on the grid, so the group
                // average is exact.
                let frame = centered_square(f)?;
                let reflected = reflect_over_line(&frame.img, *alpha);
                let symmetrized = average(&frame.img, &reflected);
                frame.crop_back(&nfold_average(&symmetrized, *n))
            } else {
                Ok(polar_bin_mean(f, AngularLaw::FoldedModN(*n, *alpha)))
            }
        }
        BlurClass::Directional(beta) => {
            if *beta == 0.0 {
                collapse_to_origin_row(f)
            } else {
                collapse_onto_line(f, *beta)
            }
        }
        BlurClass::Gaussian => project_gaussian(f),
    }
}

/// Angular structure of a polar pixel partition.
enum AngularLaw {
    /// Rings only: invariant under every rotation.
    Isotropic,
    /// Rings split into sector bins repeated every `2*pi/N`.
    ModN(u32),
    /// As `ModN`, additionally folded over the axis at the given angle.
    FoldedModN(u32, f64),
}

/// Conditional expectation of the image over a partition of the pixels into
/// symmetry-invariant polar cells: each pixel is replaced by the mean of its
/// cell.
///
/// Because the cells are unions of pixels that map to each other under the
/// family's symmetry group, this is an orthogonal projection in the exact
/// linear-algebra sense — idempotent, mass-preserving and self-adjoint to
/// machine precision, with no interpolation anywhere. The price is that the
/// cells only approximate the continuum orbits, which is what the looser
/// separation tolerance of these classes accounts for.
fn polar_bin_mean(f: &Image, law: AngularLaw) -> Image {
    let reach = crate::transform::corner_reach(f);
    let (w, h) = (f.width(), f.height());
    // Half-pixel radial rings: fine enough that binning along the radius
    // stays below general rasterization error, coarse enough that cells
    // keep a few pixels each.
    let n_r = (2.0 * reach).ceil().max(2.0) as usize;
    let step = if reach > 0.0 { reach / (n_r - 1) as f64 } else { 1.0 };
    // Aim for angular cells roughly 1.5 px long at each ring's radius; a
    // single cell near the center, finer outward.
    let cells_at = |ring: usize| -> usize {
        let sector = match &law {
            AngularLaw::Isotropic => return 1,
            AngularLaw::ModN(n) => 2.0 * std::f64::consts::PI / *n as f64,
            AngularLaw::FoldedModN(n, _) => std::f64::consts::PI / *n as f64,
        };
        let arc = sector * ring as f64 * step;
        (arc / 1.5).floor().max(1.0) as usize
    };
    let mut offsets = Vec::with_capacity(n_r + 2);
    let mut total = 0usize;
    for ring in 0..=n_r {
        offsets.push(total);
        total += cells_at(ring);
    }
    offsets.push(total);

    let (ox, oy) = f.origin();
    let cell_of = |ix: usize, iy: usize| -> usize {
        let x = ix as f64 - ox;
        let y = oy - iy as f64;
        let rho = x.hypot(y);
        let ring = ((rho / step).round() as usize).min(n_r);
        let n_a = cells_at(ring);
        if n_a == 1 {
            return offsets[ring];
        }
        let theta = y.atan2(x);
        let frac = match &law {
            AngularLaw::Isotropic => 0.0,
            AngularLaw::ModN(n) => {
                let sector = 2.0 * std::f64::consts::PI / *n as f64;
                theta.rem_euclid(sector) / sector
            }
            AngularLaw::FoldedModN(n, alpha) => {
                let sector = 2.0 * std::f64::consts::PI / *n as f64;
                let u = (theta - alpha).rem_euclid(sector);
                // Fold over the axis: u and sector - u are mirror images.
                2.0 * u.min(sector - u) / sector
            }
        };
        offsets[ring] + ((frac * n_a as f64) as usize).min(n_a - 1)
    };

    let mut sums = vec![Kahan::default(); total];
    let mut counts = vec![0u32; total];
    for iy in 0..h {
        for ix in 0..w {
            let c = cell_of(ix, iy);
            sums[c].add(f.get(ix, iy));
            counts[c] += 1;
        }
    }
    let means: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| if c > 0 { s.value() / c as f64 } else { 0.0 })
        .collect();
    let mut out = f.clone();
    for iy in 0..h {
        for ix in 0..w {
            out.set(ix, iy, means[cell_of(ix, iy)]);
        }
    }
    out
}

/// Projects every pixel's mass onto the line through the origin at angle
/// `beta`, splatting at the foot of the perpendicular. Linear and
/// mass-preserving, and the bilinear splat keeps each pixel's along-line
/// coordinate exact in the first moment; the spread it introduces is what
/// keeps this realization (like its continuum counterpart) non-orthogonal.
fn collapse_onto_line(f: &Image, beta: f64) -> Result<Image> {
    let (c, s) = (beta.cos(), beta.sin());
    let (ox, oy) = f.origin();
    // The foot of the perpendicular can land up to sqrt(2) times farther
    // from the origin than any source pixel, so size the output canvas to
    // the projected segment rather than the input and trim afterwards.
    let mut reach = 0.0f64;
    for x in [-ox, f.width() as f64 - 1.0 - ox] {
        for y in [oy - (f.height() as f64 - 1.0), oy] {
            reach = reach.max((x * c + y * s).abs());
        }
    }
    let nx = (reach * c.abs()).ceil() as usize + 1;
    let ny = (reach * s.abs()).ceil() as usize + 1;
    let (w, h) = (2 * nx + 1, 2 * ny + 1);
    let mut out = Image::with_origin(w, h, vec![0.0; w * h], (nx as f64, ny as f64))?;
    for iy in 0..f.height() {
        let y = oy - iy as f64;
        for ix in 0..f.width() {
            let v = f.get(ix, iy);
            if v == 0.0 {
                continue;
            }
            let x = ix as f64 - ox;
            let along = x * c + y * s;
            splat(&mut out, nx as f64 + along * c, ny as f64 - along * s, v);
        }
    }
    if out.samples().iter().all(|v| *v == 0.0) {
        return Ok(zero_like(f));
    }
    trim_zero_border(out)
}

/// Mass with a guard against vanishing normalization.
fn checked_mass(f: &Image) -> Result<f64> {
    let m00 = f.mass();
    let scale: f64 = f.samples().iter().map(|v| v.abs()).sum();
    if m00.abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::VanishingMass);
    }
    Ok(m00)
}

fn zero_like(f: &Image) -> Image {
    Image::with_origin(f.width(), f.height(), vec![0.0; f.width() * f.height()], f.origin())
        .expect("same dimensions as input")
}

/// Bilinear splat of `mass` at grid position `(px, py)`; collapses to a
/// single cell when the position is integral.
fn splat(out: &mut Image, px: f64, py: f64, mass: f64) {
    let (x0, y0) = (px.floor(), py.floor());
    let (ax, ay) = (px - x0, py - y0);
    for (dy, wy) in [(0isize, 1.0 - ay), (1, ay)] {
        if wy == 0.0 {
            continue;
        }
        let iy = y0 as isize + dy;
        if iy < 0 || iy >= out.height() as isize {
            continue;
        }
        for (dx, wx) in [(0isize, 1.0 - ax), (1, ax)] {
            if wx == 0.0 {
                continue;
            }
            let ix = x0 as isize + dx;
            if ix < 0 || ix >= out.width() as isize {
                continue;
            }
            let prev = out.get(ix as usize, iy as usize);
            out.set(ix as usize, iy as usize, prev + mass * wy * wx);
        }
    }
}

fn average(a: &Image, b: &Image) -> Image {
    let mut out = a.clone();
    for (o, v) in out.samples_mut().iter_mut().zip(b.samples()) {
        *o = 0.5 * (*o + v);
    }
    out
}

/// Mean of the N rotations of `img` by multiples of `2*pi/N` about the
/// origin. Quarter turns use the exact permutation when the canvas is an
/// origin-centered square; other angles sample bilinearly.
fn nfold_average(img: &Image, n: u32) -> Image {
    if n == 1 {
        return img.clone();
    }
    let centered = {
        let (ox, oy) = img.origin();
        img.width() == img.height() && ox == oy && 2.0 * ox == (img.width() - 1) as f64
    };
    let mut acc = vec![Kahan::default(); img.samples().len()];
    for j in 0..n {
        let rotated = if (4 * j) % n == 0 && centered {
            rotate_quarter_exact(img, 4 * j / n)
        } else {
            let angle = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
            resample_rotated(img, angle, img.width(), img.height(), img.origin())
        };
        for (slot, v) in acc.iter_mut().zip(rotated.samples()) {
            slot.add(*v);
        }
    }
    let mut out = img.clone();
    for (o, slot) in out.samples_mut().iter_mut().zip(&acc) {
        *o = slot.value() / n as f64;
    }
    out
}

/// Sends each column's mass to the row through the origin. Exact (and
/// exactly idempotent) because no interpolation is involved; requires the
/// origin to lie on a pixel row.
fn collapse_to_origin_row(f: &Image) -> Result<Image> {
    let oy = f.origin().1;
    if oy.fract() != 0.0 || oy < 0.0 || oy >= f.height() as f64 {
        return Err(Error::InvalidParam(
            "directional projection needs the origin on a pixel row inside the canvas".into(),
        ));
    }
    let row = oy as usize;
    let mut out = zero_like(f);
    for ix in 0..f.width() {
        let mut acc = Kahan::default();
        for iy in 0..f.height() {
            acc.add(f.get(ix, iy));
        }
        out.set(ix, row, acc.value());
    }
    Ok(out)
}

/// Replaces the image by the Gaussian surface with the same mass, centroid
/// and central covariance *as measured on the canvas*. A short fixed-point
/// iteration absorbs the discretization bias, so projecting twice reproduces
/// the same surface to near machine precision.
fn project_gaussian(f: &Image) -> Result<Image> {
    let m00 = checked_mass(f)?;
    let t = geometric_moments(f, 2, 1.0)?;
    let m = |p, q| t.get(MultiIndex::new(p, q)).re;
    let (cx, cy) = (m(1, 0) / m00, m(0, 1) / m00);
    let target = GaussParams {
        mass: m00,
        cx,
        cy,
        sxx: m(2, 0) / m00 - cx * cx,
        sxy: m(1, 1) / m00 - cx * cy,
        syy: m(0, 2) / m00 - cy * cy,
    };

    // A (near-)point mass is its own Gaussian limit; this also covers the
    // impulse, which every projector must fix.
    let spread = target.sxx.abs().max(target.syy.abs()).max(target.sxy.abs());
    if spread <= 1e-9 {
        let mut out = zero_like(f);
        splat(&mut out, f.origin().0 + target.cx, f.origin().1 - target.cy, target.mass);
        return Ok(out);
    }
    if !(target.sxx > 0.0 && target.syy > 0.0 && target.sxx * target.syy > target.sxy * target.sxy)
    {
        return Err(Error::NonPositiveDefinite);
    }

    let mut params = target;
    let mut raster = zero_like(f);
    for _ in 0..64 {
        raster = render_gaussian(f, &params)?;
        let rt = geometric_moments(&raster, 2, 1.0)?;
        let rm = |p, q| rt.get(MultiIndex::new(p, q)).re;
        let rmass = rm(0, 0);
        if rmass <= 0.0 {
            return Err(Error::NonPositiveDefinite);
        }
        let (rcx, rcy) = (rm(1, 0) / rmass, rm(0, 1) / rmass);
        let measured = GaussParams {
            mass: rmass,
            cx: rcx,
            cy: rcy,
            sxx: rm(2, 0) / rmass - rcx * rcx,
            sxy: rm(1, 1) / rmass - rcx * rcy,
            syy: rm(0, 2) / rmass - rcy * rcy,
        };
        let scale = target.sxx + target.syy;
        let done = (measured.mass - target.mass).abs() <= 1e-13 * target.mass.abs()
            && (measured.cx - target.cx).abs() <= 1e-13 * (1.0 + target.cx.abs())
            && (measured.cy - target.cy).abs() <= 1e-13 * (1.0 + target.cy.abs())
            && (measured.sxx - target.sxx).abs() <= 1e-13 * scale
            && (measured.sxy - target.sxy).abs() <= 1e-13 * scale
            && (measured.syy - target.syy).abs() <= 1e-13 * scale;
        if done {
            break;
        }
        params = GaussParams {
            mass: params.mass * (target.mass / measured.mass),
            cx: params.cx + (target.cx - measured.cx),
            cy: params.cy + (target.cy - measured.cy),
            sxx: params.sxx + (target.sxx - measured.sxx),
            sxy: params.sxy + (target.sxy - measured.sxy),
            syy: params.syy + (target.syy - measured.syy),
        };
        if !(params.sxx > 0.0
            && params.syy > 0.0
            && params.sxx * params.syy > params.sxy * params.sxy)
        {
            return Err(Error::NonPositiveDefinite);
        }
    }
    Ok(raster)
}

#[derive(Clone, Copy)]
struct GaussParams {
    mass: f64,
    cx: f64,
    cy: f64,
    sxx: f64,
    sxy: f64,
    syy: f64,
}

fn render_gaussian(f: &Image, p: &GaussParams) -> Result<Image> {
    let det = p.sxx * p.syy - p.sxy * p.sxy;
    if !(det > 0.0) {
        return Err(Error::NonPositiveDefinite);
    }
    let norm = p.mass / (2.0 * std::f64::consts::PI * det.sqrt());
    let (ixx, ixy, iyy) = (p.syy / det, -p.sxy / det, p.sxx / det);
    let mut out = zero_like(f);
    for iy in 0..f.height() {
        let dy = f.y_of(iy) - p.cy;
        for ix in 0..f.width() {
            let dx = f.x_of(ix) - p.cx;
            let q = ixx * dx * dx + 2.0 * ixy * dx * dy + iyy * dy * dy;
            out.set(ix, iy, norm * (-0.5 * q).exp());
        }
    }
    Ok(out)
}

/// Outcome of checking that projection preserves the in-set moments of an
/// image and annihilates the rest.
#[derive(Debug, Clone)]
pub struct SeparationReport {
    pub basis: Basis,
    pub tolerance: f64,
    /// Indices whose deviation exceeded the tolerance, with the deviation.
    pub violations: Vec<(MultiIndex, f64)>,
}

impl SeparationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Compares the moments of `f` and of its projection in the class's
/// separating basis: indices in D must be preserved, all others must vanish.
/// Grid-exact classes are held to `1e-10 * |m00|`, interpolating ones to
/// `1e-3 * |m00|`.
pub fn verify_separation(
    f: &Image,
    class: &BlurClass,
    r: u32,
    ref_length: f64,
) -> Result<SeparationReport> {
    let basis = class
        .separating_basis()
        .ok_or_else(|| Error::NoSeparatingBasis(class.to_string()))?;
    let set = index_set(class, basis)?;
    let projected = project(f, class)?;
    let table = |img: &Image| -> Result<MomentTable> {
        match basis {
            Basis::Geometric if set.frame_rotation() != 0.0 => {
                rotated_geometric_moments(img, r, ref_length, set.frame_rotation())
            }
            Basis::Geometric => geometric_moments(img, r, ref_length),
            Basis::Complex => complex_moments(img, r, ref_length),
        }
    };
    let mf = table(f)?;
    let mp = table(&projected)?;
    let m00 = mf.get(MultiIndex::new(0, 0)).norm();
    let tolerance = if class.is_grid_exact() { 1e-10 * m00 } else { 1e-3 * m00 };
    let mut violations = Vec::new();
    for (idx, vf) in mf.iter() {
        let vp = mp.get(idx);
        let deviation = if set.contains(idx) { (vp - vf).norm() } else { vp.norm() };
        if deviation > tolerance {
            violations.push((idx, deviation));
        }
    }
    Ok(SeparationReport { basis, tolerance, violations })
}
