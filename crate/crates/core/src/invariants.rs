//! Moment-domain blur invariants.
//!
//! For a blur class with projector `P`, the descriptor coefficients `C_p`
//! are defined through the deconvolution recurrence
//!
//! ```text
//! m00 * C_p = m_p - sum_{0 < k <= p} binom(p, k) * m_k^{(Pf)} * C_{p-k}
//! ```
//!
//! evaluated in increasing order. When the class has a separating index set
//! `D`, the reference moments `m^{(Pf)}` coincide with the image's own
//! moments on `D` and vanish elsewhere, so the sum collapses to `k ∈ D` and
//! no projection is ever computed. Classes without a separating set
//! (dihedral, Gaussian spread) fall back on literal projected moments.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::moments::{
    complex_moments, geometric_moments, rotated_geometric_moments, transition, tri_index, Basis,
    MomentTable, MultiIndex,
};
use crate::projectors::{index_set, project, BlurClass};

/// Blur-invariant moment descriptor of one image.
///
/// Stores `C_pq` for every `p + q <= r`, along with the session parameters
/// needed to compare two vectors. Entries whose value is forced by the
/// structure of the recurrence (`C_00 = 1`, and `C_p = 0` for `p` in the
/// separating set) are flagged trivial; they are still computed honestly
/// and excluded from distances.
#[derive(Debug, Clone)]
pub struct InvariantVector {
    class: BlurClass,
    basis: Basis,
    max_order: u32,
    ref_length: f64,
    m00: f64,
    values: Vec<Complex64>,
    trivial: Vec<bool>,
}

impl InvariantVector {
    pub fn class(&self) -> &BlurClass {
        &self.class
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn max_order(&self) -> u32 {
        self.max_order
    }

    pub fn ref_length(&self) -> f64 {
        self.ref_length
    }

    /// Zeroth moment of the source image (in reference-length units).
    pub fn m00(&self) -> f64 {
        self.m00
    }

    /// Coefficient at the given index; panics if `p + q` exceeds the order.
    pub fn get(&self, idx: MultiIndex) -> Complex64 {
        assert!(idx.order() <= self.max_order, "index beyond stored order");
        self.values[tri_index(idx.p, idx.q)]
    }

    /// True when the entry is structurally forced rather than informative.
    pub fn is_trivial(&self, idx: MultiIndex) -> bool {
        assert!(idx.order() <= self.max_order, "index beyond stored order");
        self.trivial[tri_index(idx.p, idx.q)]
    }

    /// All entries in increasing `(order, q)` order.
    pub fn iter(&self) -> impl Iterator<Item = (MultiIndex, Complex64)> + '_ {
        MultiIndex::up_to(self.max_order).map(|idx| (idx, self.values[tri_index(idx.p, idx.q)]))
    }

    /// Largest coefficient magnitude, useful as a relative scale.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn to_json(&self) -> String {
        let entries = self
            .iter()
            .map(|(idx, v)| InvariantEntryJson {
                p: idx.p,
                q: idx.q,
                re: v.re,
                im: v.im,
                trivial: self.is_trivial(idx),
            })
            .collect();
        serde_json::to_string_pretty(&InvariantVectorJson {
            class: self.class.to_string(),
            basis: self.basis,
            r: self.max_order,
            ref_length: self.ref_length,
            m00: self.m00,
            entries,
        })
        .expect("plain data serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: InvariantVectorJson =
            serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        let class: BlurClass = raw.class.parse()?;
        let len = MultiIndex::up_to(raw.r).count();
        if raw.entries.len() != len {
            return Err(Error::Format(format!(
                "expected {len} entries for order {}, found {}",
                raw.r,
                raw.entries.len()
            )));
        }
        let mut values = vec![Complex64::ZERO; len];
        let mut trivial = vec![false; len];
        for e in &raw.entries {
            if e.p + e.q > raw.r {
                return Err(Error::Format(format!("entry ({},{}) beyond order {}", e.p, e.q, raw.r)));
            }
            values[tri_index(e.p, e.q)] = Complex64::new(e.re, e.im);
            trivial[tri_index(e.p, e.q)] = e.trivial;
        }
        Ok(InvariantVector {
            class,
            basis: raw.basis,
            max_order: raw.r,
            ref_length: raw.ref_length,
            m00: raw.m00,
            values,
            trivial,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct InvariantVectorJson {
    class: String,
    basis: Basis,
    r: u32,
    #[serde(rename = "L")]
    ref_length: f64,
    m00: f64,
    entries: Vec<InvariantEntryJson>,
}

#[derive(Serialize, Deserialize)]
struct InvariantEntryJson {
    p: u32,
    q: u32,
    re: f64,
    im: f64,
    trivial: bool,
}

/// Moments of `f` in the basis a class works in, honoring a rotated frame.
pub(crate) fn class_moments(
    f: &Image,
    basis: Basis,
    frame_rotation: f64,
    r: u32,
    ref_length: f64,
) -> Result<MomentTable> {
    match basis {
        Basis::Geometric if frame_rotation != 0.0 => {
            rotated_geometric_moments(f, r, ref_length, frame_rotation)
        }
        Basis::Geometric => geometric_moments(f, r, ref_length),
        Basis::Complex => complex_moments(f, r, ref_length),
    }
}

/// Computes the blur-invariant coefficients of `f` for the given class, up
/// to total order `r`, with coordinates measured in units of `ref_length`.
///
/// Separating classes never touch pixels beyond the moment pass; the
/// dihedral and Gaussian classes additionally evaluate their projection
/// (numerically, or through the closed-form Gaussian moment generator).
pub fn moment_invariants(
    f: &Image,
    class: &BlurClass,
    r: u32,
    ref_length: f64,
) -> Result<InvariantVector> {
    let l1: f64 = f.samples().iter().map(|v| v.abs()).sum();
    if f.mass().abs() <= 1e-9 * l1.max(f64::MIN_POSITIVE) {
        return Err(Error::VanishingMass);
    }

    match class.separating_basis() {
        Some(basis) => {
            let set = index_set(class, basis)?;
            let m = class_moments(f, basis, set.frame_rotation(), r, ref_length)?;
            let values = run_recurrence(&m, &m, |k| set.contains(k), r);
            let trivial = MultiIndex::up_to(r).map(|idx| set.contains(idx)).collect();
            Ok(InvariantVector {
                class: class.clone(),
                basis,
                max_order: r,
                ref_length,
                m00: m.get(MultiIndex::new(0, 0)).re,
                values,
                trivial,
            })
        }
        None => {
            let basis = Basis::Geometric;
            let m = geometric_moments(f, r, ref_length)?;
            let reference = match class {
                BlurClass::Gaussian => {
                    let pix = geometric_moments(f, 2, 1.0)?;
                    let g = |p, q| pix.get(MultiIndex::new(p, q)).re;
                    let mass = g(0, 0);
                    let (cx, cy) = (g(1, 0) / mass, g(0, 1) / mass);
                    let sxx = g(2, 0) / mass - cx * cx;
                    let sxy = g(1, 1) / mass - cx * cy;
                    let syy = g(0, 2) / mass - cy * cy;
                    gaussian_moments(mass, (cx, cy), [[sxx, sxy], [sxy, syy]], r, ref_length)?
                }
                _ => geometric_moments(&project(f, class)?, r, ref_length)?,
            };
            let values = run_recurrence(&m, &reference, |_| true, r);
            let trivial = MultiIndex::up_to(r).map(|idx| idx.order() == 0).collect();
            Ok(InvariantVector {
                class: class.clone(),
                basis,
                max_order: r,
                ref_length,
                m00: m.get(MultiIndex::new(0, 0)).re,
                values,
                trivial,
            })
        }
    }
}

/// Assembles the invariant vector of a window from its geometric moment
/// table alone, without revisiting pixels.
///
/// The sliding-window matcher measures window moments incrementally and
/// cannot afford a per-window pixel pass, so everything downstream of the
/// moments must be a function of the table. That holds for every class
/// except the dihedral family: basis changes and frame rotations are exact
/// linear maps on a moment table, and the Gaussian reference is generated
/// from the order-two moments. Dihedral projections average rotated copies
/// of the actual pixels and are rejected here; callers fall back to
/// cropping.
///
/// The caller is responsible for the vanishing-mass guard, since the L1
/// norm it needs is not derivable from signed moments.
pub(crate) fn invariants_from_geometric(
    geo: &MomentTable,
    class: &BlurClass,
) -> Result<InvariantVector> {
    debug_assert_eq!(geo.basis(), Basis::Geometric);
    let r = geo.max_order();
    let ref_length = geo.ref_length();
    let m00 = geo.get(MultiIndex::new(0, 0)).re;
    match class.separating_basis() {
        Some(basis) => {
            let set = index_set(class, basis)?;
            let m = match basis {
                Basis::Geometric if set.frame_rotation() != 0.0 => {
                    rotate_frame(geo, set.frame_rotation())?
                }
                Basis::Geometric => geo.clone(),
                Basis::Complex => transition(geo, Basis::Complex)?,
            };
            let values = run_recurrence(&m, &m, |k| set.contains(k), r);
            let trivial = MultiIndex::up_to(r).map(|idx| set.contains(idx)).collect();
            Ok(InvariantVector {
                class: class.clone(),
                basis,
                max_order: r,
                ref_length,
                m00,
                values,
                trivial,
            })
        }
        None if matches!(class, BlurClass::Gaussian) => {
            if r < 2 {
                return Err(Error::InvalidParam(
                    "the gaussian reference needs moments up to order 2".into(),
                ));
            }
            // Mass, centroid and covariance in pixel units, undoing the
            // reference-length scaling entry by entry.
            let g = |p, q| geo.get(MultiIndex::new(p, q)).re * ref_length.powi((p + q) as i32);
            let mass = g(0, 0);
            let (cx, cy) = (g(1, 0) / mass, g(0, 1) / mass);
            let sxx = g(2, 0) / mass - cx * cx;
            let sxy = g(1, 1) / mass - cx * cy;
            let syy = g(0, 2) / mass - cy * cy;
            let reference =
                gaussian_moments(mass, (cx, cy), [[sxx, sxy], [sxy, syy]], r, ref_length)?;
            let values = run_recurrence(geo, &reference, |_| true, r);
            let trivial = MultiIndex::up_to(r).map(|idx| idx.order() == 0).collect();
            Ok(InvariantVector {
                class: class.clone(),
                basis: Basis::Geometric,
                max_order: r,
                ref_length,
                m00,
                values,
                trivial,
            })
        }
        None => Err(Error::InvalidParam(format!(
            "class {class} projects actual pixels; its reference is not a function of moments"
        ))),
    }
}

/// Re-expresses a geometric moment table in axes rotated counterclockwise
/// by `beta`, matching [`rotated_geometric_moments`] up to round-off. The
/// frame rotation is diagonal in the complex basis: `c'_pq = e^{-i(p-q)b} c_pq`.
fn rotate_frame(geo: &MomentTable, beta: f64) -> Result<MomentTable> {
    let mut c = transition(geo, Basis::Complex)?;
    for idx in MultiIndex::up_to(c.max_order()) {
        let phase = Complex64::from_polar(1.0, -beta * (idx.p as f64 - idx.q as f64));
        c.set(idx, c.get(idx) * phase);
    }
    transition(&c, Basis::Geometric)
}

/// The deconvolution recurrence itself. `reference` supplies the moments
/// that multiply earlier coefficients (the image's own for separating
/// classes, the projection's otherwise); `in_sum` gates which indices
/// participate.
fn run_recurrence(
    m: &MomentTable,
    reference: &MomentTable,
    in_sum: impl Fn(MultiIndex) -> bool,
    r: u32,
) -> Vec<Complex64> {
    let m00 = reference.get(MultiIndex::new(0, 0));
    let mut values = vec![Complex64::ZERO; MultiIndex::up_to(r).count()];
    for idx in MultiIndex::up_to(r) {
        let mut acc = m.get(idx);
        for k in MultiIndex::up_to(idx.order()) {
            if k.order() == 0 || !idx.contains(k) || !in_sum(k) {
                continue;
            }
            let prev = values[tri_index(idx.p - k.p, idx.q - k.q)];
            acc -= idx.binomial(k) * reference.get(k) * prev;
        }
        values[tri_index(idx.p, idx.q)] = acc / m00;
    }
    values
}

/// Geometric moments of the surface `a * G(centroid, sigma)` about the
/// session origin, up to total order `r`. `centroid` and `sigma` are in
/// grid units; the table is scaled by `ref_length` exactly like moments
/// measured from pixels.
///
/// Central moments follow the two-term Gaussian recursion
/// `mu_{p,q} = (p-1)*sxx*mu_{p-2,q} + q*sxy*mu_{p-1,q-1}`, then shift to
/// the centroid by binomial expansion.
pub fn gaussian_moments(
    a: f64,
    centroid: (f64, f64),
    sigma: [[f64; 2]; 2],
    r: u32,
    ref_length: f64,
) -> Result<MomentTable> {
    let (sxx, sxy, syx, syy) = (sigma[0][0], sigma[0][1], sigma[1][0], sigma[1][1]);
    if (sxy - syx).abs() > 1e-12 * (sxx.abs() + syy.abs()).max(f64::MIN_POSITIVE) {
        return Err(Error::NonPositiveDefinite);
    }
    if !(sxx > 0.0 && syy > 0.0 && sxx * syy - sxy * sxy > 0.0) {
        return Err(Error::NonPositiveDefinite);
    }
    if !(ref_length > 0.0) || !ref_length.is_finite() {
        return Err(Error::InvalidParam("reference length must be positive".into()));
    }

    let len = MultiIndex::up_to(r).count();
    let mut central = vec![0.0f64; len];
    for idx in MultiIndex::up_to(r) {
        let (p, q) = (idx.p, idx.q);
        let value = if p + q == 0 {
            1.0
        } else if p >= 1 {
            let a1 = if p >= 2 { (p - 1) as f64 * sxx * central[tri_index(p - 2, q)] } else { 0.0 };
            let a2 = if q >= 1 { q as f64 * sxy * central[tri_index(p - 1, q - 1)] } else { 0.0 };
            a1 + a2
        } else {
            // p = 0, q >= 1: same recursion along the second coordinate.
            if q >= 2 {
                (q - 1) as f64 * syy * central[tri_index(0, q - 2)]
            } else {
                0.0
            }
        };
        central[tri_index(p, q)] = value;
    }

    let (cx, cy) = centroid;
    let mut table = MomentTable::empty(Basis::Geometric, r, ref_length, (0.0, 0.0));
    for idx in MultiIndex::up_to(r) {
        let mut acc = 0.0;
        for k in MultiIndex::up_to(idx.order()) {
            if !idx.contains(k) {
                continue;
            }
            acc += idx.binomial(k)
                * central[tri_index(k.p, k.q)]
                * cx.powi((idx.p - k.p) as i32)
                * cy.powi((idx.q - k.q) as i32);
        }
        let scaled = a * acc / ref_length.powi(idx.order() as i32);
        table.set(idx, Complex64::new(scaled, 0.0));
    }
    Ok(table)
}

pub(crate) fn check_comparable(a: &InvariantVector, b: &InvariantVector) -> Result<()> {
    if a.class != b.class
        || a.basis != b.basis
        || a.max_order != b.max_order
        || a.ref_length != b.ref_length
    {
        return Err(Error::MismatchedConfig(format!(
            "({}, {:?}, r={}, L={}) vs ({}, {:?}, r={}, L={})",
            a.class, a.basis, a.max_order, a.ref_length, b.class, b.basis, b.max_order,
            b.ref_length
        )));
    }
    Ok(())
}

/// Weighted Euclidean distance over the informative (non-forced) entries,
/// with the default damping `w_p = 1/order(p)!` that counters the factorial
/// growth of high-order coefficients.
pub fn invariant_distance(a: &InvariantVector, b: &InvariantVector) -> Result<f64> {
    invariant_distance_weighted(a, b, |idx| 1.0 / factorial(idx.order()))
}

/// Same as [`invariant_distance`] with caller-chosen per-index weights.
pub fn invariant_distance_weighted(
    a: &InvariantVector,
    b: &InvariantVector,
    weight: impl Fn(MultiIndex) -> f64,
) -> Result<f64> {
    check_comparable(a, b)?;
    let mut acc = 0.0;
    for (idx, va) in a.iter() {
        if a.is_trivial(idx) {
            continue;
        }
        acc += weight(idx) * (va - b.get(idx)).norm_sqr();
    }
    Ok(acc.sqrt())
}

pub(crate) fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::convolve_full;
    use crate::psf::{psf_polygon, psf_random_centrosymmetric};
    use crate::synth::{random_centrosymmetric, random_image};

    const ORDER: u32 = 5;
    const REF_LEN: f64 = 8.0;

    #[test]
    fn zeroth_coefficient_is_one_and_forced_entries_vanish() {
        let f = random_image(9, 9, 50);
        for class in [
            BlurClass::Centrosymmetric,
            BlurClass::NFold(3),
            BlurClass::Radial,
            BlurClass::Directional(0.0),
        ] {
            let inv = moment_invariants(&f, &class, ORDER, REF_LEN).unwrap();
            assert_eq!(inv.get(MultiIndex::new(0, 0)), Complex64::ONE, "{class}");
            assert!(inv.is_trivial(MultiIndex::new(0, 0)));
            let scale = inv.max_abs();
            for (idx, v) in inv.iter() {
                if inv.is_trivial(idx) {
                    assert!(v.norm() <= 1e-10 * scale.max(1.0) || idx.order() == 0, "{class} {idx:?}");
                }
            }
        }
    }

    #[test]
    fn members_of_the_class_have_all_zero_coefficients() {
        // A centrosymmetric image is its own blur kernel: its primordial
        // image is the impulse, so every coefficient beyond C_00 vanishes.
        let f = random_centrosymmetric(4, 51);
        let inv = moment_invariants(&f, &BlurClass::Centrosymmetric, 7, REF_LEN).unwrap();
        for (idx, v) in inv.iter() {
            if idx.order() > 0 {
                assert!(v.norm() <= 1e-12, "({},{}) = {v}", idx.p, idx.q);
            }
        }
    }

    #[test]
    fn delta_class_reproduces_normalized_moments() {
        let f = random_image(7, 7, 52);
        let inv = moment_invariants(&f, &BlurClass::TrivialDelta, ORDER, REF_LEN).unwrap();
        let m = geometric_moments(&f, ORDER, REF_LEN).unwrap();
        let m00 = m.get(MultiIndex::new(0, 0));
        for (idx, v) in inv.iter() {
            assert!((v - m.get(idx) / m00).norm() <= 1e-14 * m.max_abs());
        }
    }

    #[test]
    fn identity_class_flags_everything_trivial_and_zero() {
        let f = random_image(7, 7, 53);
        let inv = moment_invariants(&f, &BlurClass::TrivialIdentity, ORDER, REF_LEN).unwrap();
        for (idx, v) in inv.iter() {
            assert!(inv.is_trivial(idx));
            let expect = if idx.order() == 0 { Complex64::ONE } else { Complex64::ZERO };
            assert!((v - expect).norm() <= 1e-12);
        }
    }

    #[test]
    fn coefficients_survive_in_class_blur() {
        let f = random_image(12, 12, 54);

        let h = psf_random_centrosymmetric(3, 55).unwrap();
        let g = convolve_full(&f, h.image()).unwrap();
        let a = moment_invariants(&f, &BlurClass::Centrosymmetric, ORDER, REF_LEN).unwrap();
        let b = moment_invariants(&g, &BlurClass::Centrosymmetric, ORDER, REF_LEN).unwrap();
        let scale = a.max_abs();
        for (idx, va) in a.iter() {
            assert!((va - b.get(idx)).norm() <= 1e-10 * scale, "({},{})", idx.p, idx.q);
        }

        let h = psf_polygon(4, 3.3, 0.0).unwrap();
        let g = convolve_full(&f, h.image()).unwrap();
        let a = moment_invariants(&f, &BlurClass::NFold(4), ORDER, REF_LEN).unwrap();
        let b = moment_invariants(&g, &BlurClass::NFold(4), ORDER, REF_LEN).unwrap();
        let scale = a.max_abs();
        for (idx, va) in a.iter() {
            assert!((va - b.get(idx)).norm() <= 1e-10 * scale, "({},{})", idx.p, idx.q);
        }
    }

    #[test]
    fn complex_basis_coefficients_come_in_conjugate_pairs() {
        let f = random_image(10, 10, 56);
        let inv = moment_invariants(&f, &BlurClass::NFold(3), ORDER, REF_LEN).unwrap();
        for (idx, v) in inv.iter() {
            let swapped = inv.get(MultiIndex::new(idx.q, idx.p));
            assert!((v - swapped.conj()).norm() <= 1e-12 * inv.max_abs());
        }
    }

    #[test]
    fn gaussian_moment_generator_matches_known_values() {
        let s2 = 1.7f64;
        let t = gaussian_moments(1.0, (0.0, 0.0), [[s2, 0.0], [0.0, s2]], 4, 1.0).unwrap();
        let g = |p, q| t.get(MultiIndex::new(p, q)).re;
        assert!((g(0, 0) - 1.0).abs() <= 1e-15);
        assert!((g(2, 0) - s2).abs() <= 1e-14);
        assert!(g(1, 1).abs() <= 1e-15);
        assert!((g(4, 0) - 3.0 * s2 * s2).abs() <= 1e-13);
        assert!((g(2, 2) - s2 * s2).abs() <= 1e-13);
        // Odd orders vanish for a centered surface.
        for (idx, v) in t.iter() {
            if idx.order() % 2 == 1 {
                assert!(v.norm() <= 1e-15, "({},{})", idx.p, idx.q);
            }
        }
    }

    #[test]
    fn gaussian_moment_generator_matches_rasterized_surface() {
        // Correlated covariance, generic centroid, canvas padded past 8 sigma.
        let (sx, sy, rho) = (1.9f64, 1.4f64, 0.3f64);
        let sigma = [[sx * sx, rho * sx * sy], [rho * sx * sy, sy * sy]];
        let closed = gaussian_moments(2.5, (0.6, -0.4), sigma, 6, 1.0).unwrap();

        let n = 41; // center 20, margin 20 > 8 * 1.9
        let mut img = Image::zeros(n, n);
        let det = sigma[0][0] * sigma[1][1] - sigma[0][1] * sigma[0][1];
        let norm = 2.5 / (2.0 * std::f64::consts::PI * det.sqrt());
        let (ixx, ixy, iyy) = (sigma[1][1] / det, -sigma[0][1] / det, sigma[0][0] / det);
        for iy in 0..n {
            for ix in 0..n {
                let dx = img.x_of(ix) - 0.6;
                let dy = img.y_of(iy) + 0.4;
                let q = ixx * dx * dx + 2.0 * ixy * dx * dy + iyy * dy * dy;
                img.set(ix, iy, norm * (-0.5 * q).exp());
            }
        }
        let sampled = geometric_moments(&img, 6, 1.0).unwrap();
        for (idx, v) in closed.iter() {
            let s = sampled.get(idx);
            assert!(
                (v - s).norm() <= 1e-6 * closed.max_abs(),
                "({},{}): closed {v}, sampled {s}",
                idx.p,
                idx.q
            );
        }
    }

    #[test]
    fn gaussian_moment_generator_rejects_bad_covariance() {
        assert!(matches!(
            gaussian_moments(1.0, (0.0, 0.0), [[1.0, 2.0], [2.0, 1.0]], 4, 1.0),
            Err(Error::NonPositiveDefinite)
        ));
        assert!(matches!(
            gaussian_moments(1.0, (0.0, 0.0), [[0.0, 0.0], [0.0, 1.0]], 4, 1.0),
            Err(Error::NonPositiveDefinite)
        ));
    }

    #[test]
    fn generic_path_agrees_between_numeric_and_closed_form_gaussian() {
        // A rasterized Gaussian is (nearly) a fixed point of the Gaussian
        // projector, so its generic-path coefficients collapse to C_00 = 1
        // and noise-level residue elsewhere.
        let t = gaussian_moments(1.0, (0.0, 0.0), [[2.1, 0.4], [0.4, 1.6]], 2, 1.0).unwrap();
        let g = |p, q| t.get(MultiIndex::new(p, q)).re;
        let n = 41;
        let mut img = Image::zeros(n, n);
        let det: f64 = 2.1 * 1.6 - 0.4 * 0.4;
        let (ixx, ixy, iyy) = (1.6 / det, -0.4 / det, 2.1 / det);
        let norm = g(0, 0) / (2.0 * std::f64::consts::PI * det.sqrt());
        for iy in 0..n {
            for ix in 0..n {
                let (dx, dy) = (img.x_of(ix), img.y_of(iy));
                let q = ixx * dx * dx + 2.0 * ixy * dx * dy + iyy * dy * dy;
                img.set(ix, iy, norm * (-0.5 * q).exp());
            }
        }
        let inv = moment_invariants(&img, &BlurClass::Gaussian, 5, REF_LEN).unwrap();
        for (idx, v) in inv.iter() {
            if idx.order() > 0 {
                assert!(v.norm() <= 1e-9, "({},{}) = {v}", idx.p, idx.q);
            }
        }
    }

    #[test]
    fn distances_are_metric_like_and_guard_configuration() {
        let a = moment_invariants(&random_image(9, 9, 57), &BlurClass::Centrosymmetric, ORDER, REF_LEN)
            .unwrap();
        let b = moment_invariants(&random_image(9, 9, 58), &BlurClass::Centrosymmetric, ORDER, REF_LEN)
            .unwrap();
        assert_eq!(invariant_distance(&a, &a).unwrap(), 0.0);
        let d_ab = invariant_distance(&a, &b).unwrap();
        let d_ba = invariant_distance(&b, &a).unwrap();
        assert!(d_ab > 0.0);
        assert!((d_ab - d_ba).abs() <= 1e-15 * d_ab);

        let c = moment_invariants(&random_image(9, 9, 57), &BlurClass::Centrosymmetric, ORDER, 9.0)
            .unwrap();
        assert!(matches!(invariant_distance(&a, &c), Err(Error::MismatchedConfig(_))));
    }

    #[test]
    fn vanishing_mass_is_rejected() {
        let mut img = Image::zeros(5, 5);
        img.set(1, 1, 1.0);
        img.set(3, 3, -1.0);
        assert!(matches!(
            moment_invariants(&img, &BlurClass::Centrosymmetric, 3, 1.0),
            Err(Error::VanishingMass)
        ));
    }

    #[test]
    fn json_round_trip_preserves_everything() {
        let inv =
            moment_invariants(&random_image(8, 8, 59), &BlurClass::NFold(3), ORDER, REF_LEN).unwrap();
        let back = InvariantVector::from_json(&inv.to_json()).unwrap();
        assert_eq!(back.class(), inv.class());
        assert_eq!(back.basis(), inv.basis());
        assert_eq!(back.max_order(), inv.max_order());
        assert_eq!(back.ref_length(), inv.ref_length());
        assert_eq!(back.m00(), inv.m00());
        for (idx, v) in inv.iter() {
            assert_eq!(back.get(idx), v);
            assert_eq!(back.is_trivial(idx), inv.is_trivial(idx));
        }
    }
}
