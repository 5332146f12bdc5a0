//! Geometric and complex image moments with explicit normalization.
//!
//! Moments are accumulated over the pixel point masses in continuous
//! coordinates divided by a reference length `L`. Keeping `L` constant across
//! a session bounds high-order moments and makes tables of different images
//! directly comparable. Accumulation is compensated (Kahan) so that order-7
//! moments of large canvases keep full double precision.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

/// Compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    #[inline]
    pub fn add(&mut self, value: f64) {
        let y = value - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Compensated sum of an iterator.
pub fn kahan_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = Kahan::default();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// Exact binomial coefficient as f64 (exact for the orders used here).
pub fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

/// 2-D moment multi-index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex {
    pub p: u32,
    pub q: u32,
}

impl MultiIndex {
    pub fn new(p: u32, q: u32) -> Self {
        Self { p, q }
    }

    pub fn order(&self) -> u32 {
        self.p + self.q
    }

    /// Componentwise partial order: true when `other` can be subtracted.
    pub fn contains(&self, other: MultiIndex) -> bool {
        other.p <= self.p && other.q <= self.q
    }

    pub fn minus(&self, other: MultiIndex) -> MultiIndex {
        MultiIndex::new(self.p - other.p, self.q - other.q)
    }

    /// Product of the componentwise binomial coefficients.
    pub fn binomial(&self, k: MultiIndex) -> f64 {
        binomial(self.p, k.p) * binomial(self.q, k.q)
    }

    /// All indices with order at most `r`, ascending by (order, q).
    pub fn up_to(r: u32) -> impl Iterator<Item = MultiIndex> {
        (0..=r).flat_map(move |n| (0..=n).map(move |q| MultiIndex::new(n - q, q)))
    }
}

/// Polynomial basis of a moment table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    /// Powers `x^p y^q`.
    Geometric,
    /// Powers `(x+iy)^p (x-iy)^q`.
    Complex,
}

/// Complete table of moments up to a maximum order.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTable {
    basis: Basis,
    max_order: u32,
    ref_length: f64,
    origin: (f64, f64),
    values: Vec<Complex64>,
}

pub(crate) fn tri_index(p: u32, q: u32) -> usize {
    let n = (p + q) as usize;
    n * (n + 1) / 2 + q as usize
}

fn tri_len(r: u32) -> usize {
    let r = r as usize;
    (r + 1) * (r + 2) / 2
}

impl MomentTable {
    /// Zero-filled table.
    pub fn empty(basis: Basis, max_order: u32, ref_length: f64, origin: (f64, f64)) -> Self {
        Self {
            basis,
            max_order,
            ref_length,
            origin,
            values: vec![Complex64::new(0.0, 0.0); tri_len(max_order)],
        }
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

    pub fn origin(&self) -> (f64, f64) {
        self.origin
    }

    #[inline]
    pub fn get(&self, idx: MultiIndex) -> Complex64 {
        debug_assert!(idx.order() <= self.max_order);
        self.values[tri_index(idx.p, idx.q)]
    }

    #[inline]
    pub fn set(&mut self, idx: MultiIndex, value: Complex64) {
        debug_assert!(idx.order() <= self.max_order);
        self.values[tri_index(idx.p, idx.q)] = value;
    }

    /// Entries in ascending (order, q) order.
    pub fn iter(&self) -> impl Iterator<Item = (MultiIndex, Complex64)> + '_ {
        MultiIndex::up_to(self.max_order).map(|idx| (idx, self.get(idx)))
    }

    /// Largest entry magnitude; useful as a scale for tolerant comparisons.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> String {
        let entries = self
            .iter()
            .map(|(idx, v)| MomentEntryJson { p: idx.p, q: idx.q, re: v.re, im: v.im })
            .collect();
        serde_json::to_string_pretty(&MomentTableJson {
            basis: self.basis,
            r: self.max_order,
            l: self.ref_length,
            origin: self.origin,
            entries,
        })
        .expect("moment table serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: MomentTableJson =
            serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        let mut table = MomentTable::empty(raw.basis, raw.r, raw.l, raw.origin);
        for e in raw.entries {
            if e.p + e.q > raw.r {
                return Err(Error::Format(format!("entry ({},{}) exceeds order {}", e.p, e.q, raw.r)));
            }
            table.set(MultiIndex::new(e.p, e.q), Complex64::new(e.re, e.im));
        }
        Ok(table)
    }
}

#[derive(Serialize, Deserialize)]
struct MomentTableJson {
    basis: Basis,
    r: u32,
    #[serde(rename = "L")]
    l: f64,
    origin: (f64, f64),
    entries: Vec<MomentEntryJson>,
}

#[derive(Serialize, Deserialize)]
struct MomentEntryJson {
    p: u32,
    q: u32,
    re: f64,
    im: f64,
}

/// Geometric moments `m_pq = sum ((x-ox)/L)^p ((oy-y)/L)^q f` up to order `r`.
///
/// The y axis points up: row 0 carries the largest y coordinate.
pub fn geometric_moments(f: &Image, r: u32, ref_length: f64) -> Result<MomentTable> {
    check_params(r, ref_length)?;
    let (w, h) = (f.width(), f.height());
    let n = r as usize + 1;

    let mut xpow = vec![0.0f64; w * n];
    for ix in 0..w {
        let x = f.x_of(ix) / ref_length;
        let mut acc = 1.0;
        for p in 0..n {
            xpow[ix * n + p] = acc;
            acc *= x;
        }
    }

    // Row partial sums over x for each power p, then a compensated sweep
    // over rows for each (p, q).
    let mut rowsum = vec![0.0f64; h * n];
    for iy in 0..h {
        for p in 0..n {
            let mut acc = Kahan::default();
            for ix in 0..w {
                acc.add(xpow[ix * n + p] * f.get(ix, iy));
            }
            rowsum[iy * n + p] = acc.value();
        }
    }

    let mut ypow = vec![0.0f64; h * n];
    for iy in 0..h {
        let y = f.y_of(iy) / ref_length;
        let mut acc = 1.0;
        for q in 0..n {
            ypow[iy * n + q] = acc;
            acc *= y;
        }
    }

    let mut table = MomentTable::empty(Basis::Geometric, r, ref_length, f.origin());
    for idx in MultiIndex::up_to(r) {
        let mut acc = Kahan::default();
        for iy in 0..h {
            acc.add(ypow[iy * n + idx.q as usize] * rowsum[iy * n + idx.p as usize]);
        }
        table.set(idx, Complex64::new(acc.value(), 0.0));
    }
    Ok(table)
}

/// Geometric moments in axes rotated by `beta` (counterclockwise), i.e. of
/// the coordinates `x' = x cos b + y sin b`, `y' = -x sin b + y cos b`.
/// Rotating the frame in the accumulator is exact; no resampling is involved.
pub fn rotated_geometric_moments(
    f: &Image,
    r: u32,
    ref_length: f64,
    beta: f64,
) -> Result<MomentTable> {
    check_params(r, ref_length)?;
    let (cb, sb) = (beta.cos(), beta.sin());
    let n = r as usize + 1;
    let mut sums = vec![Kahan::default(); tri_len(r)];
    let mut xp = vec![0.0f64; n];
    let mut yp = vec![0.0f64; n];
    for iy in 0..f.height() {
        let y = f.y_of(iy) / ref_length;
        for ix in 0..f.width() {
            let v = f.get(ix, iy);
            if v == 0.0 {
                continue;
            }
            let x = f.x_of(ix) / ref_length;
            let xr = x * cb + y * sb;
            let yr = -x * sb + y * cb;
            let mut acc = 1.0;
            for p in 0..n {
                xp[p] = acc;
                acc *= xr;
            }
            acc = 1.0;
            for q in 0..n {
                yp[q] = acc;
                acc *= yr;
            }
            for idx in MultiIndex::up_to(r) {
                sums[tri_index(idx.p, idx.q)].add(xp[idx.p as usize] * yp[idx.q as usize] * v);
            }
        }
    }
    let mut table = MomentTable::empty(Basis::Geometric, r, ref_length, f.origin());
    for idx in MultiIndex::up_to(r) {
        table.set(idx, Complex64::new(sums[tri_index(idx.p, idx.q)].value(), 0.0));
    }
    Ok(table)
}

/// Complex moments `c_pq = sum ((x+iy)/L)^p ((x-iy)/L)^q f` up to order `r`.
pub fn complex_moments(f: &Image, r: u32, ref_length: f64) -> Result<MomentTable> {
    check_params(r, ref_length)?;
    let n = r as usize + 1;
    // One compensated accumulator pair (re, im) per entry.
    let mut sums = vec![(Kahan::default(), Kahan::default()); tri_len(r)];
    let mut zp = vec![Complex64::new(0.0, 0.0); n];
    let mut zbp = vec![Complex64::new(0.0, 0.0); n];
    for iy in 0..f.height() {
        let y = f.y_of(iy) / ref_length;
        for ix in 0..f.width() {
            let v = f.get(ix, iy);
            if v == 0.0 {
                continue;
            }
            let x = f.x_of(ix) / ref_length;
            let z = Complex64::new(x, y);
            let zb = z.conj();
            let mut acc = Complex64::new(1.0, 0.0);
            for p in 0..n {
                zp[p] = acc;
                acc *= z;
            }
            acc = Complex64::new(1.0, 0.0);
            for q in 0..n {
                zbp[q] = acc;
                acc *= zb;
            }
            for idx in MultiIndex::up_to(r) {
                let term = zp[idx.p as usize] * zbp[idx.q as usize] * v;
                let slot = &mut sums[tri_index(idx.p, idx.q)];
                slot.0.add(term.re);
                slot.1.add(term.im);
            }
        }
    }
    let mut table = MomentTable::empty(Basis::Complex, r, ref_length, f.origin());
    for idx in MultiIndex::up_to(r) {
        let slot = &sums[tri_index(idx.p, idx.q)];
        table.set(idx, Complex64::new(slot.0.value(), slot.1.value()));
    }
    Ok(table)
}

/// Exact linear change of basis via the binomial expansion of `(x +/- iy)^p`.
pub fn transition(table: &MomentTable, target: Basis) -> Result<MomentTable> {
    if table.basis() == target {
        return Ok(table.clone());
    }
    let r = table.max_order();
    let mut out = MomentTable::empty(target, r, table.ref_length(), table.origin());
    match (table.basis(), target) {
        (Basis::Geometric, Basis::Complex) => {
            // (x+iy)^p (x-iy)^q expanded in monomials.
            for idx in MultiIndex::up_to(r) {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..=idx.p {
                    for k in 0..=idx.q {
                        let coeff = binomial(idx.p, j)
                            * binomial(idx.q, k)
                            * i_power(idx.p - j)
                            * neg_i_power(idx.q - k);
                        let m = table.get(MultiIndex::new(j + k, idx.order() - j - k));
                        acc += coeff * m;
                    }
                }
                out.set(idx, acc);
            }
        }
        (Basis::Complex, Basis::Geometric) => {
            // x = (z + zbar)/2, y = (z - zbar)/(2i).
            for idx in MultiIndex::up_to(r) {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..=idx.p {
                    for k in 0..=idx.q {
                        let sign = if (idx.q - k) % 2 == 0 { 1.0 } else { -1.0 };
                        let coeff = binomial(idx.p, j) * binomial(idx.q, k) * sign;
                        let c = table.get(MultiIndex::new(j + k, idx.order() - j - k));
                        acc += coeff * c;
                    }
                }
                let scale = 2f64.powi(idx.order() as i32);
                out.set(idx, acc / (scale * i_power(idx.q)));
            }
        }
        _ => unreachable!("identical bases handled above"),
    }
    Ok(out)
}

fn i_power(n: u32) -> Complex64 {
    match n % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

fn neg_i_power(n: u32) -> Complex64 {
    i_power(n).conj()
}

fn check_params(_r: u32, ref_length: f64) -> Result<()> {
    if !(ref_length > 0.0) || !ref_length.is_finite() {
        return Err(Error::InvalidParam("reference length must be positive".into()));
    }
    Ok(())
}
