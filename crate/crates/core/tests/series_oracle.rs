//! Cross-checks the production deconvolution recurrence against an
//! independent oracle: formal long division of the two exponential
//! moment-generating series. The oracle normalizes moments to Taylor
//! coefficients `m_pq/(p! q!)`, divides the full bivariate series with a
//! plain Cauchy-product loop, and rescales — no shared code with the
//! recurrence beyond the moment tables themselves.

use num_complex::Complex64;

use blurinv::image::Image;
use blurinv::invariants::gaussian_moments;
use blurinv::moments::{
    complex_moments, geometric_moments, rotated_geometric_moments, Basis, MomentTable, MultiIndex,
};
use blurinv::projectors::{index_set, project, BlurClass};
use blurinv::synth::random_image;
use blurinv::{moment_invariants, InvariantVector};

fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Divides the series of `num` by the series of `den` and returns the
/// rescaled quotient coefficients, triangular in `(order, q)` order.
fn series_quotient(num: &MomentTable, den: &MomentTable, r: u32) -> Vec<(MultiIndex, Complex64)> {
    let taylor = |t: &MomentTable, idx: MultiIndex| {
        t.get(idx) / (factorial(idx.p) * factorial(idx.q))
    };
    let b00 = taylor(den, MultiIndex::new(0, 0));
    let mut quotient: Vec<(MultiIndex, Complex64)> = Vec::new();
    for idx in MultiIndex::up_to(r) {
        let mut acc = taylor(num, idx);
        for &(k, ck) in &quotient {
            let rest = MultiIndex::new(idx.p.wrapping_sub(k.p), idx.q.wrapping_sub(k.q));
            if !idx.contains(k) || (rest.p, rest.q) == (0, 0) {
                continue;
            }
            acc -= taylor(den, rest) * ck;
        }
        quotient.push((idx, acc / b00));
    }
    quotient
        .into_iter()
        .map(|(idx, c)| (idx, c * factorial(idx.p) * factorial(idx.q)))
        .collect()
}

/// Moments of `f` in the basis the class separates in.
fn moments_in_basis(f: &Image, class: &BlurClass, basis: Basis, r: u32, l: f64) -> MomentTable {
    match basis {
        Basis::Complex => complex_moments(f, r, l).unwrap(),
        Basis::Geometric => match class {
            BlurClass::Directional(beta) if *beta != 0.0 => {
                rotated_geometric_moments(f, r, l, *beta).unwrap()
            }
            _ => geometric_moments(f, r, l).unwrap(),
        },
    }
}

/// Reference series for the quotient: the image's own moments masked to the
/// separating set when one exists, otherwise the literal projected moments.
fn reference_series(f: &Image, class: &BlurClass, r: u32, l: f64) -> (Basis, MomentTable, MomentTable) {
    if let Some(basis) = class.separating_basis() {
        let set = index_set(class, basis).unwrap();
        let m = moments_in_basis(f, class, basis, r, l);
        let mut masked = MomentTable::empty(basis, r, l, m.origin());
        for (idx, v) in m.iter() {
            if set.contains(idx) {
                masked.set(idx, v);
            }
        }
        (basis, m, masked)
    } else {
        let m = geometric_moments(f, r, l).unwrap();
        let reference = match class {
            BlurClass::Gaussian => {
                let pix = geometric_moments(f, 2, 1.0).unwrap();
                let g = |p, q| pix.get(MultiIndex::new(p, q)).re;
                let mass = g(0, 0);
                let (cx, cy) = (g(1, 0) / mass, g(0, 1) / mass);
                let sigma = [
                    [g(2, 0) / mass - cx * cx, g(1, 1) / mass - cx * cy],
                    [g(1, 1) / mass - cx * cy, g(0, 2) / mass - cy * cy],
                ];
                gaussian_moments(mass, (cx, cy), sigma, r, l).unwrap()
            }
            _ => geometric_moments(&project(f, class).unwrap(), r, l).unwrap(),
        };
        (Basis::Geometric, m, reference)
    }
}

fn compare(inv: &InvariantVector, oracle: &[(MultiIndex, Complex64)], label: &str) {
    let scale = oracle.iter().fold(1.0f64, |m, (_, c)| m.max(c.norm()));
    for &(idx, expected) in oracle {
        let got = inv.get(idx);
        assert!(
            (got - expected).norm() <= 1e-10 * scale,
            "{label} ({},{}): recurrence {got}, oracle {expected}",
            idx.p,
            idx.q
        );
    }
}

#[test]
fn recurrence_matches_series_division_for_every_class() {
    let classes = [
        BlurClass::TrivialIdentity,
        BlurClass::TrivialDelta,
        BlurClass::Centrosymmetric,
        BlurClass::NFold(2),
        BlurClass::NFold(3),
        BlurClass::NFold(4),
        BlurClass::Radial,
        BlurClass::Directional(0.0),
        BlurClass::Directional(0.9),
        BlurClass::Dihedral(4, 0.0),
        BlurClass::Dihedral(3, 0.4),
        BlurClass::Gaussian,
    ];
    let (r, l) = (5, 4.0);
    for seed in [60u64, 61, 62] {
        let f = random_image(8, 8, seed);
        for class in &classes {
            let inv = moment_invariants(&f, class, r, l).unwrap();
            let (basis, num, den) = reference_series(&f, class, r, l);
            assert_eq!(inv.basis(), basis, "{class}");
            let oracle = series_quotient(&num, &den, r);
            compare(&inv, &oracle, &class.to_string());
        }
    }
}

#[test]
fn one_dimensional_class_matches_the_oracle_too() {
    let f = random_image(9, 1, 63);
    let inv = moment_invariants(&f, &BlurClass::Even1D, 5, 4.0).unwrap();
    let (_, num, den) = reference_series(&f, &BlurClass::Even1D, 5, 4.0);
    let oracle = series_quotient(&num, &den, 5);
    compare(&inv, &oracle, "even1d");
}
