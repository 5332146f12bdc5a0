//! Blur-invariant image descriptors.
//!
//! Convolving an image with an unknown kernel destroys most pixel-level
//! information, but for many physically meaningful families of kernels
//! (symmetric out-of-focus spots, linear motion streaks, Gaussians, ...) a
//! complete set of quantities survives untouched. This crate computes those
//! quantities in two equivalent forms — moment-based descriptor vectors and
//! whitened Fourier spectra — and applies them to classification, template
//! matching and the registration of differently blurred frames.
//!
//! The descriptor construction is generic over the blur family: each
//! [`projectors::BlurClass`] supplies a linear projector onto its family and,
//! where one exists, a separating set of moment indices; everything else
//! (recurrences, spectra, distances) is shared.

pub mod error;
pub mod image;
pub mod invariants;
pub mod io;
pub mod matching;
pub mod moments;
pub mod projectors;
pub mod psf;
pub mod registration;
pub mod spectrum;
pub mod synth;
mod transform;

pub use error::{Error, ErrorKind, Result};
pub use image::{add_white_gaussian_noise, convolve_full, delta, Image};
pub use invariants::{
    gaussian_moments, invariant_distance, invariant_distance_weighted, moment_invariants,
    InvariantVector,
};
pub use io::{read_image, write_bif, write_image, write_pgm};
pub use matching::{classify_nn, match_template, Classification, Gallery, MatchHit};
pub use moments::{
    complex_moments, geometric_moments, rotated_geometric_moments, transition, Basis, MomentTable,
    MultiIndex,
};
pub use projectors::{index_set, project, verify_separation, BlurClass, IndexSet, SeparationReport};
pub use psf::{
    psf_disk, psf_gaussian, psf_motion, psf_polygon, psf_random_centrosymmetric, Psf,
};
pub use registration::{register_shift, register_shift_rotation, RegistrationResult};
pub use spectrum::{
    fourier_invariant, read_spectrum, spectrum_distance, write_spectrum, InvariantSpectrum,
};
pub use synth::{random_centrosymmetric, random_image, smooth_blobs};
