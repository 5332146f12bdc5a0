use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Error, Debug)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("format error: {0}")]
    Format(String),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("image size overflow: {0}x{1}")]
    SizeOverflow(usize, usize),
    #[error("constant image has zero variance; SNR is undefined")]
    ConstantImage,
    #[error("zeroth moment vanishes; the shifted-index recurrence fallback is not implemented")]
    VanishingMass,
    #[error("projection vanishes; the invariant spectrum is undefined for images in the complement space")]
    VanishingProjection,
    #[error("sample covariance is not positive definite")]
    NonPositiveDefinite,
    #[error("mismatched configuration: {0}")]
    MismatchedConfig(String),
    #[error("empty frequency mask; no overlap between valid spectra")]
    EmptyMask,
    #[error("gallery is empty")]
    EmptyGallery,
    #[error("template ({0}x{1}) does not fit in scene ({2}x{3})")]
    TemplateTooLarge(usize, usize, usize, usize),
    #[error("class {0} has no separating basis; use the generic projected-moment path")]
    NoSeparatingBasis(String),
}

impl Error {
    /// Coarse classification used to map failures onto process exit codes:
    /// data errors cover malformed or unreadable inputs, numerical errors
    /// cover degeneracies discovered during computation.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. } | Error::Format(_) => ErrorKind::Data,
            Error::InvalidParam(_)
            | Error::MismatchedConfig(_)
            | Error::TemplateTooLarge(..)
            | Error::EmptyGallery
            | Error::NoSeparatingBasis(_) => ErrorKind::Usage,
            Error::SizeOverflow(..)
            | Error::ConstantImage
            | Error::VanishingMass
            | Error::VanishingProjection
            | Error::NonPositiveDefinite
            | Error::EmptyMask => ErrorKind::Numerical,
        }
    }
}

/// Broad failure category, one per process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numerical,
}

pub type Result<T> = std::result::Result<T, Error>;
