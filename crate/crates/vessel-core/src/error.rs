//! Error type shared by every pipeline in the crate.

/// Errors produced by vessel construction and evaluation.
#[derive(Debug, thiserror::Error)]
pub enum VesselError {
    /// A measure failed validation (non-positive weight, bad density table, …).
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    /// An operation received an argument outside its domain.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A node index addressed a measure atom that does not exist.
    #[error("index {index} out of range for rank {len}")]
    IndexOutOfRange { index: usize, len: usize },

    /// The Gram matrix was numerically singular at the reported location
    /// (a tau-function zero crossing; possible only in the pre-vessel region).
    #[error("gram matrix numerically singular at {location} (|det| = {det:.3e})")]
    SingularGram { location: String, det: f64 },

    /// A resolvent evaluation was requested too close to the generator spectrum.
    #[error("lambda within {distance:.3e} of the generator spectrum (minimum 1e-8)")]
    SpectrumProximity { distance: f64 },

    /// The discretized integral operator failed its well-posedness check.
    #[error("integral system ill-conditioned: min singular value {sigma_min:.6} < 0.99")]
    IllConditioned { sigma_min: f64 },

    /// A perturbation measure failed the kernel-orthogonality test.
    #[error("perturbation not orthogonal: max kernel violation {max_violation:.3e}")]
    NotOrthogonal { max_violation: f64 },
}

pub type Result<T> = std::result::Result<T, VesselError>;
