use num_complex::Complex64;
use thiserror::Error;

/// Which singularity of `γ_a` an evaluation hit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pole {
    Zero,
    One,
    Base,
}

impl std::fmt::Display for Pole {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Pole::Zero => write!(f, "0"),
            Pole::One => write!(f, "1"),
            Pole::Base => write!(f, "a"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid map: {0}")]
    InvalidMap(String),
    #[error("derivative order {0} not in 0..=2")]
    InvalidOrder(u8),
    #[error("non-finite value while evaluating {what} at {z}")]
    Range { what: &'static str, z: Complex64 },
    #[error("critical-point enumeration failed at radius {radius}: found {found}, winding count {expected}")]
    EnumerationFailure {
        radius: f64,
        found: usize,
        expected: i64,
    },
    #[error("critical point {c} is not simple: |f''(c)| = {f2_abs:e}")]
    NonSimpleCritical { c: Complex64, f2_abs: f64 },
    #[error("evaluation at the pole {pole} of γ_{a} (z = {z})")]
    PoleEvaluation { pole: Pole, a: Complex64, z: Complex64 },
    #[error("base {0} lies within tolerance of 0 or 1")]
    InvalidBase(Complex64),
    #[error("base {a} is within {dist:e} of the critical point {c}")]
    NearCritical { a: Complex64, c: Complex64, dist: f64 },
    #[error("image base {0} collides with the pole 0 or 1")]
    PoleCollision(Complex64),
    #[error("normalization failed: found {found} fixed point(s), need 2")]
    NormalizationFailure { found: usize },
    #[error("unsupported branch structure: {0}")]
    UnsupportedBranchStructure(String),
    #[error("{z} is within {dist:e} of the critical value {d}")]
    NearCriticalValue { z: Complex64, d: Complex64, dist: f64 },
    #[error("orbit degenerates at step {index}: {point} is near {kind}")]
    DegenerateOrbit {
        index: usize,
        point: Complex64,
        kind: &'static str,
    },
    #[error("linear system ill-conditioned: condition estimate {0:e}")]
    IllConditioned(f64),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
