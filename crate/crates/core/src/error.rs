//! Error type shared by all core modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid state space: {0}")]
    InvalidSpace(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("measures live on different state spaces")]
    SpaceMismatch,

    #[error("normalization diverged: {0}")]
    NormalizationDiverged(String),

    #[error("empty configuration")]
    EmptyConfiguration,

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("kernel of order {expected} applied to {got} points")]
    ArityMismatch { expected: usize, got: usize },

    #[error("no truncation level up to 2^60 certifies the bound (budget {budget}, m={m})")]
    BudgetExhausted { m: u32, budget: usize },

    #[error("need at least {needed} particles, got {got}")]
    TooFewParticles { needed: usize, got: usize },

    #[error("index {index} out of range for {len} particles")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("replica {index} has length {got}, expected {expected}")]
    ReplicaLengthMismatch {
        index: usize,
        expected: usize,
        got: usize,
    },

    #[error("instance too large to enumerate exactly ({0})")]
    TooLargeToEnumerate(String),

    #[error("family `{0}` has no analytic gradient")]
    NonDifferentiableFamily(String),

    #[error("configuration touches the singular set of `{0}`")]
    SingularConfiguration(String),

    #[error("no finite-energy starting point found after {attempts} draws")]
    NoFiniteStartingPoint { attempts: usize },

    #[error("trajectory diverged at step {step} (|x| = {magnitude:.3e}); try a smaller time step")]
    Diverged { step: usize, magnitude: f64 },

    #[error("singular interaction family `{0}` rejected for Langevin integration (set force_singular to override)")]
    SingularFamilyGuard(String),

    #[error("operation requires a euclidean space of dimension {0}")]
    DimensionMismatch(usize),

    #[error("support of size {got} exceeds the exact-solver cap {cap}")]
    SupportTooLarge { got: usize, cap: usize },

    #[error("search spec not supported for this model: {0}")]
    SearchSpaceUnsupported(String),

    #[error("operation requires smooth built-in families: {0}")]
    RequiresSmoothFamily(String),

    #[error("event matches no type class")]
    EventEmpty,
}

pub type Result<T> = std::result::Result<T, Error>;
