use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The G-function construction divides by β = √(g1 g2).
    #[error("G-function requires both couplings to be nonzero (g1 = {g1}, g2 = {g2})")]
    ZeroCoupling { g1: f64, g2: f64 },

    #[error("series did not converge at x = {x} after {terms} terms (tail {tail:e})")]
    NonConvergence { x: f64, terms: usize, tail: f64 },

    #[error("x = {x} lies within {distance:e} of the pole at {pole}")]
    PoleProximity { x: f64, pole: usize, distance: f64 },

    #[error("GRWA block m = {m} has negative discriminant {discriminant:e}")]
    ComplexBlock { m: usize, discriminant: f64 },

    #[error("truncated eigenproblem returned a complex eigenvalue (imaginary part {imag:e})")]
    NonRealSpectrum { imag: f64 },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NonSymmetricInput { asymmetry: f64 },

    #[error("eigenvector mixes parity sectors (purity {purity})")]
    DegenerateMix { purity: f64 },

    #[error("Fock cutoff cap {cap} reached with only {converged} of {requested} levels converged")]
    CutoffExceeded {
        cap: usize,
        converged: usize,
        requested: usize,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
