use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("matrix is not unitary (residual {0:.3e})")]
    NotUnitary(f64),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("photon number mismatch: {input} in, {output} out")]
    PhotonNumber { input: usize, output: usize },
    #[error("{what}: {n} exceeds the supported maximum {max}")]
    TooLarge { what: &'static str, n: usize, max: usize },
    #[error("imaginary residue {0:.3e} exceeds tolerance")]
    ImaginaryResidue(f64),
    #[error("phase undefined: an overlap vanishes")]
    UndefinedPhase,
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("constraint violated: {0}")]
    Constraint(String),
    #[error("no unitary completion found (residual {0:.3e})")]
    Reconstruction(f64),
    #[error("fringe fit failed: {0}")]
    Fit(String),
    #[error("gap closed (min |q| = {0:.3e})")]
    GapClosed(f64),
    #[error("no bound mode: {0}")]
    NoMode(String),
    #[error("braid failed: mode fidelity {0:.3}")]
    BraidFailed(f64),
    #[error("optimization failed: {0}")]
    OptimizationFailed(String),
    #[error("probabilities not normalized (sum {0})")]
    NotNormalized(f64),
    #[error("integer rounding residue {0:.3e} too large")]
    NonInteger(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
