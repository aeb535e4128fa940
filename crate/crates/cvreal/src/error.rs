use thiserror::Error;

/// Failure modes shared across the analytic criteria and the Fock oracle.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CvError {
    /// A matrix inversion hit an eigenvalue below the singularity tolerance.
    #[error("singular matrix: eigenvalue {eigenvalue:.3e} has magnitude below {tolerance:.1e}")]
    SingularMatrix { eigenvalue: f64, tolerance: f64 },

    /// The state sits on a degenerate surface where the requested quantity diverges.
    #[error("degenerate state: {0}")]
    DegenerateState(String),

    /// An input fell outside the parameter domain.
    #[error("domain error: {0}")]
    DomainError(String),

    /// A derivative order exceeded the pairing-sum guard.
    #[error("derivative order {order} exceeds the pairing-sum guard {guard}")]
    OverflowGuard { order: u32, guard: u32 },

    /// A tensor or DP table would exceed the allocation guard.
    #[error("capacity {required} exceeds the guard {guard}")]
    CapacityExceeded { required: u64, guard: u64 },

    /// A truncated-Fock computation needs elements beyond the cutoff.
    #[error("cutoff {cutoff} too small: {reason}")]
    CutoffTooSmall { cutoff: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, CvError>;
