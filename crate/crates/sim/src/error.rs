use cqi_core::chain::ChainError;
use cqi_core::contspace::ContError;
use cqi_core::epr::EprError;
use cqi_core::postulates::PostulateError;
use cqi_core::realism::RealismError;
use cqi_core::zeno::ZenoError;
use thiserror::Error;

/// Failure of a run, grouped by exit code.
#[derive(Debug, Error)]
pub enum SimError {
    /// Exit code 1.
    #[error("config error: {0}")]
    Config(String),
    /// Exit code 2.
    #[error("numerical validation failed: {0}")]
    Numerical(String),
    /// Exit code 3.
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl SimError {
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Config(_) => 1,
            SimError::Numerical(_) => 2,
            SimError::Internal(_) => 3,
        }
    }

    pub fn config(field: &str, e: impl std::fmt::Display) -> Self {
        SimError::Config(format!("{field}: {e}"))
    }
}

impl From<ContError> for SimError {
    fn from(e: ContError) -> Self {
        match e {
            ContError::NotConverged => SimError::Numerical(e.to_string()),
            _ => SimError::Config(e.to_string()),
        }
    }
}

impl From<PostulateError> for SimError {
    fn from(e: PostulateError) -> Self {
        use PostulateError as P;
        match e {
            P::Cont(c) => c.into(),
            P::Perturbativity { .. } | P::NotSeparated { .. } => SimError::Numerical(e.to_string()),
            P::SupportLeak | P::NotNormalized(_) | P::Hilbert(_) => SimError::Internal(e.to_string()),
            _ => SimError::Config(e.to_string()),
        }
    }
}

impl From<ChainError> for SimError {
    fn from(e: ChainError) -> Self {
        match e {
            ChainError::Hilbert(_) => SimError::Internal(e.to_string()),
            _ => SimError::Config(format!("params: {e}")),
        }
    }
}

impl From<ZenoError> for SimError {
    fn from(e: ZenoError) -> Self {
        match e {
            ZenoError::Hilbert(_) => SimError::Internal(e.to_string()),
            _ => SimError::Config(format!("params: {e}")),
        }
    }
}

impl From<EprError> for SimError {
    fn from(e: EprError) -> Self {
        match e {
            EprError::Hilbert(_) => SimError::Internal(e.to_string()),
            _ => SimError::Config(format!("params: {e}")),
        }
    }
}

impl From<RealismError> for SimError {
    fn from(e: RealismError) -> Self {
        match e {
            RealismError::Hilbert(_) => SimError::Internal(e.to_string()),
            _ => SimError::Config(format!("params: {e}")),
        }
    }
}
