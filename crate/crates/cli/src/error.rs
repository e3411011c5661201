//! Error type and process exit-code policy shared by every subcommand.

use duio_core::decomp::DecompError;
use duio_core::sim::SimError;
use duio_core::synthesis::SynthesisError;
use thiserror::Error;

/// Anything the pipeline can fail with, tagged for exit-code mapping.
#[derive(Debug, Error)]
pub enum CliError {
    /// Scenario ingestion failure: unreadable file, malformed JSON, or a
    /// dimension problem, always naming the offending field.
    #[error("{0}")]
    Load(String),
    /// One or more nodes violate the rank assumptions.
    #[error("assumption check failed:\n{0}")]
    AssumptionsFailed(String),
    /// Decoupling or decomposition failure.
    #[error(transparent)]
    Decomp(#[from] DecompError),
    /// Gain synthesis failure.
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
    /// Simulation failure.
    #[error(transparent)]
    Sim(#[from] SimError),
    /// Filesystem failure, with the path that caused it.
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// Process exit code: 2 when the scenario itself is infeasible (failed
    /// assumptions, non-constructible observers, infeasible gain programs),
    /// 1 for every other failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::AssumptionsFailed(_)
            | CliError::Decomp(DecompError::UioNotConstructible { .. })
            | CliError::Synthesis(SynthesisError::SynthesisInfeasible(_))
            | CliError::Synthesis(SynthesisError::ConsensusInfeasible(_)) => 2,
            _ => 1,
        }
    }
}
