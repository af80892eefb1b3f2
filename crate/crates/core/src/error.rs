//! Crate-wide error type. Variant names double as the machine-readable error
//! names printed by the CLI.

use crate::geom::Vec2;
use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum CbError {
    #[error("NoConvergence: root finding did not converge from the given seed")]
    NoConvergence,
    #[error("Degenerate: |det Hess| below tolerance at y=({}, {}); the base point lies on the caustic", .0.x, .0.y)]
    Degenerate(Vec2),
    #[error("DegeneratePoint: degenerate critical point at y=({}, {}); the base point lies on the caustic", .0.x, .0.y)]
    DegeneratePoint(Vec2),
    #[error("NotAFold: {0}")]
    NotAFold(String),
    #[error("NoTerminus: trajectory neither reached a critical point nor left the region within max_time")]
    NoTerminus,
    #[error("OnCaustic: portrait requested on the caustic")]
    OnCaustic,
    #[error("OnBifurcation: saddle-to-saddle terminus found; the base point lies on the bifurcation locus")]
    OnBifurcation,
    #[error("NoCrossing: the branch left the region before crossing the section")]
    NoCrossing,
    #[error("UnresolvedWall: bisection exhausted without a clean classification near ({}, {})", .0.x, .0.y)]
    UnresolvedWall(Vec2),
    #[error("InconsistentAdjacency: {0}")]
    InconsistentAdjacency(String),
    #[error("NoCoherentOrientation: {0}")]
    NoCoherentOrientation(String),
    #[error("NotAChainMap: {0}")]
    NotAChainMap(String),
    #[error("WrongSideConvention: signs convention holds on the opposite chamber")]
    WrongSideConvention,
    #[error("MissingCorrection: {0}")]
    MissingCorrection(String),
    #[error("SchemaError at {path}: {message}")]
    SchemaError { path: String, message: String },
    #[error("ConfigError: {0}")]
    Config(String),
    #[error("IoError: {0}")]
    Io(String),
}

impl CbError {
    /// Short machine-readable name, stable across messages.
    pub fn name(&self) -> &'static str {
        match self {
            CbError::NoConvergence => "NoConvergence",
            CbError::Degenerate(_) => "Degenerate",
            CbError::DegeneratePoint(_) => "DegeneratePoint",
            CbError::NotAFold(_) => "NotAFold",
            CbError::NoTerminus => "NoTerminus",
            CbError::OnCaustic => "OnCaustic",
            CbError::OnBifurcation => "OnBifurcation",
            CbError::NoCrossing => "NoCrossing",
            CbError::UnresolvedWall(_) => "UnresolvedWall",
            CbError::InconsistentAdjacency(_) => "InconsistentAdjacency",
            CbError::NoCoherentOrientation(_) => "NoCoherentOrientation",
            CbError::NotAChainMap(_) => "NotAChainMap",
            CbError::WrongSideConvention => "WrongSideConvention",
            CbError::MissingCorrection(_) => "MissingCorrection",
            CbError::SchemaError { .. } => "SchemaError",
            CbError::Config(_) => "ConfigError",
            CbError::Io(_) => "IoError",
        }
    }

    /// CLI exit code class: 2 for configuration problems, 1 for domain errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            CbError::Config(_) | CbError::SchemaError { .. } | CbError::Io(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CbError>;
