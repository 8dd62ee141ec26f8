use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("parse error in field `{field}`: {message}")]
    Parse { field: String, message: String },

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("ellipsoid shape matrix lost positive definiteness at iteration {iteration}")]
    EllipsoidCollapse { iteration: usize },

    #[error(
        "feasibility test inconclusive at lambda={lambda:e}: best dual value {best_value:e}, \
         lower bound {lower_bound:e} after {iterations} iterations"
    )]
    Inconclusive {
        lambda: f64,
        best_value: f64,
        lower_bound: f64,
        iterations: usize,
    },

    #[error(
        "SDP solver failed after {iterations} iterations \
         (primal residual {primal_residual:e}, dual residual {dual_residual:e}, gap {gap:e})"
    )]
    SdpNumerical {
        iterations: usize,
        primal_residual: f64,
        dual_residual: f64,
        gap: f64,
    },

    #[error("rank reduction failed; spectrum {spectrum:?}")]
    RankReduction { spectrum: Vec<f64> },

    #[error("both per-subcarrier branches infeasible on subcarrier {subcarrier} at lambda={lambda:e}")]
    BothBranchesInfeasible { subcarrier: usize, lambda: f64 },

    #[error("dual method did not converge in {iterations} iterations (gap {gap:e})")]
    NoConvergence { iterations: usize, gap: f64 },

    #[error("every lambda grid point failed: {0}")]
    AllGridPointsFailed(String),

    #[error("zero-forcing needs at least 2 antennas, scenario has {0}")]
    ZeroForcingInfeasible(usize),

    #[error("brute-force oracle: {0}")]
    Oracle(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidScenario(_) => "invalid_scenario",
            Error::InvalidGeometry(_) => "invalid_geometry",
            Error::Parse { .. } => "parse",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::EllipsoidCollapse { .. } => "ellipsoid_collapse",
            Error::Inconclusive { .. } => "inconclusive",
            Error::SdpNumerical { .. } => "sdp_numerical",
            Error::RankReduction { .. } => "rank_reduction",
            Error::BothBranchesInfeasible { .. } => "both_branches_infeasible",
            Error::NoConvergence { .. } => "no_convergence",
            Error::AllGridPointsFailed(_) => "all_grid_points_failed",
            Error::ZeroForcingInfeasible(_) => "zero_forcing_infeasible",
            Error::Oracle(_) => "oracle",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
        }
    }

    pub(crate) fn parse(field: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            field: field.into(),
            message: message.to_string(),
        }
    }
}
