use crate::params::ParameterPoint;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("mesh needs at least 2 divisions per side, got {0}")]
    MeshTooCoarse(usize),

    #[error("parameter {0:?} outside the configured box {1}")]
    ParameterOutOfBox(ParameterPoint, String),

    #[error("empty Dirichlet complement: no free dofs in field {0}")]
    SingularLayout(&'static str),

    #[error("linear solve failed: {0}")]
    LinearSolveFailure(String),

    #[error("pseudo-time marching did not reach steady state in {steps} steps (last increment {last_increment:.3e})")]
    NonConvergence { steps: usize, last_increment: f64 },

    #[error("fixed-point iteration for {what} did not converge in {iters} iterations")]
    IterationStall { what: &'static str, iters: usize },

    #[error("boundary values violate the prescribed wall data by {0:.3e}")]
    BoundaryValueViolation(f64),

    #[error("EIM training set is rank deficient: residual sup-norm {0:.3e} below machine precision before tolerance")]
    DegenerateSnapshot(f64),

    #[error("greedy re-selected {0:?}: error indicator no longer discriminates")]
    GreedyStall(ParameterPoint),

    #[error("snapshot is linearly dependent on the current basis (post-projection norm ratio {0:.3e})")]
    RedundantSnapshot(f64),

    #[error("reduced Newton diverged at {parameter:?} after {iters} iterations (residual {residual:.3e})")]
    NewtonDivergence {
        parameter: ParameterPoint,
        iters: usize,
        residual: f64,
    },

    #[error("eigenvalue iteration failed: {0}")]
    EigenSolveFailure(String),

    #[error("inf-sup estimate is not positive: beta = {0:.3e}")]
    NonPositiveBeta(f64),

    #[error("certificate requested with invalid beta = {0:.3e}")]
    InvalidBeta(f64),

    #[error("RBF interpolation nodes are degenerate (duplicate or near-duplicate points)")]
    SingularInterpolation,

    #[error("artifact format error: {0}")]
    ArtifactFormat(String),

    #[error("artifact was built from a different configuration (stored hash {stored}, recomputed {recomputed})")]
    ConfigHashMismatch { stored: String, recomputed: String },

    #[error("unsupported artifact manifest version {0}")]
    UnknownArtifactVersion(u32),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("another process holds the artifact directory lock at {0}")]
    ArtifactLocked(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
