use thiserror::Error;

use crate::lattice::LatticePoint;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported lattice dimension {0} (expected 2..=8)")]
    Dimension(usize),

    #[error("invalid bias distribution: {0}")]
    InvalidDistribution(String),

    #[error("weight of {direction} is zero; log-odds direction is undefined")]
    ZeroWeight { direction: String },

    #[error("points {0} and {1} are not lattice neighbours")]
    NotAdjacent(LatticePoint, LatticePoint),

    #[error("vertex {0} has no incident edges")]
    IsolatedVertex(LatticePoint),

    #[error("no positive root: drift along the direction is {drift} (must be > 0)")]
    NoPositiveRoot { drift: f64 },

    #[error("{what} did not converge after {iterations} iterations")]
    NonConvergence { what: &'static str, iterations: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("target lies outside the interior of the convex hull of the steps")]
    TargetOutsideHull,

    #[error("path step {index} is not a unit step")]
    NonAdjacentStep { index: usize },

    #[error("extension starts at {found}, expected the path endpoint {expected}")]
    DiscontinuousExtension { expected: LatticePoint, found: LatticePoint },

    #[error("vertex {0} is not in the graph")]
    VertexAbsent(LatticePoint),

    #[error("neighbourhood of {point} is not settled (settled level {settled_level})")]
    UnsettledNeighborhood { point: LatticePoint, settled_level: f64 },

    #[error("step budget of level {level} exhausted after {steps} steps")]
    BudgetExhausted { level: usize, steps: u64 },

    #[error("path of length {len} is too short for the requested window")]
    PathTooShort { len: usize },

    #[error("replica has {have} certified blocks, {need} required")]
    InsufficientBlocks { have: usize, need: usize },

    #[error("linear system is singular (network disconnected from its boundary?)")]
    SingularSystem,

    #[error("config: {0}")]
    Config(String),

    #[error("malformed trace dump: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
