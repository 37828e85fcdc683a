//! Policy-gradient optimal experimental design for sensor paths on
//! navigation meshes.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bayes_utility;
pub mod error;
pub mod fixtures;
pub mod navmesh;
pub mod optimizer;
pub mod oracle;
pub mod path;
pub mod policy;
pub mod sampler;
pub mod utility;

pub use bayes_utility::{build_desk_instance, BayesUtility, Criterion, DeskSpec, LinearGaussianModel};
pub use error::{Error, Result};
pub use navmesh::{build_grid_mesh, build_reachability, load_mesh, CellRect, NavMesh, ReachabilityIndex};
pub use optimizer::{run, OptimizationResult, OptimizerConfig, OptimizerTrace, StepSchedule};
pub use path::Path;
pub use policy::{enumerate_support, LagMode, LogPmfGradient, PathDistribution, PolicyKind, PolicyParams};
pub use sampler::{sample_paths, RngSeed};
pub use utility::{Mode, Utility, UtilityTable};
