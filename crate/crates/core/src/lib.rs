//! Joint trajectory and power control for UAV-to-ground interference links.

pub mod deployment;
pub mod error;
pub mod init;
pub mod kernel;
pub mod normalized;
pub mod orthogonal;
pub mod parallel;
pub mod pipeline;
pub mod program;
pub mod sca;
pub mod scenario;
pub mod segment;

pub use error::{Result, TpcError};
pub use pipeline::{run_scheme, PipelineConfig, RunOutcome, Scheme, SchemeConfig, SchemeOutcome};
pub use scenario::{
    check_feasibility, compute_rate, max_sampling_interval, mirror_extend, ChannelParams, FeasibilityReport, Horizon,
    KinematicLimits, Point, Scenario, TrajectorySolution,
};
