//! Oriented-percolation clusters on `Z^d × Z_+`: exact bond sampling,
//! cluster growth, two-point estimators, the critical-point search and
//! exhaustive-enumeration oracles.

pub mod cluster;
pub mod critical;
pub mod enumeration;
pub mod estimator;
pub mod sampler;

pub use cluster::{grow_cluster, ClusterTrace, DEFAULT_SITE_CAP};
pub use critical::{
    estimate_susceptibility, find_pc, find_pc_with, group_tables, jackknife_slope, slope_statistic, BisectionStep, PcEstimate, PcSearchOptions,
    SlopeStatistic, Susceptibility, Window, JACKKNIFE_GROUPS,
};
pub use enumeration::{
    exact_enumeration_two_point, tiny_kernel, verify_expansion_step, ExactTwoPoint, ExpansionCheck, SpaceTime,
    DEFAULT_WORK_CAP,
};
pub use estimator::{
    chunk_ranges, estimate_two_point_transform, extend_table, run_replicas, CellEstimate, EstimatorTable, McOptions,
    Moments, ProbeSet, CHUNK,
};
pub use sampler::BondFieldSampler;
