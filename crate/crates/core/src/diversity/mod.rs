//! Scenario geometry, nearest-neighbor and Best-N statistics, serving-set
//! combinatorics and the Monte Carlo beam-sweep drop simulator.

pub mod geometry;
pub mod reception;
pub mod simulate;

pub use geometry::{distance_3d, nearest_neighbor_order, DistanceStats, Node};
pub use reception::{
    all_angle_reception_probability, best_n_path_loss, combination_count,
    enumerate_serving_combinations, reception_table, topology_from_links, LinkId, ReceptionCount,
    ReceptionRecord, RxMask, SweepGrid, Topology,
};
pub use simulate::{
    empirical_cdf, path_loss_series, pool_reception, reception_vs_serving_count, simulate_drop,
    LinkRealization, ModelSet, OmniSource, Scenario, ServingLink, TrialRealization,
};
