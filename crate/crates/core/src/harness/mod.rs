//! Monte Carlo experiments for the limit theorems and the lattice test.
//!
//! Replication `r` at grid size `n` simulates from
//! `derive(rep_seed(base_seed, r), n)`; every other random input is derived
//! from that seed by label. Replications run on the current rayon pool and
//! are reduced in index order, so reports do not depend on the thread count.

mod experiments;
pub mod gof;
pub mod ks;
mod plan;
mod report;

pub use experiments::{
    grid_scan, path_seed, run, run_clt, run_grid, run_lln, run_rnp_check, run_with_threads, run_ztrunc, simulate_conditioned,
    GridData, CONDITION_ATTEMPTS,
};
pub use plan::{ExperimentKind, ExperimentPlan};
pub use report::{ls_slope, median, quantile, ExperimentReport, GridRow, GridScan, Manifest, Moments, NTable, RepRow, TruncRow};
