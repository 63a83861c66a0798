//! Hybrid classical/quantum divide-and-conquer tree search for SAT.

pub mod cli;
pub mod decomposition;
pub mod formula;
pub mod latticesat;
pub mod qcircuit;
pub mod qwalk;
pub mod sia;
pub mod treesearch;

/// Dimension cap override from `HYBRIDTS_DIM_CAP`, if set and parseable.
pub fn env_dim_cap() -> Option<usize> {
    std::env::var("HYBRIDTS_DIM_CAP").ok()?.trim().parse().ok()
}
