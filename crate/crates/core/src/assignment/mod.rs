//! Leaf matching across days and the temporal count reconciliation built on
//! it.

mod hungarian;
mod reconcile;

pub use hungarian::{hungarian_min_cost, CostMatrix, Matching};
pub use reconcile::{
    expected_leaf_range, leaf_cost, match_leaves, reconcile_timeline, LeafMatching, ReconcileParams,
};
