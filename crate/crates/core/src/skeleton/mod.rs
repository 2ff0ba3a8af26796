//! Thinning, skeleton graphs and the stem/leaf reading of a skeleton.

mod graph;
mod plant;
mod thinning;

pub use graph::{extract_graph, Edge, EdgeId, Node, NodeId, NodeKind, SkeletonGraph};
pub use plant::{identify_stem_and_leaves, LeafCandidate, LeafLabel, LeafSite, PlantStructure, Provenance};
pub use thinning::{
    is_one_pixel_wide, is_simple, skeletonize, skeletonize_with_cutoff, thin_fast_parallel, thin_medial_axis,
    LAST_FAST_PARALLEL_DAY,
};
