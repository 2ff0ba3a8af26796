//! Per-plant, per-day detection records.

use serde::{Deserialize, Serialize};

use crate::geom::Pixel;
use crate::hull::View;
use crate::skeleton::{LeafCandidate, SkeletonGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditAction {
    Delete,
    Insert,
}

/// One leaf-count change, written to the audit JSON lines.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub plant: String,
    pub day: u32,
    /// Heuristic rule name, or `reconcile_spur` / `reconcile_missing_leaf`.
    pub rule: String,
    pub action: AuditAction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deleted_edge_tip: Option<Pixel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deleted_edge_branch: Option<Pixel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inserted_tip: Option<Pixel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inserted_branch: Option<Pixel>,
}

/// Leaf candidates (without chains) after each phase of the per-image
/// pipeline, kept so every phase can be scored.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseLeaves {
    pub skeleton: Vec<LeafCandidate>,
    pub dse: Vec<LeafCandidate>,
    pub heuristics: Vec<LeafCandidate>,
}

impl PhaseLeaves {
    pub fn strip(leaves: &[LeafCandidate]) -> Vec<LeafCandidate> {
        leaves
            .iter()
            .map(|l| LeafCandidate {
                chain: Vec::new(),
                ..l.clone()
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantDayRecord {
    pub plant_id: String,
    /// Calendar day index, counted from 1.
    pub day: u32,
    /// 1 on the emergence day; 0 before emergence.
    pub days_since_emergence: u32,
    pub chosen_view: View,
    pub hull_area0: f64,
    pub hull_area90: f64,
    pub leaves: Vec<LeafCandidate>,
    /// Leaves dropped by reconciliation, labelled `spur`.
    #[serde(default)]
    pub rejected: Vec<LeafCandidate>,
    pub skeleton: SkeletonGraph,
    pub phases: PhaseLeaves,
    pub audit: Vec<AuditEntry>,
}

impl PlantDayRecord {
    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    pub fn emerged(&self) -> bool {
        self.days_since_emergence >= 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantTimeline {
    pub plant_id: String,
    /// Strictly increasing by day.
    pub records: Vec<PlantDayRecord>,
}
