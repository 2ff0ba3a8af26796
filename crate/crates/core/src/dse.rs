//! Discrete skeleton evolution: iterative removal of end branches that carry
//! almost none of the skeleton's area.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Pixel;
use crate::skeleton::SkeletonGraph;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DseParams {
    pub weight_threshold: f64,
}

impl Default for DseParams {
    fn default() -> Self {
        Self { weight_threshold: 0.005 }
    }
}

impl DseParams {
    pub fn validate(&self) -> Result<()> {
        // Zero is accepted too: it turns pruning off.
        if !(0.0..1.0).contains(&self.weight_threshold) {
            return Err(Error::Config(format!(
                "dse.weight_threshold must lie in [0, 1), got {}",
                self.weight_threshold
            )));
        }
        Ok(())
    }
}

/// Relevance of an end branch: `1 - (a_s - a_e) / a_s`, i.e. `a_e / a_s`.
pub fn edge_weight(a_s: usize, a_e: usize) -> Result<f64> {
    if a_s == 0 {
        return Err(Error::invalid("skeleton area must be positive"));
    }
    if a_e > a_s {
        return Err(Error::invalid(format!("edge area {a_e} exceeds skeleton area {a_s}")));
    }
    Ok(1.0 - (a_s - a_e) as f64 / a_s as f64)
}

/// One pruned end branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DseRemoval {
    pub tip: Pixel,
    pub branch: Pixel,
    pub edge_area: usize,
    pub skeleton_area: usize,
    pub weight: f64,
}

pub fn dse_prune(g: &SkeletonGraph, params: &DseParams) -> SkeletonGraph {
    dse_prune_logged(g, params).0
}

/// Removes the lightest end branch while its weight is below the threshold,
/// recomputing the skeleton area after every removal. Ties go to the
/// smaller edge, then to the smaller tip coordinate.
pub fn dse_prune_logged(g: &SkeletonGraph, params: &DseParams) -> (SkeletonGraph, Vec<DseRemoval>) {
    let mut g = g.clone();
    let mut log = Vec::new();
    loop {
        let a_s = g.pixel_count();
        if a_s == 0 {
            break;
        }
        let lightest = (0..g.edges.len())
            .filter_map(|e| {
                let (b, t) = g.endpoint_edge(e)?;
                Some((g.edges[e].length, g.nodes[t].position, g.nodes[b].position, e))
            })
            .min();
        let Some((a_e, tip, branch, e)) = lightest else { break };
        let weight = edge_weight(a_s, a_e).expect("edge area within skeleton");
        if weight >= params.weight_threshold {
            break;
        }
        g.remove_edges(&[e]);
        log.push(DseRemoval {
            tip,
            branch,
            edge_area: a_e,
            skeleton_area: a_s,
            weight,
        });
    }
    (g, log)
}
