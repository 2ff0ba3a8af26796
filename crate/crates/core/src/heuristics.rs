//! Maize-specific spur removal rules, applied after skeleton evolution.
//!
//! Each rule reads the stem and leaf candidates off the current graph and
//! deletes whole leaf candidates (end edges or side subtrees); the stem is
//! never touched. A rule keeps firing until its condition no longer holds,
//! so applying it twice is the same as applying it once.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Pixel;
use crate::raster::BinaryMask;
use crate::skeleton::{identify_stem_and_leaves, EdgeId, NodeId, PlantStructure, SkeletonGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TubRuleDirection {
    /// Keep when the row offset is at most the column offset.
    AsWritten,
    /// Delete when the column offset exceeds the row offset (a near
    /// horizontal branch, as a tub rim or soil edge would produce).
    AsRationalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeuristicParams {
    /// Height of the root region, in pixels from the bottom row.
    pub upper_region_cutoff: u32,
    pub min_branch_gap: f64,
    pub max_root_branch_points: usize,
    pub early_day_limit: u32,
    pub boundary_rule_start_day: u32,
    /// Degrees.
    pub leaf_stem_angle_threshold: f64,
    pub tub_rule_direction: TubRuleDirection,
    pub triple_branch_length_ratio: f64,
    /// Distance from the mask contour still counted as touching it.
    pub boundary_tolerance: f64,
}

impl Default for HeuristicParams {
    fn default() -> Self {
        Self {
            upper_region_cutoff: 1700,
            min_branch_gap: 10.0,
            max_root_branch_points: 4,
            early_day_limit: 10,
            boundary_rule_start_day: 15,
            leaf_stem_angle_threshold: 30.0,
            tub_rule_direction: TubRuleDirection::AsWritten,
            triple_branch_length_ratio: 0.5,
            boundary_tolerance: 2.0,
        }
    }
}

impl HeuristicParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("heuristics.{what}")));
        if self.upper_region_cutoff == 0 {
            return bad("upper_region_cutoff must be positive");
        }
        if !(self.min_branch_gap > 0.0) {
            return bad("min_branch_gap must be positive");
        }
        if self.max_root_branch_points == 0 {
            return bad("max_root_branch_points must be positive");
        }
        if self.early_day_limit == 0 || self.boundary_rule_start_day == 0 {
            return bad("day limits must be positive");
        }
        if !(self.leaf_stem_angle_threshold > 0.0 && self.leaf_stem_angle_threshold < 90.0) {
            return bad("leaf_stem_angle_threshold must lie in (0, 90)");
        }
        if !(self.triple_branch_length_ratio > 0.0) {
            return bad("triple_branch_length_ratio must be positive");
        }
        if !(self.boundary_tolerance >= 0.0) {
            return bad("boundary_tolerance must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    OnePixelSpur,
    RootBranchCount,
    CloseBranchPair,
    TubEdge,
    BoundaryRoot,
    TripleBranch,
}

impl Rule {
    pub const ALL: [Rule; 6] = [
        Rule::OnePixelSpur,
        Rule::RootBranchCount,
        Rule::CloseBranchPair,
        Rule::TubEdge,
        Rule::BoundaryRoot,
        Rule::TripleBranch,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Rule::OnePixelSpur => "one_pixel_spur",
            Rule::RootBranchCount => "root_branch_count",
            Rule::CloseBranchPair => "close_branch_pair",
            Rule::TubEdge => "tub_edge",
            Rule::BoundaryRoot => "boundary_root",
            Rule::TripleBranch => "triple_branch",
        }
    }
}

impl std::fmt::Display for Rule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One deletion made by a rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Deletion {
    pub rule: Rule,
    pub deleted_edge_tip: Pixel,
    pub deleted_edge_branch: Pixel,
    pub length: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pruned {
    pub graph: SkeletonGraph,
    pub deletions: Vec<Deletion>,
}

impl Pruned {
    fn unchanged(g: &SkeletonGraph) -> Self {
        Self {
            graph: g.clone(),
            deletions: Vec::new(),
        }
    }
}

/// Runs `step` until it reports nothing to delete. `step` returns the
/// indices of the leaf candidates to drop.
fn until_stable(
    g: &SkeletonGraph,
    rule: Rule,
    mut step: impl FnMut(&SkeletonGraph, &PlantStructure) -> Vec<usize>,
) -> Pruned {
    let mut out = Pruned::unchanged(g);
    loop {
        let Ok(s) = identify_stem_and_leaves(&out.graph) else { break };
        let mut picks = step(&out.graph, &s);
        if picks.is_empty() {
            break;
        }
        picks.sort_unstable();
        picks.dedup();
        let mut edges: Vec<EdgeId> = Vec::new();
        for &i in &picks {
            let leaf = &s.leaves[i];
            edges.extend(&s.sites[i].edges);
            out.deletions.push(Deletion {
                rule,
                deleted_edge_tip: leaf.tip.expect("detected leaves have tips"),
                deleted_edge_branch: leaf.branch.expect("detected leaves have branches"),
                length: leaf.length,
            });
        }
        edges.sort_unstable();
        edges.dedup();
        out.graph.remove_edges(&edges);
    }
    out
}

/// Lowest first: larger row, then smaller column.
fn lower(a: Pixel, b: Pixel) -> bool {
    (a.x, -a.y) > (b.x, -b.y)
}

fn lowest_tip_leaf(s: &PlantStructure) -> Option<usize> {
    (0..s.leaves.len()).reduce(|best, i| {
        if lower(s.leaves[i].tip.unwrap(), s.leaves[best].tip.unwrap()) {
            i
        } else {
            best
        }
    })
}

/// Deletes one-pixel end branches whose branch point lies above the root
/// region (`x < height - upper_region_cutoff`).
pub fn prune_one_pixel_spurs(g: &SkeletonGraph, p: &HeuristicParams) -> Pruned {
    let limit = g.height as i64 - i64::from(p.upper_region_cutoff);
    let mut out = Pruned::unchanged(g);
    loop {
        let stem: Vec<EdgeId> = identify_stem_and_leaves(&out.graph)
            .map(|s| s.stem_edges)
            .unwrap_or_default();
        let mut doomed = Vec::new();
        for e in 0..out.graph.edges.len() {
            let Some((b, t)) = out.graph.endpoint_edge(e) else { continue };
            let branch = out.graph.nodes[b].position;
            if out.graph.edges[e].length == 1 && i64::from(branch.x) < limit && !stem.contains(&e) {
                doomed.push(e);
                out.deletions.push(Deletion {
                    rule: Rule::OnePixelSpur,
                    deleted_edge_tip: out.graph.nodes[t].position,
                    deleted_edge_branch: branch,
                    length: 1,
                });
            }
        }
        if doomed.is_empty() {
            break;
        }
        out.graph.remove_edges(&doomed);
    }
    out
}

/// Early days: keeps only the top `max_root_branch_points` stem branch
/// points and drops every leaf hanging below the last of them.
pub fn prune_root_branch_count(g: &SkeletonGraph, day: u32, p: &HeuristicParams) -> Pruned {
    if day > p.early_day_limit {
        return Pruned::unchanged(g);
    }
    until_stable(g, Rule::RootBranchCount, |g, s| {
        let top = s.branch_nodes_top_first(g);
        if top.len() <= p.max_root_branch_points {
            return Vec::new();
        }
        let cut = g.nodes[top[p.max_root_branch_points - 1]].position.x;
        (0..s.leaves.len())
            .filter(|&i| g.nodes[s.sites[i].node].position.x > cut)
            .collect()
    })
}

fn stem_branches_bottom_first(g: &SkeletonGraph, s: &PlantStructure) -> Vec<NodeId> {
    let mut v = s.branch_nodes_top_first(g);
    v.reverse();
    v
}

/// Early days: while the two lowest stem branch points are closer than
/// `min_branch_gap`, drops the leaves of the lowest one.
pub fn prune_close_branch_pair(g: &SkeletonGraph, day: u32, p: &HeuristicParams) -> Pruned {
    if day > p.early_day_limit {
        return Pruned::unchanged(g);
    }
    until_stable(g, Rule::CloseBranchPair, |g, s| {
        let bottom = stem_branches_bottom_first(g, s);
        if bottom.len() < 2 {
            return Vec::new();
        }
        let (a, b) = (g.nodes[bottom[0]].position, g.nodes[bottom[1]].position);
        if a.dist(b) < p.min_branch_gap {
            s.leaf_indices_at(bottom[0])
        } else {
            Vec::new()
        }
    })
}

/// Compares the lowest stem branch point `B` with the lowest leaf tip `E`
/// and deletes `E`'s leaf according to `tub_rule_direction`.
pub fn prune_tub_edge(g: &SkeletonGraph, p: &HeuristicParams) -> Pruned {
    until_stable(g, Rule::TubEdge, |g, s| {
        let Some(&b) = stem_branches_bottom_first(g, s).first() else {
            return Vec::new();
        };
        let Some(i) = lowest_tip_leaf(s) else { return Vec::new() };
        let bp = g.nodes[b].position;
        let e = s.leaves[i].tip.unwrap();
        let dx = (bp.x - e.x).abs();
        let dy = (bp.y - e.y).abs();
        let delete = match p.tub_rule_direction {
            TubRuleDirection::AsWritten => dx > dy,
            TubRuleDirection::AsRationalized => dy > dx,
        };
        if delete {
            vec![i]
        } else {
            Vec::new()
        }
    })
}

/// Unit vector along the stem, pointing up, at stem node `n`.
fn stem_up_direction(g: &SkeletonGraph, s: &PlantStructure, n: NodeId) -> Option<(f64, f64)> {
    let i = s.stem_nodes.iter().position(|&m| m == n)?;
    let (from, to) = if i + 1 < s.stem_nodes.len() {
        (n, s.stem_nodes[i + 1])
    } else if i > 0 {
        (s.stem_nodes[i - 1], n)
    } else {
        return None;
    };
    let (a, b) = (g.nodes[from].position, g.nodes[to].position);
    let (dx, dy) = (f64::from(b.x - a.x), f64::from(b.y - a.y));
    let len = dx.hypot(dy);
    (len > 0.0).then(|| (dx / len, dy / len))
}

/// Angle in degrees between the leaf vector branch→tip and the stem's
/// upward direction at the leaf's branch point.
pub fn leaf_stem_angle(g: &SkeletonGraph, s: &PlantStructure, leaf: usize) -> Option<f64> {
    let (ux, uy) = stem_up_direction(g, s, s.sites[leaf].node)?;
    let (b, t) = (s.leaves[leaf].branch?, s.leaves[leaf].tip?);
    let (vx, vy) = (f64::from(t.x - b.x), f64::from(t.y - b.y));
    let len = vx.hypot(vy);
    if len == 0.0 {
        return None;
    }
    let cos = ((vx * ux + vy * uy) / len).clamp(-1.0, 1.0);
    Some(cos.acos().to_degrees())
}

/// Late days: deletes the lowest leaf candidate when its tip touches the
/// mask contour inside the root region and it runs close to the stem.
pub fn prune_boundary_root(g: &SkeletonGraph, mask: &BinaryMask, day: u32, p: &HeuristicParams) -> Pruned {
    if day < p.boundary_rule_start_day {
        return Pruned::unchanged(g);
    }
    let contour: Vec<Pixel> = mask.boundary().pixels().collect();
    let tol2 = p.boundary_tolerance * p.boundary_tolerance;
    let root_top = g.height as i64 - i64::from(p.upper_region_cutoff);
    until_stable(g, Rule::BoundaryRoot, |g, s| {
        let Some(i) = lowest_tip_leaf(s) else { return Vec::new() };
        let tip = s.leaves[i].tip.unwrap();
        let in_root_region = i64::from(tip.x) >= root_top;
        let on_contour = contour.iter().any(|&c| c.dist2(tip) as f64 <= tol2);
        let steep = leaf_stem_angle(g, s, i).is_some_and(|a| a < p.leaf_stem_angle_threshold);
        if in_root_region && on_contour && steep {
            vec![i]
        } else {
            Vec::new()
        }
    })
}

/// When the lowest stem branch point has exactly three outgoing segments,
/// the one with the smallest column offset continues the stem; of the other
/// two, one that is both much shorter and lower is a spur.
pub fn resolve_triple_branch(g: &SkeletonGraph, p: &HeuristicParams) -> Pruned {
    until_stable(g, Rule::TripleBranch, |g, s| {
        let Some(&b) = stem_branches_bottom_first(g, s).first() else {
            return Vec::new();
        };
        let bp = g.nodes[b].position;
        let k = s.stem_nodes.iter().position(|&n| n == b).unwrap();
        // Outgoing segments: (far end, length, leaf index if a leaf).
        let mut segs: Vec<(Pixel, usize, Option<usize>)> = Vec::new();
        if let (Some(&e), Some(&up)) = (s.stem_edges.get(k), s.stem_nodes.get(k + 1)) {
            segs.push((g.nodes[up].position, g.edges[e].length, None));
        }
        for i in s.leaf_indices_at(b) {
            segs.push((s.leaves[i].tip.unwrap(), s.leaves[i].length, Some(i)));
        }
        if segs.len() != 3 {
            return Vec::new();
        }
        let stem_like = (0..3)
            .min_by_key(|&j| ((segs[j].0.y - bp.y).abs(), segs[j].2.is_some()))
            .unwrap();
        let rest: Vec<_> = (0..3).filter(|&j| j != stem_like).map(|j| segs[j]).collect();
        let r = p.triple_branch_length_ratio;
        for (a, o) in [(rest[0], rest[1]), (rest[1], rest[0])] {
            let shorter = (a.1 as f64) < r * o.1 as f64;
            let lower = a.0.x > o.0.x;
            if shorter && lower {
                // The traced stem itself is never deleted.
                return a.2.into_iter().collect();
            }
        }
        Vec::new()
    })
}

/// Applies all six rules in order with their day gates.
pub fn apply_heuristics(g: &SkeletonGraph, mask: &BinaryMask, day: u32, p: &HeuristicParams) -> Result<Pruned> {
    if day < 1 {
        return Err(Error::invalid("days since emergence must be at least 1"));
    }
    if mask.width() != g.width || mask.height() != g.height {
        return Err(Error::invalid(format!(
            "mask is {}x{} but skeleton is {}x{}",
            mask.width(),
            mask.height(),
            g.width,
            g.height
        )));
    }
    let mut out = Pruned::unchanged(g);
    for rule in Rule::ALL {
        let step = match rule {
            Rule::OnePixelSpur => prune_one_pixel_spurs(&out.graph, p),
            Rule::RootBranchCount => prune_root_branch_count(&out.graph, day, p),
            Rule::CloseBranchPair => prune_close_branch_pair(&out.graph, day, p),
            Rule::TubEdge => prune_tub_edge(&out.graph, p),
            Rule::BoundaryRoot => prune_boundary_root(&out.graph, mask, day, p),
            Rule::TripleBranch => resolve_triple_branch(&out.graph, p),
        };
        out.graph = step.graph;
        out.deletions.extend(step.deletions);
    }
    Ok(out)
}
