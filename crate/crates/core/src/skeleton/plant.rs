//! Stem tracing and leaf candidates.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::graph::{EdgeId, NodeId, NodeKind, SkeletonGraph};
use crate::error::{Error, Result};
use crate::geom::Pixel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafLabel {
    Leaf,
    Spur,
    Stem,
    Occluded,
}

/// Where a leaf entry came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Provenance {
    /// Traced on this day's skeleton.
    Detected,
    /// Copied from a matched same-view neighbour day.
    Reconciled { source_day: u32 },
    /// Count adjustment without a same-view neighbour to copy from.
    CountOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafCandidate {
    pub branch: Option<Pixel>,
    pub tip: Option<Pixel>,
    /// Branch pixel first, tip last. Empty for occluded entries.
    pub chain: Vec<Pixel>,
    /// Pixels after the branch point.
    pub length: usize,
    pub label: LeafLabel,
    pub provenance: Provenance,
}

impl LeafCandidate {
    pub fn from_chain(chain: Vec<Pixel>) -> Self {
        Self {
            branch: chain.first().copied(),
            tip: chain.last().copied(),
            length: chain.len().saturating_sub(1),
            chain,
            label: LeafLabel::Leaf,
            provenance: Provenance::Detected,
        }
    }

    /// A predicted leaf copied from another day's detection.
    pub fn occluded_copy(of: &LeafCandidate, source_day: u32) -> Self {
        Self {
            branch: of.branch,
            tip: of.tip,
            chain: Vec::new(),
            length: of.length,
            label: LeafLabel::Occluded,
            provenance: Provenance::Reconciled { source_day },
        }
    }

    pub fn count_only() -> Self {
        Self {
            branch: None,
            tip: None,
            chain: Vec::new(),
            length: 0,
            label: LeafLabel::Occluded,
            provenance: Provenance::CountOnly,
        }
    }

    pub fn is_occluded(&self) -> bool {
        self.label == LeafLabel::Occluded
    }
}

/// Graph elements making up one leaf candidate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeafSite {
    /// Stem node the leaf grows from.
    pub node: NodeId,
    /// Every edge of the candidate (one for a plain leaf edge).
    pub edges: Vec<EdgeId>,
    /// Node holding the tip.
    pub tip_node: NodeId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantStructure {
    /// Lowest skeleton pixel.
    pub root: Pixel,
    /// Stem nodes from the root upwards.
    pub stem_nodes: Vec<NodeId>,
    pub stem_edges: Vec<EdgeId>,
    pub leaves: Vec<LeafCandidate>,
    /// Parallel to `leaves`.
    pub sites: Vec<LeafSite>,
}

impl PlantStructure {
    /// Stem branch nodes, topmost (smallest x) first.
    pub fn branch_nodes_top_first(&self, g: &SkeletonGraph) -> Vec<NodeId> {
        let mut v: Vec<NodeId> = self
            .stem_nodes
            .iter()
            .copied()
            .filter(|&n| g.nodes[n].kind == NodeKind::Branch)
            .collect();
        v.sort_by_key(|&n| g.nodes[n].position);
        v
    }

    pub fn is_stem_edge(&self, e: EdgeId) -> bool {
        self.stem_edges.contains(&e)
    }

    /// Stem pixels from the root upwards.
    pub fn stem_path(&self, g: &SkeletonGraph) -> Vec<Pixel> {
        let mut out = Vec::new();
        for (i, &n) in self.stem_nodes.iter().enumerate() {
            if g.nodes[n].kind != NodeKind::Endpoint {
                out.push(g.nodes[n].position);
            }
            if let Some(&e) = self.stem_edges.get(i) {
                out.extend(g.edges[e].chain_from(n));
            }
        }
        if let (Some(&n), true) = (self.stem_nodes.first(), self.stem_edges.is_empty()) {
            if g.nodes[n].kind == NodeKind::Endpoint {
                out.push(g.nodes[n].position);
            }
        }
        out.dedup();
        out
    }

    /// Edges of all leaf sites attached at `node`.
    pub fn leaf_indices_at(&self, node: NodeId) -> Vec<usize> {
        (0..self.sites.len()).filter(|&i| self.sites[i].node == node).collect()
    }
}

/// Node whose position or cluster contains the lowest skeleton pixel; when
/// that pixel sits inside a chain, the lower end of the chain.
fn root_node(g: &SkeletonGraph) -> Option<(Pixel, NodeId)> {
    let lowest = |a: Pixel, b: Pixel| (-(a.x), a.y) < (-(b.x), b.y);
    let mut best: Option<(Pixel, NodeId)> = None;
    let mut consider = |p: Pixel, n: NodeId| {
        if best.map_or(true, |(q, _)| lowest(p, q)) {
            best = Some((p, n));
        }
    };
    for node in &g.nodes {
        for &p in &node.pixels {
            consider(p, node.id);
        }
    }
    for e in &g.edges {
        let (a, b) = (g.nodes[e.node_a].position, g.nodes[e.node_b].position);
        let lower = if lowest(b, a) { e.node_b } else { e.node_a };
        for &p in &e.chain {
            let owner = if g.nodes[e.node_a].kind == NodeKind::Endpoint && p == a {
                e.node_a
            } else if g.nodes[e.node_b].kind == NodeKind::Endpoint && p == b {
                e.node_b
            } else {
                lower
            };
            consider(p, owner);
        }
    }
    best
}

/// Traces the stem from the lowest skeleton point and reads off the leaf
/// candidates hanging from its branch nodes.
///
/// At each node the stem continues along the most vertical upward edge,
/// measured as rise over the straight-line distance between its two nodes;
/// equally vertical edges go to the longer chain. Every other edge
/// leaving a stem branch node yields one candidate; when it leads into a
/// side subtree, the candidate ends at the subtree's farthest end point.
pub fn identify_stem_and_leaves(g: &SkeletonGraph) -> Result<PlantStructure> {
    if g.nodes_of_kind(NodeKind::Endpoint).next().is_none() {
        return Err(Error::MalformedSkeleton("skeleton graph has no end points".into()));
    }
    let (root, start) = root_node(g).expect("graph with end points has pixels");

    let mut stem_nodes = vec![start];
    let mut stem_edges = Vec::new();
    let mut on_stem = BTreeSet::from([start]);
    let mut cur = start;
    loop {
        let cx = g.nodes[cur].position.x;
        // (edge, node, rise², squared displacement, chain length)
        let mut pick: Option<(EdgeId, NodeId, i128, i128, usize)> = None;
        for e in g.incident_edges(cur) {
            let edge = &g.edges[e];
            if edge.is_loop() {
                continue;
            }
            let v = edge.other(cur);
            let rise = i64::from(cx - g.nodes[v].position.x);
            if rise <= 0 || on_stem.contains(&v) {
                continue;
            }
            let r2 = i128::from(rise * rise);
            let d2 = i128::from(g.nodes[cur].position.dist2(g.nodes[v].position));
            let better = match pick {
                None => true,
                // rise/dist > prise/pdist, compared exactly on squares
                Some((_, _, pr2, pd2, plen)) => {
                    let lhs = r2 * pd2;
                    let rhs = pr2 * d2;
                    lhs > rhs || (lhs == rhs && edge.length > plen)
                }
            };
            if better {
                pick = Some((e, v, r2, d2, edge.length));
            }
        }
        match pick {
            Some((e, v, ..)) => {
                stem_edges.push(e);
                stem_nodes.push(v);
                on_stem.insert(v);
                cur = v;
            }
            None => break,
        }
    }

    let stem_edge_set: BTreeSet<EdgeId> = stem_edges.iter().copied().collect();
    let mut used_edges = stem_edge_set.clone();
    let mut leaves = Vec::new();
    let mut sites = Vec::new();
    for &n in &stem_nodes {
        if g.nodes[n].kind != NodeKind::Branch {
            continue;
        }
        for e in g.incident_edges(n) {
            if used_edges.contains(&e) || g.edges[e].is_loop() {
                continue;
            }
            let v = g.edges[e].other(n);
            if on_stem.contains(&v) {
                continue;
            }
            used_edges.insert(e);
            if g.nodes[v].kind == NodeKind::Endpoint {
                let mut chain = vec![g.nodes[n].position];
                chain.extend(g.edges[e].chain_from(n));
                leaves.push(LeafCandidate::from_chain(chain));
                sites.push(LeafSite {
                    node: n,
                    edges: vec![e],
                    tip_node: v,
                });
                continue;
            }
            if let Some((site, chain)) = side_subtree(g, n, e, &on_stem, &mut used_edges) {
                leaves.push(LeafCandidate::from_chain(chain));
                sites.push(site);
            }
        }
    }

    Ok(PlantStructure {
        root,
        stem_nodes,
        stem_edges,
        leaves,
        sites,
    })
}

/// Collects the subtree entered through `first` and the path to its
/// farthest end point.
fn side_subtree(
    g: &SkeletonGraph,
    stem_node: NodeId,
    first: EdgeId,
    on_stem: &BTreeSet<NodeId>,
    used: &mut BTreeSet<EdgeId>,
) -> Option<(LeafSite, Vec<Pixel>)> {
    let entry = g.edges[first].other(stem_node);
    // Dijkstra-free: the side structure is a tree in practice; BFS with
    // accumulated chain lengths picks the first-found parent.
    let mut dist: BTreeMap<NodeId, usize> = BTreeMap::from([(entry, g.edges[first].length)]);
    let mut parent: BTreeMap<NodeId, (NodeId, EdgeId)> = BTreeMap::from([(entry, (stem_node, first))]);
    let mut edges = vec![first];
    let mut queue = VecDeque::from([entry]);
    while let Some(u) = queue.pop_front() {
        for e in g.incident_edges(u) {
            if used.contains(&e) || edges.contains(&e) {
                continue;
            }
            let v = g.edges[e].other(u);
            if on_stem.contains(&v) {
                continue;
            }
            edges.push(e);
            if v == u || dist.contains_key(&v) {
                continue;
            }
            dist.insert(v, dist[&u] + g.edges[e].length + 1);
            parent.insert(v, (u, e));
            queue.push_back(v);
        }
    }
    used.extend(edges.iter().copied());
    let tip_node = dist
        .iter()
        .filter(|(&v, _)| g.nodes[v].kind == NodeKind::Endpoint)
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(&v, _)| v)?;

    let mut path = Vec::new();
    let mut v = tip_node;
    while v != stem_node {
        let (u, e) = parent[&v];
        path.push((u, e));
        v = u;
    }
    path.reverse();
    let mut chain = vec![g.nodes[stem_node].position];
    for (u, e) in path {
        if u != stem_node {
            chain.push(g.nodes[u].position);
        }
        chain.extend(g.edges[e].chain_from(u));
    }
    edges.sort_unstable();
    Some((
        LeafSite {
            node: stem_node,
            edges,
            tip_node,
        },
        chain,
    ))
}
