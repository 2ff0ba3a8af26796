//! Skeleton graphs: end points and merged branch clusters joined by pixel
//! chains.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::geom::Pixel;
use crate::raster::BinaryMask;

pub type NodeId = usize;
pub type EdgeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    /// A pixel with exactly one skeleton neighbour. Its pixel is the last
    /// pixel of the incident edge chain, so `pixels` is empty.
    Endpoint,
    /// A merged cluster of pixels with three or more skeleton neighbours.
    Branch,
    /// A node on a component with no end or branch points: an isolated
    /// pixel or a pixel chosen to anchor a closed loop.
    Anchor,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    pub position: Pixel,
    /// Cluster pixels owned by the node (empty for end points).
    pub pixels: Vec<Pixel>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub node_a: NodeId,
    pub node_b: NodeId,
    /// Pixels strictly between the two nodes' clusters, ordered from
    /// `node_a` to `node_b`. End-point pixels are included.
    pub chain: Vec<Pixel>,
    pub length: usize,
}

impl Edge {
    fn new(node_a: NodeId, node_b: NodeId, chain: Vec<Pixel>) -> Self {
        let length = chain.len();
        Self {
            node_a,
            node_b,
            chain,
            length,
        }
    }

    pub fn other(&self, n: NodeId) -> NodeId {
        if self.node_a == n {
            self.node_b
        } else {
            self.node_a
        }
    }

    pub fn is_loop(&self) -> bool {
        self.node_a == self.node_b
    }

    pub fn touches(&self, n: NodeId) -> bool {
        self.node_a == n || self.node_b == n
    }

    /// Chain ordered away from `n`.
    pub fn chain_from(&self, n: NodeId) -> Vec<Pixel> {
        if self.node_a == n {
            self.chain.clone()
        } else {
            self.chain.iter().rev().copied().collect()
        }
    }
}

/// A skeleton as a graph. Every skeleton pixel belongs to exactly one edge
/// chain or one node cluster.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkeletonGraph {
    pub width: usize,
    pub height: usize,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Role {
    Chain,
    Endpoint(NodeId),
    Cluster(NodeId),
}

/// Builds the graph of a thinned mask.
///
/// End points have one neighbour and branch pixels three or more
/// (8-connectivity). Adjacent branch pixels merge into one node placed at
/// the cluster pixel nearest the cluster centroid. Edges are maximal chains
/// of two-neighbour pixels between nodes.
pub fn extract_graph(skel: &BinaryMask) -> SkeletonGraph {
    let pixels: Vec<Pixel> = skel.pixels().collect();
    let mut role: HashMap<Pixel, Role> = HashMap::with_capacity(pixels.len());
    let mut nodes: Vec<Node> = Vec::new();

    // Branch clusters, discovered in raster order.
    let is_branch = |p: Pixel| skel.neighbor_count(p) >= 3;
    for &p in &pixels {
        if skel.neighbor_count(p) == 0 {
            let id = nodes.len();
            nodes.push(Node {
                id,
                kind: NodeKind::Anchor,
                position: p,
                pixels: vec![p],
            });
            role.insert(p, Role::Cluster(id));
        } else if is_branch(p) && !role.contains_key(&p) {
            let id = nodes.len();
            let mut cluster = vec![p];
            role.insert(p, Role::Cluster(id));
            let mut i = 0;
            while i < cluster.len() {
                for q in cluster[i].neighbors8() {
                    if skel.get(q) && is_branch(q) && !role.contains_key(&q) {
                        role.insert(q, Role::Cluster(id));
                        cluster.push(q);
                    }
                }
                i += 1;
            }
            cluster.sort_unstable();
            nodes.push(Node {
                id,
                kind: NodeKind::Branch,
                position: cluster_center(&cluster),
                pixels: cluster,
            });
        } else if skel.neighbor_count(p) == 1 {
            let id = nodes.len();
            nodes.push(Node {
                id,
                kind: NodeKind::Endpoint,
                position: p,
                pixels: Vec::new(),
            });
            role.insert(p, Role::Endpoint(id));
        }
    }
    for &p in &pixels {
        role.entry(p).or_insert(Role::Chain);
    }

    let mut visited: HashMap<Pixel, bool> = HashMap::new();
    let mut edges = Vec::new();

    let walk = |prev: Pixel, first: Pixel, visited: &mut HashMap<Pixel, bool>| -> (Vec<Pixel>, Option<NodeId>) {
        let mut chain = Vec::new();
        let (mut prev, mut cur) = (prev, first);
        loop {
            match role[&cur] {
                Role::Endpoint(n) => {
                    visited.insert(cur, true);
                    chain.push(cur);
                    return (chain, Some(n));
                }
                Role::Cluster(n) => return (chain, Some(n)),
                Role::Chain => {
                    if visited.insert(cur, true).is_some() {
                        return (chain, None);
                    }
                    chain.push(cur);
                    let next = cur.neighbors8().into_iter().find(|&q| skel.get(q) && q != prev);
                    match next {
                        Some(q) => {
                            prev = cur;
                            cur = q;
                        }
                        None => return (chain, None),
                    }
                }
            }
        }
    };

    // Edges starting at end points.
    for n in 0..nodes.len() {
        if nodes[n].kind != NodeKind::Endpoint {
            continue;
        }
        let p = nodes[n].position;
        if visited.contains_key(&p) {
            continue;
        }
        visited.insert(p, true);
        let next = p.neighbors8().into_iter().find(|&q| skel.get(q)).expect("end point has a neighbour");
        let (mut rest, end) = walk(p, next, &mut visited);
        let mut chain = vec![p];
        chain.append(&mut rest);
        if let Some(m) = end {
            // Keep the end point last when it meets a cluster, so chains of
            // leaf edges read branch -> tip once reversed by `chain_from`.
            edges.push(Edge::new(n, m, chain));
        }
    }

    // Edges between clusters (branch-branch and loops).
    for n in 0..nodes.len() {
        if nodes[n].kind == NodeKind::Endpoint {
            continue;
        }
        let cluster = nodes[n].pixels.clone();
        for c in cluster {
            for q in c.neighbors8() {
                if !skel.get(q) || visited.contains_key(&q) {
                    continue;
                }
                if matches!(role[&q], Role::Cluster(_)) {
                    continue;
                }
                let (chain, end) = walk(c, q, &mut visited);
                if let Some(m) = end {
                    edges.push(Edge::new(n, m, chain));
                }
            }
        }
    }

    // Closed loops without any node.
    for &p in &pixels {
        if role[&p] != Role::Chain || visited.contains_key(&p) {
            continue;
        }
        let id = nodes.len();
        nodes.push(Node {
            id,
            kind: NodeKind::Anchor,
            position: p,
            pixels: vec![p],
        });
        // The walk stops when it comes back round to the visited anchor.
        visited.insert(p, true);
        let next = p.neighbors8().into_iter().find(|&q| skel.get(q));
        if let Some(q) = next {
            let (chain, _) = walk(p, q, &mut visited);
            edges.push(Edge::new(id, id, chain));
        }
    }

    let mut g = SkeletonGraph {
        width: skel.width(),
        height: skel.height(),
        nodes,
        edges,
    };
    g.sort_canonical();
    g
}

/// Cluster pixel nearest the centroid; ties go to the first in raster order.
fn cluster_center(cluster: &[Pixel]) -> Pixel {
    let n = cluster.len() as f64;
    let cx = cluster.iter().map(|p| f64::from(p.x)).sum::<f64>() / n;
    let cy = cluster.iter().map(|p| f64::from(p.y)).sum::<f64>() / n;
    let mut best = cluster[0];
    let mut best_d = f64::INFINITY;
    for &p in cluster {
        let d = (f64::from(p.x) - cx).powi(2) + (f64::from(p.y) - cy).powi(2);
        if d < best_d - 1e-9 {
            best = p;
            best_d = d;
        }
    }
    best
}

/// Orders pixels by a greedy nearest-neighbour walk from `from`.
fn greedy_order(from: Option<Pixel>, mut pts: Vec<Pixel>) -> Vec<Pixel> {
    let mut out = Vec::with_capacity(pts.len());
    let mut cur = from;
    while !pts.is_empty() {
        let i = match cur {
            Some(c) => (0..pts.len()).min_by_key(|&i| (pts[i].dist2(c), pts[i])).unwrap(),
            None => 0,
        };
        let p = pts.swap_remove(i);
        out.push(p);
        cur = Some(p);
    }
    out
}

impl SkeletonGraph {
    /// An empty graph for a `width` x `height` frame.
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            nodes: Vec::new(),
            edges: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty() && self.edges.is_empty()
    }

    /// Total skeleton area in pixels.
    pub fn pixel_count(&self) -> usize {
        self.edges.iter().map(|e| e.chain.len()).sum::<usize>()
            + self.nodes.iter().map(|n| n.pixels.len()).sum::<usize>()
    }

    pub fn to_mask(&self) -> BinaryMask {
        let mut m = BinaryMask::new(self.width.max(1), self.height.max(1));
        for e in &self.edges {
            for &p in &e.chain {
                m.set(p, true);
            }
        }
        for n in &self.nodes {
            for &p in &n.pixels {
                m.set(p, true);
            }
        }
        m
    }

    /// Number of edge ends at `n` (a loop counts twice).
    pub fn degree(&self, n: NodeId) -> usize {
        self.edges
            .iter()
            .map(|e| usize::from(e.node_a == n) + usize::from(e.node_b == n))
            .sum()
    }

    pub fn incident_edges(&self, n: NodeId) -> Vec<EdgeId> {
        (0..self.edges.len()).filter(|&e| self.edges[e].touches(n)).collect()
    }

    pub fn nodes_of_kind(&self, kind: NodeKind) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(move |n| n.kind == kind)
    }

    /// For an edge joining a branch node and an end point, returns
    /// `(branch, endpoint)`.
    pub fn endpoint_edge(&self, e: EdgeId) -> Option<(NodeId, NodeId)> {
        let edge = &self.edges[e];
        let (ka, kb) = (self.nodes[edge.node_a].kind, self.nodes[edge.node_b].kind);
        match (ka, kb) {
            (NodeKind::Branch, NodeKind::Endpoint) => Some((edge.node_a, edge.node_b)),
            (NodeKind::Endpoint, NodeKind::Branch) => Some((edge.node_b, edge.node_a)),
            _ => None,
        }
    }

    /// Removes the given edges (and end points left without an edge), then
    /// restores the node invariants: a branch node left with two edge ends
    /// is dissolved into one merged chain, one left with a single edge end
    /// becomes an end point, and one left with none becomes an anchor.
    pub fn remove_edges(&mut self, ids: &[EdgeId]) {
        if ids.is_empty() {
            return;
        }
        let mut drop = vec![false; self.edges.len()];
        for &e in ids {
            drop[e] = true;
        }
        let mut keep_edges = Vec::with_capacity(self.edges.len());
        for (i, e) in std::mem::take(&mut self.edges).into_iter().enumerate() {
            if !drop[i] {
                keep_edges.push(e);
            }
        }
        self.edges = keep_edges;
        self.normalize();
    }

    fn normalize(&mut self) {
        let mut alive = vec![true; self.nodes.len()];
        for n in 0..self.nodes.len() {
            let deg = self.degree(n);
            match self.nodes[n].kind {
                NodeKind::Endpoint if deg == 0 => alive[n] = false,
                NodeKind::Branch => match deg {
                    0 => self.nodes[n].kind = NodeKind::Anchor,
                    1 => self.demote_to_endpoint(n),
                    2 => {
                        if self.dissolve(n) {
                            alive[n] = false;
                        }
                    }
                    _ => {}
                },
                _ => {}
            }
        }
        self.compact(&alive);
    }

    fn demote_to_endpoint(&mut self, n: NodeId) {
        let e = self.incident_edges(n)[0];
        let mut chain = self.edges[e].chain_from(self.edges[e].other(n));
        let tail = greedy_order(chain.last().copied(), std::mem::take(&mut self.nodes[n].pixels));
        chain.extend(tail);
        let other = self.edges[e].other(n);
        let node = &mut self.nodes[n];
        node.kind = NodeKind::Endpoint;
        if let Some(&last) = chain.last() {
            node.position = last;
        }
        self.edges[e] = Edge::new(other, n, chain);
    }

    /// Merges the two edges meeting at `n`. Returns false when `n` only
    /// carries a self-loop, in which case it becomes an anchor.
    fn dissolve(&mut self, n: NodeId) -> bool {
        let inc = self.incident_edges(n);
        if inc.len() == 1 {
            self.nodes[n].kind = NodeKind::Anchor;
            return false;
        }
        let (e1, e2) = (inc[0], inc[1]);
        let u = self.edges[e1].other(n);
        let v = self.edges[e2].other(n);
        let mut chain = self.edges[e1].chain_from(u);
        let from = chain.last().copied().or(Some(self.nodes[u].position));
        chain.extend(greedy_order(from, std::mem::take(&mut self.nodes[n].pixels)));
        chain.extend(self.edges[e2].chain_from(n));
        self.edges[e1] = Edge::new(u, v, chain);
        self.edges.remove(e2);
        true
    }

    fn compact(&mut self, alive: &[bool]) {
        let mut remap = vec![usize::MAX; self.nodes.len()];
        let mut nodes = Vec::new();
        for (old, node) in std::mem::take(&mut self.nodes).into_iter().enumerate() {
            if alive[old] {
                remap[old] = nodes.len();
                nodes.push(node);
            }
        }
        for (i, n) in nodes.iter_mut().enumerate() {
            n.id = i;
        }
        for e in &mut self.edges {
            e.node_a = remap[e.node_a];
            e.node_b = remap[e.node_b];
        }
        self.nodes = nodes;
        self.sort_canonical();
    }

    /// Orders nodes by position and edges by their node pair and first pixel,
    /// so equal skeletons serialise identically.
    fn sort_canonical(&mut self) {
        let mut order: Vec<NodeId> = (0..self.nodes.len()).collect();
        order.sort_by_key(|&i| (self.nodes[i].position, self.nodes[i].kind as u8));
        let mut remap = vec![0; self.nodes.len()];
        for (new, &old) in order.iter().enumerate() {
            remap[old] = new;
        }
        let mut old_nodes: BTreeMap<usize, Node> = std::mem::take(&mut self.nodes).into_iter().enumerate().collect();
        self.nodes = order
            .iter()
            .enumerate()
            .map(|(new, old)| {
                let mut n = old_nodes.remove(old).unwrap();
                n.id = new;
                n
            })
            .collect();
        for e in &mut self.edges {
            e.node_a = remap[e.node_a];
            e.node_b = remap[e.node_b];
            // End points sit at the `node_b` end, branch-branch edges run
            // from the smaller id.
            let a_end = self.nodes[e.node_a].kind == NodeKind::Endpoint;
            let b_end = self.nodes[e.node_b].kind == NodeKind::Endpoint;
            if (a_end && !b_end) || (a_end == b_end && e.node_a > e.node_b) {
                std::mem::swap(&mut e.node_a, &mut e.node_b);
                e.chain.reverse();
            }
        }
        self.edges.sort_by(|a, b| {
            (a.node_a, a.node_b, a.chain.first()).cmp(&(b.node_a, b.node_b, b.chain.first()))
        });
    }
}
