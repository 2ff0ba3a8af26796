use serde::{Deserialize, Serialize};

use super::hungarian::{hungarian_min_cost, CostMatrix};
use crate::error::{Error, Result};
use crate::record::{AuditAction, AuditEntry, PlantDayRecord, PlantTimeline};
use crate::skeleton::{LeafCandidate, LeafLabel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconcileParams {
    /// Neighbour days considered on each side.
    pub window: u32,
    /// Matches costing more than this many pixels are discarded.
    pub match_accept_threshold: f64,
    /// Fastest leaf appearance, in days per leaf.
    pub leaf_rate_min: f64,
    /// Slowest leaf appearance, in days per leaf.
    pub leaf_rate_max: f64,
    pub tenth_leaf_cap: u32,
    /// Neighbour days (out of `2 * window`) that must agree.
    pub consensus_quorum: u32,
}

impl Default for ReconcileParams {
    fn default() -> Self {
        Self {
            window: 3,
            match_accept_threshold: 150.0,
            leaf_rate_min: 2.0,
            leaf_rate_max: 3.0,
            tenth_leaf_cap: 10,
            consensus_quorum: 4,
        }
    }
}

impl ReconcileParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("reconcile.{what}")));
        if self.window == 0 {
            return bad("window must be at least 1");
        }
        if !(self.leaf_rate_min > 0.0 && self.leaf_rate_min <= self.leaf_rate_max) {
            return bad("leaf rates must satisfy 0 < leaf_rate_min <= leaf_rate_max");
        }
        if !(self.match_accept_threshold >= 0.0) {
            return bad("match_accept_threshold must be non-negative");
        }
        if self.consensus_quorum == 0 || self.consensus_quorum > 2 * self.window {
            return bad("consensus_quorum must lie in 1..=2*window");
        }
        if self.tenth_leaf_cap == 0 {
            return bad("tenth_leaf_cap must be positive");
        }
        Ok(())
    }
}

/// Tip distance plus branch-point distance.
pub fn leaf_cost(a: &LeafCandidate, b: &LeafCandidate) -> Result<f64> {
    match (a.tip, a.branch, b.tip, b.branch) {
        (Some(ta), Some(ba), Some(tb), Some(bb)) => Ok(ta.dist(tb) + ba.dist(bb)),
        _ => Err(Error::invalid("leaf cost needs tip and branch positions on both leaves")),
    }
}

/// Plausible leaf counts `d` days after emergence, given that a new leaf
/// appears every `leaf_rate_min..=leaf_rate_max` days.
pub fn expected_leaf_range(days_since_emergence: u32, p: &ReconcileParams) -> Result<(u32, u32)> {
    if days_since_emergence < 1 {
        return Err(Error::invalid("days since emergence must be at least 1"));
    }
    let d = f64::from(days_since_emergence - 1);
    let lo = 1 + (d / p.leaf_rate_max).floor() as u32;
    let hi = 1 + (d / p.leaf_rate_min).ceil() as u32;
    Ok((lo.min(p.tenth_leaf_cap), hi.min(p.tenth_leaf_cap)))
}

/// Kept matches between two days plus the leaves left over on each side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafMatching {
    /// `(leaf index on day i, leaf index on day j, cost)`.
    pub pairs: Vec<(usize, usize, f64)>,
    pub unmatched_i: Vec<usize>,
    pub unmatched_j: Vec<usize>,
}

pub fn match_leaves(day_i: &PlantDayRecord, day_j: &PlantDayRecord, p: &ReconcileParams) -> Result<LeafMatching> {
    if day_i.chosen_view != day_j.chosen_view {
        return Err(Error::ViewMismatch(day_i.chosen_view.degrees(), day_j.chosen_view.degrees()));
    }
    let (a, b) = (&day_i.leaves, &day_j.leaves);
    let transpose = a.len() > b.len();
    let (rows, cols) = if transpose { (b, a) } else { (a, b) };
    let mut costs = Vec::with_capacity(rows.len() * cols.len());
    for r in rows {
        for c in cols {
            costs.push(leaf_cost(r, c)?);
        }
    }
    let m = CostMatrix::new(rows.len(), cols.len(), costs)?;
    let sol = hungarian_min_cost(&m);

    let mut used_i = vec![false; a.len()];
    let mut used_j = vec![false; b.len()];
    let mut pairs = Vec::new();
    for (r, &c) in sol.assignment.iter().enumerate() {
        let cost = m.get(r, c);
        if cost > p.match_accept_threshold {
            continue;
        }
        let (i, j) = if transpose { (c, r) } else { (r, c) };
        used_i[i] = true;
        used_j[j] = true;
        pairs.push((i, j, cost));
    }
    pairs.sort_by_key(|&(i, j, _)| (i, j));
    Ok(LeafMatching {
        pairs,
        unmatched_i: (0..a.len()).filter(|&i| !used_i[i]).collect(),
        unmatched_j: (0..b.len()).filter(|&j| !used_j[j]).collect(),
    })
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Flag {
    MissingLeaf,
    Spur,
}

/// One pass of count reconciliation over a plant's timeline.
///
/// A day whose count lies outside the expected range is compared with the
/// emerged days at most `window` days away. If a quorum of them has more
/// leaves, an occluded leaf copied from the nearest same-view such day is
/// inserted; if a quorum has fewer, the day's leaf that finds no partner on
/// the nearest same-view such day is removed as a spur. The quorum is scaled
/// to the number of neighbours available (rounding up). All decisions read
/// the timeline as it was before the pass.
pub fn reconcile_timeline(tl: &PlantTimeline, p: &ReconcileParams) -> Result<PlantTimeline> {
    let mut out = tl.clone();
    if tl.records.len() < 2 {
        return Ok(out);
    }
    let recs = &tl.records;
    for (k, rec) in recs.iter().enumerate() {
        if !rec.emerged() {
            continue;
        }
        let count = rec.leaf_count();
        let (lo, hi) = expected_leaf_range(rec.days_since_emergence, p)?;
        if (lo as usize..=hi as usize).contains(&count) {
            continue;
        }
        let neighbours: Vec<&PlantDayRecord> = recs
            .iter()
            .filter(|r| r.emerged() && r.day != rec.day && r.day.abs_diff(rec.day) <= p.window)
            .collect();
        if neighbours.is_empty() {
            continue;
        }
        let quorum = (p.consensus_quorum as usize * neighbours.len()).div_ceil(2 * p.window as usize);
        let more = neighbours.iter().filter(|r| r.leaf_count() > count).count();
        let fewer = neighbours.iter().filter(|r| r.leaf_count() < count).count();
        let flag = match (more >= quorum, fewer >= quorum) {
            (true, false) => Flag::MissingLeaf,
            (false, true) => Flag::Spur,
            _ => continue,
        };
        // Nearest same-view neighbour on the flagged side; earlier day wins
        // ties.
        let partner = neighbours
            .iter()
            .filter(|r| r.chosen_view == rec.chosen_view)
            .filter(|r| match flag {
                Flag::MissingLeaf => r.leaf_count() > count,
                Flag::Spur => r.leaf_count() < count,
            })
            .min_by_key(|r| (r.day.abs_diff(rec.day), r.day))
            .copied();
        let target = &mut out.records[k];
        match flag {
            Flag::MissingLeaf => insert_missing(target, rec, partner, p)?,
            Flag::Spur => remove_spur(target, rec, partner, p)?,
        }
    }
    Ok(out)
}

fn audit(rec: &PlantDayRecord, rule: &str, action: AuditAction) -> AuditEntry {
    AuditEntry {
        plant: rec.plant_id.clone(),
        day: rec.day,
        rule: rule.to_string(),
        action,
        deleted_edge_tip: None,
        deleted_edge_branch: None,
        inserted_tip: None,
        inserted_branch: None,
    }
}

fn positioned(r: &PlantDayRecord) -> bool {
    r.leaves.iter().all(|l| l.tip.is_some() && l.branch.is_some())
}

fn insert_missing(
    target: &mut PlantDayRecord,
    orig: &PlantDayRecord,
    partner: Option<&PlantDayRecord>,
    p: &ReconcileParams,
) -> Result<()> {
    let copied = match partner {
        Some(n) if positioned(orig) && positioned(n) => {
            let m = match_leaves(orig, n, p)?;
            // The longest leftover leaf is the most trustworthy to copy.
            m.unmatched_j
                .iter()
                .map(|&j| &n.leaves[j])
                .max_by_key(|l| l.length)
                .map(|l| LeafCandidate::occluded_copy(l, n.day))
        }
        _ => None,
    };
    let leaf = copied.unwrap_or_else(LeafCandidate::count_only);
    let mut entry = audit(orig, "reconcile_missing_leaf", AuditAction::Insert);
    entry.inserted_tip = leaf.tip;
    entry.inserted_branch = leaf.branch;
    target.audit.push(entry);
    target.leaves.push(leaf);
    Ok(())
}

fn remove_spur(
    target: &mut PlantDayRecord,
    orig: &PlantDayRecord,
    partner: Option<&PlantDayRecord>,
    p: &ReconcileParams,
) -> Result<()> {
    let shortest = |idx: &mut dyn Iterator<Item = usize>| {
        idx.filter(|&i| orig.leaves[i].label != LeafLabel::Occluded)
            .min_by_key(|&i| (orig.leaves[i].length, i))
    };
    let pick = match partner {
        Some(n) if positioned(orig) && positioned(n) => {
            let m = match_leaves(orig, n, p)?;
            shortest(&mut m.unmatched_i.into_iter())
        }
        _ => None,
    }
    .or_else(|| shortest(&mut (0..orig.leaves.len())));
    let Some(i) = pick else { return Ok(()) };
    let mut leaf = target.leaves.remove(i);
    leaf.label = LeafLabel::Spur;
    let mut entry = audit(orig, "reconcile_spur", AuditAction::Delete);
    entry.deleted_edge_tip = leaf.tip;
    entry.deleted_edge_branch = leaf.branch;
    target.audit.push(entry);
    target.rejected.push(leaf);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Pixel;

    #[test]
    fn range_examples() {
        let p = ReconcileParams::default();
        assert_eq!(expected_leaf_range(1, &p).unwrap(), (1, 1));
        assert_eq!(expected_leaf_range(7, &p).unwrap(), (3, 4));
        assert_eq!(expected_leaf_range(30, &p).unwrap(), (10, 10));
        assert!(expected_leaf_range(0, &p).is_err());
    }

    #[test]
    fn cost_examples() {
        let leaf = |b: (i32, i32), t: (i32, i32)| LeafCandidate::from_chain(vec![Pixel::from(b), Pixel::from(t)]);
        let a = leaf((5, 5), (10, 10));
        let b = leaf((8, 9), (13, 14));
        assert_eq!(leaf_cost(&a, &a).unwrap(), 0.0);
        assert_eq!(leaf_cost(&a, &b).unwrap(), 10.0);
        assert_eq!(leaf_cost(&leaf((0, 0), (0, 7)), &leaf((0, 0), (0, 0))).unwrap(), 7.0);
        assert!(leaf_cost(&a, &LeafCandidate::count_only()).is_err());
    }
}
