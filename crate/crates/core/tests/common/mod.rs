//! Fixture builders shared by the integration tests.
#![allow(dead_code)]

use maizeleaf::hull::View;
use maizeleaf::raster::BinaryMask;
use maizeleaf::record::{PhaseLeaves, PlantDayRecord, PlantTimeline};
use maizeleaf::skeleton::{extract_graph, identify_stem_and_leaves, LeafCandidate, SkeletonGraph};
use maizeleaf::Pixel;

pub fn px(x: i32, y: i32) -> Pixel {
    Pixel::new(x, y)
}

/// A one-pixel-wide plant drawn from strokes: a vertical stem plus leaves,
/// each leaf a polyline starting on the stem.
#[derive(Debug, Clone)]
pub struct Sketch {
    pub mask: BinaryMask,
    pub stem_col: i32,
}

impl Sketch {
    /// Stem from row `bottom` up to row `top` in column `col`.
    pub fn new(height: usize, width: usize, col: i32, bottom: i32, top: i32) -> Self {
        let mut mask = BinaryMask::new(width, height);
        mask.draw_line(px(bottom, col), px(top, col));
        Self { mask, stem_col: col }
    }

    /// Leaf leaving the stem at `row`; `path` holds offsets `(dx, dy)` from
    /// the attachment point.
    pub fn leaf(mut self, row: i32, path: &[(i32, i32)]) -> Self {
        let start = px(row, self.stem_col);
        let mut pts = vec![start];
        pts.extend(path.iter().map(|&(dx, dy)| px(row + dx, self.stem_col + dy)));
        self.mask.draw_path(&pts);
        self
    }

    /// Straight leaf rising `up` rows over `side` columns (negative: left).
    pub fn straight(self, row: i32, up: i32, side: i32) -> Self {
        self.leaf(row, &[(-up, side)])
    }

    pub fn pixels(mut self, pts: &[(i32, i32)]) -> Self {
        for &(x, y) in pts {
            self.mask.set(px(x, y), true);
        }
        self
    }

    pub fn graph(&self) -> SkeletonGraph {
        extract_graph(&self.mask)
    }
}

pub fn leaf_count(g: &SkeletonGraph) -> usize {
    identify_stem_and_leaves(g).map(|s| s.leaves.len()).unwrap_or(0)
}

pub fn leaf_tips(g: &SkeletonGraph) -> Vec<Pixel> {
    let mut t: Vec<Pixel> = identify_stem_and_leaves(g)
        .map(|s| s.leaves.iter().filter_map(|l| l.tip).collect())
        .unwrap_or_default();
    t.sort();
    t
}

/// Every pixel within Chebyshev distance `r` of the mask.
pub fn dilate(m: &BinaryMask, r: i32) -> BinaryMask {
    let mut out = m.clone();
    for p in m.pixels() {
        for dx in -r..=r {
            for dy in -r..=r {
                out.set(px(p.x + dx, p.y + dy), true);
            }
        }
    }
    out
}

/// A detected leaf with a straight chain from `branch` to `tip`.
pub fn leaf(branch: (i32, i32), tip: (i32, i32)) -> LeafCandidate {
    let (b, t) = (Pixel::from(branch), Pixel::from(tip));
    let n = (t.x - b.x).abs().max((t.y - b.y).abs()).max(1);
    let chain = (0..=n)
        .map(|i| {
            px(
                b.x + ((t.x - b.x) as f64 * i as f64 / n as f64).round() as i32,
                b.y + ((t.y - b.y) as f64 * i as f64 / n as f64).round() as i32,
            )
        })
        .collect();
    LeafCandidate::from_chain(chain)
}

pub fn record(plant: &str, day: u32, dse: u32, view: View, leaves: Vec<LeafCandidate>) -> PlantDayRecord {
    PlantDayRecord {
        plant_id: plant.to_string(),
        day,
        days_since_emergence: dse,
        chosen_view: view,
        hull_area0: 0.0,
        hull_area90: 0.0,
        leaves,
        rejected: Vec::new(),
        skeleton: SkeletonGraph::empty(64, 64),
        phases: PhaseLeaves::default(),
        audit: Vec::new(),
    }
}

/// Five well-separated leaves on alternating sides of a stem at column 200.
pub fn five_leaves() -> Vec<LeafCandidate> {
    (0..5)
        .map(|k| {
            let row = 400 - 60 * k;
            let side = if k % 2 == 0 { 1 } else { -1 };
            leaf((row, 200), (row - 40, 200 + side * 70))
        })
        .collect()
}

/// Timeline with the given per-day counts, first day at `first_dse` days
/// since emergence, all in view 0. Days with 5 leaves carry
/// [`five_leaves`]; days with 4 drop the third of them.
pub fn timeline(counts: &[usize], first_dse: u32) -> PlantTimeline {
    let base = five_leaves();
    let records = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let leaves: Vec<LeafCandidate> = match c {
                4 => base.iter().enumerate().filter(|&(k, _)| k != 2).map(|(_, l)| l.clone()).collect(),
                5 => base.clone(),
                n => panic!("no fixture for {n} leaves"),
            };
            record("p", i as u32 + 1, first_dse + i as u32, View::View0, leaves)
        })
        .collect();
    PlantTimeline {
        plant_id: "p".into(),
        records,
    }
}

/// Four leaves on every day; days with a count of 5 add a short fifth leaf
/// near the stem base.
pub fn spur_timeline(counts: &[usize], first_dse: u32) -> PlantTimeline {
    let base: Vec<LeafCandidate> = five_leaves().into_iter().take(4).collect();
    let spur = leaf((430, 200), (424, 206));
    let records = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let mut leaves = base.clone();
            match c {
                4 => {}
                5 => leaves.push(spur.clone()),
                n => panic!("no fixture for {n} leaves"),
            }
            record("p", i as u32 + 1, first_dse + i as u32, View::View0, leaves)
        })
        .collect();
    PlantTimeline {
        plant_id: "p".into(),
        records,
    }
}

// Heuristic rule fixtures. Leaves rise at a shallow angle (20 rows over 30
// columns) so the stem is unambiguous and the tub rule keeps them.

/// Tall plant (2000 rows) with a leaf near the top carrying a spur of
/// `spur_len` pixels on its diagonal, and the same leaf shape near the
/// bottom. `upper` selects which of the two carries the spur.
pub fn one_pixel_spur_plant(spur_len: i32, upper: bool) -> Sketch {
    let s = Sketch::new(2000, 200, 100, 1990, 100)
        .leaf(250, &[(-40, 40)])
        .leaf(1930, &[(-40, 40)]);
    // Diagonal pixels are (row - k, 100 + k); a pixel two columns right of
    // one touches only the next diagonal pixel.
    let row = if upper { 250 } else { 1930 };
    let k = 20;
    let pts: Vec<(i32, i32)> = (0..spur_len).map(|i| (row - k, 100 + k + 2 + i)).collect();
    s.pixels(&pts)
}

pub fn alternating(rows: &[i32]) -> Sketch {
    let mut s = Sketch::new(300, 200, 100, 290, 30);
    for (i, &r) in rows.iter().enumerate() {
        let side = if i % 2 == 0 { 30 } else { -30 };
        s = s.straight(r, 20, side);
    }
    s
}

/// Stem with one leaf; the leaf ends `dx` rows below and `dy` columns right
/// of its branch point, reached through a short diagonal step so it never
/// runs along the stem.
pub fn tub_plant(dx: i32, dy: i32) -> Sketch {
    Sketch::new(300, 200, 100, 290, 30)
        .straight(80, 20, -30)
        .leaf(200, &[(2, 2), (dx, dy)])
}

/// Stem with a steep lower leaf whose vector makes `angle` degrees with the
/// stem, plus an upper leaf. Returns the sketch and a silhouette mask.
pub fn boundary_plant(angle_deg: f64) -> (Sketch, BinaryMask) {
    let len = 40.0;
    let (up, side) = (
        (len * angle_deg.to_radians().cos()).round() as i32,
        (len * angle_deg.to_radians().sin()).round() as i32,
    );
    let s = Sketch::new(300, 200, 100, 290, 30)
        .straight(80, 20, -30)
        .leaf(220, &[(-2, 4), (-up, side)]);
    let silhouette = dilate(&s.mask, 1);
    (s, silhouette)
}

/// Lowest branch point with the stem going up plus two leaves: one rising
/// `long` pixels to the right, one falling `short` pixels to the left.
pub fn triple_plant(long: i32, short: i32) -> Sketch {
    Sketch::new(300, 200, 100, 290, 30)
        .leaf(200, &[(-long, long)])
        .leaf(200, &[(short, -short)])
}

/// A vertical skeleton of exactly `total` pixels with one diagonal end
/// branch per entry of `spurs`, each carrying that many edge pixels.
pub fn dse_fixture(total: usize, spurs: &[usize]) -> SkeletonGraph {
    let height = total + 20;
    let bottom = total as i32 + 10;
    let attach = |i: usize| bottom - 200 - 60 * i as i32;
    let build = |stem_len: i32| {
        let mut m = BinaryMask::new(40, height);
        m.draw_line(px(bottom, 10), px(bottom - stem_len + 1, 10));
        for (i, &s) in spurs.iter().enumerate() {
            // The first diagonal pixel joins the junction cluster.
            let r = attach(i);
            m.draw_line(px(r - 1, 11), px(r - 1 - s as i32, 11 + s as i32));
        }
        m
    };
    let extra: usize = spurs.iter().map(|s| s + 1).sum();
    let m = build((total - extra) as i32);
    let g = extract_graph(&m);
    assert_eq!(g.pixel_count(), total);
    let mut lens: Vec<usize> = (0..g.edges.len())
        .filter(|&e| g.endpoint_edge(e).is_some())
        .map(|e| g.edges[e].length)
        .filter(|&l| l < 100)
        .collect();
    lens.sort();
    let mut want = spurs.to_vec();
    want.sort();
    assert_eq!(lens, want, "fixture edge areas");
    g
}

// Brute-force oracles.

/// Minimum score over all injections of rows into columns, and the
/// lexicographically smallest injection reaching it.
pub fn brute_force_assignment(costs: &[Vec<i64>]) -> (i64, Vec<usize>) {
    let rows = costs.len();
    let cols = costs.first().map_or(0, Vec::len);
    let mut best: Option<(i64, Vec<usize>)> = None;
    let mut cur = Vec::with_capacity(rows);
    let mut used = vec![false; cols];
    fn rec(
        costs: &[Vec<i64>],
        cur: &mut Vec<usize>,
        used: &mut [bool],
        sum: i64,
        best: &mut Option<(i64, Vec<usize>)>,
    ) {
        if cur.len() == costs.len() {
            // Enumeration is in lexicographic order, so only a strictly
            // better score replaces the incumbent.
            if best.as_ref().map_or(true, |(s, _)| sum < *s) {
                *best = Some((sum, cur.clone()));
            }
            return;
        }
        let r = cur.len();
        for c in 0..used.len() {
            if !used[c] {
                used[c] = true;
                cur.push(c);
                rec(costs, cur, used, sum + costs[r][c], best);
                cur.pop();
                used[c] = false;
            }
        }
    }
    rec(costs, &mut cur, &mut used, 0, &mut best);
    best.unwrap_or((0, Vec::new()))
}

/// Exhaustive Otsu: the bin `t` maximising the between-class variance of
/// the split `[0, t] | [t+1, 255]`, smallest on ties; `None` when every
/// split has zero variance. Variances are compared exactly as fractions
/// `(W*S0 - W0*S)^2 / (W0*W1)`.
pub fn brute_force_otsu(counts: &[u64; 256]) -> Option<u8> {
    let w: u128 = counts.iter().map(|&c| c as u128).sum();
    let s: u128 = counts.iter().enumerate().map(|(i, &c)| i as u128 * c as u128).sum();
    let mut best: Option<(u128, u128, u8)> = None; // numerator, denominator, bin
    for t in 0..255usize {
        let w0: u128 = counts[..=t].iter().map(|&c| c as u128).sum();
        let w1 = w - w0;
        if w0 == 0 || w1 == 0 {
            continue;
        }
        let s0: u128 = counts[..=t].iter().enumerate().map(|(i, &c)| i as u128 * c as u128).sum();
        let diff = (w * s0).abs_diff(w0 * s);
        let num = diff * diff;
        let den = w0 * w1;
        if num == 0 {
            continue;
        }
        let better = match best {
            None => true,
            Some((bn, bd, _)) => num * bd > bn * den,
        };
        if better {
            best = Some((num, den, t as u8));
        }
    }
    best.map(|(_, _, t)| t)
}

/// Hull vertices by brute force: a point is a vertex when it is not inside
/// or on the boundary of any triangle of the others and not strictly
/// between two others on a segment. Returned with twice the hull area.
pub fn brute_force_hull(points: &[Pixel]) -> (Vec<Pixel>, i64) {
    let mut pts: Vec<Pixel> = points.to_vec();
    pts.sort();
    pts.dedup();
    let cross = |o: Pixel, a: Pixel, b: Pixel| {
        i64::from(a.x - o.x) * i64::from(b.y - o.y) - i64::from(a.y - o.y) * i64::from(b.x - o.x)
    };
    let n = pts.len();
    let mut verts = Vec::new();
    'p: for i in 0..n {
        let p = pts[i];
        for a in 0..n {
            for b in 0..n {
                if a == i || b == i || a == b {
                    continue;
                }
                let (pa, pb) = (pts[a], pts[b]);
                // strictly inside segment
                if cross(pa, pb, p) == 0
                    && (p.x - pa.x) * (p.x - pb.x) <= 0
                    && (p.y - pa.y) * (p.y - pb.y) <= 0
                {
                    continue 'p;
                }
                for c in 0..n {
                    if c == i || c == a || c == b {
                        continue;
                    }
                    let pc = pts[c];
                    let (d1, d2, d3) = (cross(pa, pb, p), cross(pb, pc, p), cross(pc, pa, p));
                    let area = cross(pa, pb, pc);
                    if area != 0 && ((d1 >= 0 && d2 >= 0 && d3 >= 0) || (d1 <= 0 && d2 <= 0 && d3 <= 0)) {
                        continue 'p;
                    }
                }
            }
        }
        verts.push(p);
    }
    // Order around the centroid and use the shoelace formula.
    let (cx, cy) = verts.iter().fold((0.0, 0.0), |(x, y), p| (x + p.x as f64, y + p.y as f64));
    let k = verts.len().max(1) as f64;
    let (cx, cy) = (cx / k, cy / k);
    let mut ordered = verts.clone();
    ordered.sort_by(|a, b| {
        let ta = (a.y as f64 - cy).atan2(a.x as f64 - cx);
        let tb = (b.y as f64 - cy).atan2(b.x as f64 - cx);
        ta.partial_cmp(&tb).unwrap()
    });
    let mut twice = 0i64;
    for i in 0..ordered.len() {
        let (a, b) = (ordered[i], ordered[(i + 1) % ordered.len()]);
        twice += i64::from(a.x) * i64::from(b.y) - i64::from(b.x) * i64::from(a.y);
    }
    verts.sort();
    (verts, twice.abs())
}

fn disk(h: usize, w: usize, c: (f64, f64), r: f64) -> BinaryMask {
    BinaryMask::from_fn(w, h, |x, y| {
        let (dx, dy) = (x as f64 - c.0, y as f64 - c.1);
        dx * dx + dy * dy <= r * r
    })
}

fn thick_line(h: usize, w: usize, a: (i32, i32), b: (i32, i32), r: i32) -> BinaryMask {
    let mut m = BinaryMask::new(w, h);
    m.draw_line(px(a.0, a.1), px(b.0, b.1));
    dilate(&m, r)
}

/// Named binary shapes: lines, rectangles, crosses, disks, rings, blobs
/// with holes, and silhouettes of synthetic plants.
pub fn thinning_corpus() -> Vec<(String, BinaryMask)> {
    use maizeleaf::pipeline::synth::{make_plant, render_background, render_plant_day, SynthParams};
    use maizeleaf::raster::{segment_plant, SegmentationParams};

    let mut out: Vec<(String, BinaryMask)> = Vec::new();
    let mut add = |name: String, m: BinaryMask| out.push((name, m));
    for (i, r) in [0, 1, 2, 4].into_iter().enumerate() {
        add(format!("hline_r{r}"), thick_line(40, 60, (20, 5), (20, 55), r));
        add(format!("diag_r{r}"), thick_line(60, 60, (5, 5), (54, 50 - i as i32), r));
    }
    for (h, w) in [(2, 2), (3, 3), (2, 9), (5, 20), (12, 12), (20, 7)] {
        add(
            format!("rect_{h}x{w}"),
            BinaryMask::from_fn(w + 6, h + 6, |x, y| (3..3 + h).contains(&x) && (3..3 + w).contains(&y)),
        );
    }
    for r in [1, 2, 3] {
        let mut m = thick_line(50, 50, (25, 4), (25, 45), r);
        let v = thick_line(50, 50, (4, 25), (45, 25), r);
        m = BinaryMask::from_fn(50, 50, |x, y| m.at(x, y) || v.at(x, y));
        add(format!("cross_r{r}"), m);
    }
    for r in [1.5, 4.0, 9.0, 15.0] {
        add(format!("disk_{r}"), disk(40, 40, (19.5, 19.5), r));
    }
    for (ro, ri) in [(10.0, 6.0), (16.0, 13.0)] {
        let outer = disk(40, 40, (20.0, 20.0), ro);
        let inner = disk(40, 40, (20.0, 20.0), ri);
        add(format!("ring_{ro}_{ri}"), BinaryMask::from_fn(40, 40, |x, y| outer.at(x, y) && !inner.at(x, y)));
    }
    let two = BinaryMask::from_fn(30, 30, |x, y| (x < 10 && y < 10) || (x > 15 && y > 15 && x < 28));
    add("two_blobs".into(), two);
    let l = BinaryMask::from_fn(30, 30, |x, y| (5..25).contains(&x) && (5..9).contains(&y) || (21..25).contains(&x) && (5..25).contains(&y));
    add("l_shape".into(), l);
    let checker = BinaryMask::from_fn(12, 12, |x, y| (x + y) % 2 == 0 && (2..10).contains(&x) && (2..10).contains(&y));
    add("diagonal_lattice".into(), checker);

    let params = SynthParams::default();
    let bg = render_background(params.width, params.height);
    for (i, day) in [(0usize, 6u32), (1, 12), (2, 18), (3, 24), (4, 27)] {
        let plant = make_plant(i, &params);
        for view in [View::View0, View::View90] {
            let (img, _) = render_plant_day(&plant, day, view);
            let m = segment_plant(&img, &bg, &SegmentationParams::default()).unwrap();
            add(format!("plant{i}_day{day}_view{view}"), m);
        }
    }
    out
}
