use crate::error::{Error, Result};
use crate::geom::Pixel;
use crate::raster::Raster;
use crate::record::PlantDayRecord;
use crate::skeleton::{LeafLabel, NodeKind};

pub const SKELETON: [f32; 3] = [1.0, 1.0, 1.0];
pub const LEAF: [f32; 3] = [0.0, 1.0, 1.0];
pub const BRANCH: [f32; 3] = [1.0, 0.0, 0.0];
pub const ENDPOINT: [f32; 3] = [0.0, 0.0, 1.0];
pub const OCCLUDED: [f32; 3] = [1.0, 0.0, 1.0];
pub const SPUR: [f32; 3] = [1.0, 0.5, 0.0];

fn put(img: &mut Raster, p: Pixel, c: [f32; 3]) {
    if p.x >= 0 && p.y >= 0 && (p.x as usize) < img.height() && (p.y as usize) < img.width() {
        for (k, v) in c.iter().enumerate() {
            img.set(p.x as usize, p.y as usize, k, *v);
        }
    }
}

fn square(img: &mut Raster, c: Pixel, r: i32, color: [f32; 3]) {
    for dx in -r..=r {
        for dy in -r..=r {
            put(img, Pixel::new(c.x + dx, c.y + dy), color);
        }
    }
}

/// Every other pixel of a square outline.
fn dashed_ring(img: &mut Raster, c: Pixel, r: i32, color: [f32; 3]) {
    for d in -r..=r {
        if (d + r) % 2 == 0 {
            for p in [
                Pixel::new(c.x - r, c.y + d),
                Pixel::new(c.x + r, c.y + d),
                Pixel::new(c.x + d, c.y - r),
                Pixel::new(c.x + d, c.y + r),
            ] {
                put(img, p, color);
            }
        }
    }
}

fn cross(img: &mut Raster, c: Pixel, r: i32, color: [f32; 3]) {
    for d in -r..=r {
        put(img, Pixel::new(c.x + d, c.y + d), color);
        put(img, Pixel::new(c.x + d, c.y - d), color);
    }
}

/// Draws the record's skeleton and leaves over `base`.
///
/// White skeleton, cyan leaf chains, red 3×3 squares on branch nodes, blue
/// 3×3 squares on end points, dashed magenta squares on occluded leaves
/// (tip position, or along the top-left corner when positionless) and
/// orange crosses on rejected spurs.
pub fn render_overlay(record: &PlantDayRecord, base: &Raster) -> Result<Raster> {
    let g = &record.skeleton;
    if !g.is_empty() && (base.width() != g.width || base.height() != g.height) {
        return Err(Error::invalid(format!(
            "skeleton is {}x{} but the base image is {}x{}",
            g.width,
            g.height,
            base.width(),
            base.height()
        )));
    }
    let mut img = if base.channels() == 3 {
        base.clone()
    } else {
        Raster::from_fn(base.width(), base.height(), |x, y| [base.get(x, y, 0); 3])?
    };
    for e in &g.edges {
        for &p in &e.chain {
            put(&mut img, p, SKELETON);
        }
    }
    for n in &g.nodes {
        for &p in &n.pixels {
            put(&mut img, p, SKELETON);
        }
    }
    for leaf in &record.leaves {
        for &p in leaf.chain.iter().skip(1) {
            put(&mut img, p, LEAF);
        }
    }
    for n in &g.nodes {
        match n.kind {
            NodeKind::Branch => square(&mut img, n.position, 1, BRANCH),
            NodeKind::Endpoint => square(&mut img, n.position, 1, ENDPOINT),
            NodeKind::Anchor => {}
        }
    }
    let mut corner = 0;
    for leaf in record.leaves.iter().filter(|l| l.label == LeafLabel::Occluded) {
        let at = leaf.tip.unwrap_or_else(|| {
            corner += 1;
            Pixel::new(5, 10 * corner - 5)
        });
        dashed_ring(&mut img, at, 4, OCCLUDED);
    }
    for leaf in &record.rejected {
        if let Some(t) = leaf.tip {
            cross(&mut img, t, 3, SPUR);
        }
    }
    Ok(img)
}
