//! Two thinning algorithms and the day-based dispatch between them.
//!
//! Neighbourhood indices follow [`Pixel::neighbors8`]: N, NE, E, SE, S, SW,
//! W, NW. In Zhang–Suen notation these are P2..P9.

use crate::error::{Error, Result};
use crate::geom::Pixel;
use crate::raster::BinaryMask;

/// Last day since emergence handled by [`thin_fast_parallel`]; later days use
/// [`thin_medial_axis`].
pub const LAST_FAST_PARALLEL_DAY: u32 = 10;

#[inline]
fn neighborhood(mask: &BinaryMask, p: Pixel) -> [bool; 8] {
    let n = p.neighbors8();
    std::array::from_fn(|i| mask.get(n[i]))
}

/// Yokoi's 8-connectivity number. A foreground pixel is simple (its removal
/// leaves the topology unchanged) exactly when this is 1.
#[inline]
fn connectivity_number(nb: &[bool; 8]) -> u32 {
    let bg = |k: usize| u32::from(!nb[k % 8]);
    [0usize, 2, 4, 6]
        .iter()
        .map(|&k| bg(k) - bg(k) * bg(k + 1) * bg(k + 2))
        .sum()
}

/// True when deleting foreground pixel `p` preserves the local topology.
pub fn is_simple(mask: &BinaryMask, p: Pixel) -> bool {
    connectivity_number(&neighborhood(mask, p)) == 1
}

/// Checks that the skeleton is one pixel wide: no pixel of a fully occupied
/// 2×2 block may be simple. Every pixel of such a block has at least three
/// neighbours, so blocks that survive are junction knots, not thick strokes.
pub fn is_one_pixel_wide(skel: &BinaryMask) -> bool {
    for x in 0..skel.height().saturating_sub(1) {
        for y in 0..skel.width().saturating_sub(1) {
            let block = [
                Pixel::new(x as i32, y as i32),
                Pixel::new(x as i32, y as i32 + 1),
                Pixel::new(x as i32 + 1, y as i32),
                Pixel::new(x as i32 + 1, y as i32 + 1),
            ];
            if block.iter().all(|&p| skel.get(p)) && block.iter().any(|&p| is_simple(skel, p)) {
                return false;
            }
        }
    }
    true
}

/// Zhang–Suen fast parallel thinning.
///
/// Each pass runs two sub-iterations; within a sub-iteration all deletable
/// border pixels are flagged against the same image and removed together.
/// The classic rules erase 2×2 squares completely, so one pixel of any
/// component whose every pixel got flagged is kept back; this is the only
/// departure from the textbook rules and it keeps the component count.
pub fn thin_fast_parallel(mask: &BinaryMask) -> BinaryMask {
    let mut img = mask.clone();
    let mut live: Vec<Pixel> = img.pixels().collect();
    loop {
        let mut changed = false;
        for first in [true, false] {
            let flagged: Vec<Pixel> = live
                .iter()
                .copied()
                .filter(|&p| zhang_suen_deletable(&neighborhood(&img, p), first))
                .collect();
            if flagged.is_empty() {
                continue;
            }
            let mut flag = BinaryMask::from_pixels(img.width(), img.height(), flagged.iter().copied());
            spare_annihilated_components(&img, &mut flag, &flagged);
            for &p in &flagged {
                if flag.get(p) {
                    img.set(p, false);
                    changed = true;
                }
            }
            live.retain(|&p| img.get(p));
        }
        if !changed {
            return img;
        }
    }
}

fn zhang_suen_deletable(nb: &[bool; 8], first: bool) -> bool {
    let b = nb.iter().filter(|&&v| v).count();
    if !(2..=6).contains(&b) {
        return false;
    }
    let a = (0..8).filter(|&k| !nb[k] && nb[(k + 1) % 8]).count();
    if a != 1 {
        return false;
    }
    let [p2, _, p4, _, p6, _, p8, _] = *nb;
    if first {
        !(p2 && p4 && p6) && !(p4 && p6 && p8)
    } else {
        !(p2 && p4 && p8) && !(p2 && p6 && p8)
    }
}

/// Unflags the first pixel (raster order) of every component that would be
/// deleted entirely.
fn spare_annihilated_components(img: &BinaryMask, flag: &mut BinaryMask, flagged: &[Pixel]) {
    let mut visited = BinaryMask::new(img.width(), img.height());
    for &start in flagged {
        if visited.get(start) || !flag.get(start) {
            continue;
        }
        if start.neighbors8().iter().any(|&q| img.get(q) && !flag.get(q)) {
            continue;
        }
        let mut stack = vec![start];
        let mut comp = vec![start];
        visited.set(start, true);
        let mut survives = false;
        while let Some(p) = stack.pop() {
            for q in p.neighbors8() {
                if !img.get(q) || visited.get(q) {
                    continue;
                }
                if !flag.get(q) {
                    survives = true;
                    break;
                }
                visited.set(q, true);
                comp.push(q);
                stack.push(q);
            }
            if survives {
                break;
            }
        }
        if !survives {
            if let Some(&keep) = comp.iter().min() {
                flag.set(keep, false);
            }
        }
    }
}

/// Connectivity-preserving medial-axis thinning: the 2D (single slice)
/// form of the Lee–Kashyap–Chu sweep.
///
/// Each sweep visits the four border directions in turn. For a direction,
/// every simple, non-end border pixel is collected first; the list is then
/// re-checked pixel by pixel against the current image before each removal.
/// Sweeps repeat until an entire sweep removes nothing.
pub fn thin_medial_axis(mask: &BinaryMask) -> BinaryMask {
    let mut img = mask.clone();
    let mut live: Vec<Pixel> = img.pixels().collect();
    // N, S, E, W as indices into neighbors8.
    const BORDERS: [usize; 4] = [0, 4, 2, 6];
    loop {
        let mut changed = false;
        for dir in BORDERS {
            let candidates: Vec<Pixel> = live
                .iter()
                .copied()
                .filter(|&p| {
                    let nb = neighborhood(&img, p);
                    !nb[dir] && removable(&nb)
                })
                .collect();
            let mut removed_any = false;
            for p in candidates {
                if removable(&neighborhood(&img, p)) {
                    img.set(p, false);
                    removed_any = true;
                }
            }
            if removed_any {
                changed = true;
                live.retain(|&p| img.get(p));
            }
        }
        if !changed {
            return img;
        }
    }
}

#[inline]
fn removable(nb: &[bool; 8]) -> bool {
    nb.iter().filter(|&&v| v).count() != 1 && connectivity_number(nb) == 1
}

/// Day-gated thinning: fast parallel thinning for days `1..=10` since
/// emergence, medial-axis thinning afterwards.
pub fn skeletonize(mask: &BinaryMask, days_since_emergence: u32) -> Result<BinaryMask> {
    skeletonize_with_cutoff(mask, days_since_emergence, LAST_FAST_PARALLEL_DAY)
}

/// [`skeletonize`] with a configurable last fast-parallel day.
pub fn skeletonize_with_cutoff(mask: &BinaryMask, days_since_emergence: u32, last_fast_day: u32) -> Result<BinaryMask> {
    if days_since_emergence < 1 {
        return Err(Error::invalid("days since emergence must be at least 1"));
    }
    Ok(if days_since_emergence <= last_fast_day {
        thin_fast_parallel(mask)
    } else {
        thin_medial_axis(mask)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn connectivity_number_cases() {
        let none = [false; 8];
        assert_eq!(connectivity_number(&none), 0);
        // end of a line
        let mut end = [false; 8];
        end[2] = true;
        assert_eq!(connectivity_number(&end), 1);
        // middle of a horizontal line: E and W
        let mut mid = [false; 8];
        mid[2] = true;
        mid[6] = true;
        assert_eq!(connectivity_number(&mid), 2);
        // interior
        assert_eq!(connectivity_number(&[true; 8]), 0);
    }

    #[test]
    fn two_by_two_square_survives_fast_thinning() {
        let m = BinaryMask::from_ascii(
            "
            ....
            .##.
            .##.
            ....
            ",
        );
        let s = thin_fast_parallel(&m);
        assert_eq!(s.component_count(), 1);
        assert!(s.is_subset_of(&m));
        assert!(is_one_pixel_wide(&s));
    }

    #[test]
    fn thin_line_unchanged_by_both() {
        let m = BinaryMask::from_fn(24, 3, |x, y| x == 1 && (2..22).contains(&y));
        assert_eq!(thin_fast_parallel(&m), m);
        assert_eq!(thin_medial_axis(&m), m);
    }

    #[test]
    fn empty_mask_is_empty_skeleton() {
        let m = BinaryMask::new(5, 5);
        assert!(thin_fast_parallel(&m).is_empty());
        assert!(thin_medial_axis(&m).is_empty());
    }

    #[test]
    fn dispatch_by_day() {
        let m = BinaryMask::from_fn(30, 30, |x, y| (5..25).contains(&x) && (8..20).contains(&y));
        assert!(skeletonize(&m, 0).is_err());
        assert_eq!(skeletonize(&m, 1).unwrap(), thin_fast_parallel(&m));
        assert_eq!(skeletonize(&m, 10).unwrap(), thin_fast_parallel(&m));
        assert_eq!(skeletonize(&m, 11).unwrap(), thin_medial_axis(&m));
    }

    #[test]
    fn one_pixel_wide_detects_thick_blocks() {
        let thick = BinaryMask::from_fn(6, 6, |x, y| (1..4).contains(&x) && (1..4).contains(&y));
        assert!(!is_one_pixel_wide(&thick));
    }
}
