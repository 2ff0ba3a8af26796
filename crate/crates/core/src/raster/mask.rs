use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::Pixel;

/// Row-major boolean occupancy grid. `x` is the row, `y` the column.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    /// All-background mask. Panics on a zero dimension.
    pub fn new(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "mask dimensions must be positive");
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Self::new(width, height);
        for x in 0..height {
            for y in 0..width {
                m.bits[x * width + y] = f(x, y);
            }
        }
        m
    }

    /// Builds a mask from foreground pixels; pixels outside the frame are ignored.
    pub fn from_pixels(width: usize, height: usize, pixels: impl IntoIterator<Item = Pixel>) -> Self {
        let mut m = Self::new(width, height);
        for p in pixels {
            m.set(p, true);
        }
        m
    }

    /// Parses an ASCII picture: `#` (or `1`) is foreground, anything else
    /// background. Lines must have equal length. Handy for fixtures.
    pub fn from_ascii(art: &str) -> Self {
        let rows: Vec<&str> = art
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect();
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.chars().count());
        assert!(rows.iter().all(|r| r.chars().count() == width), "ragged ascii mask");
        Self::from_fn(width, height, |x, y| {
            matches!(rows[x].chars().nth(y), Some('#') | Some('1'))
        })
    }

    pub fn to_ascii(&self) -> String {
        let mut s = String::with_capacity((self.width + 1) * self.height);
        for x in 0..self.height {
            for y in 0..self.width {
                s.push(if self.bits[x * self.width + y] { '#' } else { '.' });
            }
            s.push('\n');
        }
        s
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn in_bounds(&self, p: Pixel) -> bool {
        p.x >= 0 && p.y >= 0 && (p.x as usize) < self.height && (p.y as usize) < self.width
    }

    /// Foreground test; out-of-frame pixels read as background.
    #[inline]
    pub fn get(&self, p: Pixel) -> bool {
        self.in_bounds(p) && self.bits[p.x as usize * self.width + p.y as usize]
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> bool {
        self.bits[x * self.width + y]
    }

    /// Sets a pixel; writes outside the frame are ignored.
    #[inline]
    pub fn set(&mut self, p: Pixel, v: bool) {
        if self.in_bounds(p) {
            self.bits[p.x as usize * self.width + p.y as usize] = v;
        }
    }

    /// Sets the 8-connected Bresenham line from `a` to `b`, both ends
    /// included.
    pub fn draw_line(&mut self, a: Pixel, b: Pixel) {
        let (dx, dy) = ((b.x - a.x).abs(), -(b.y - a.y).abs());
        let (sx, sy) = ((b.x - a.x).signum(), (b.y - a.y).signum());
        let (mut p, mut err) = (a, dx + dy);
        loop {
            self.set(p, true);
            if p == b {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                p.x += sx;
            }
            if e2 <= dx {
                err += dx;
                p.y += sy;
            }
        }
    }

    /// Draws a polyline through `points`.
    pub fn draw_path(&mut self, points: &[Pixel]) {
        for w in points.windows(2) {
            self.draw_line(w[0], w[1]);
        }
        if let [only] = points {
            self.set(*only, true);
        }
    }

    /// Foreground area in pixels.
    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn same_dims(&self, other: &BinaryMask) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Foreground pixels in raster order.
    pub fn pixels(&self) -> impl Iterator<Item = Pixel> + '_ {
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(move |(i, _)| {
            Pixel::new((i / self.width) as i32, (i % self.width) as i32)
        })
    }

    /// Number of foreground 8-neighbours of `p`.
    #[inline]
    pub fn neighbor_count(&self, p: Pixel) -> usize {
        p.neighbors8().iter().filter(|&&q| self.get(q)).count()
    }

    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.same_dims(other) && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    pub fn and(&self, other: &BinaryMask) -> BinaryMask {
        assert!(self.same_dims(other));
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().zip(&other.bits).map(|(&a, &b)| a && b).collect(),
        }
    }

    /// 8-connected foreground components, each listed in discovery order.
    /// Components are ordered by their first pixel in raster order.
    pub fn components(&self) -> Vec<Vec<Pixel>> {
        let mut seen = vec![false; self.bits.len()];
        let mut out = Vec::new();
        let mut stack = Vec::new();
        for start in 0..self.bits.len() {
            if !self.bits[start] || seen[start] {
                continue;
            }
            seen[start] = true;
            stack.push(start);
            let mut comp = Vec::new();
            while let Some(i) = stack.pop() {
                let p = Pixel::new((i / self.width) as i32, (i % self.width) as i32);
                comp.push(p);
                for q in p.neighbors8() {
                    if self.get(q) {
                        let j = q.x as usize * self.width + q.y as usize;
                        if !seen[j] {
                            seen[j] = true;
                            stack.push(j);
                        }
                    }
                }
            }
            out.push(comp);
        }
        out
    }

    pub fn component_count(&self) -> usize {
        self.components().len()
    }

    /// Keeps only the largest 8-connected component (ties go to the one
    /// whose first pixel comes first in raster order).
    pub fn largest_component(&self) -> BinaryMask {
        let comps = self.components();
        let mut out = BinaryMask::new(self.width, self.height);
        let mut best: Option<&Vec<Pixel>> = None;
        for c in &comps {
            if best.map_or(true, |b| c.len() > b.len()) {
                best = Some(c);
            }
        }
        if let Some(c) = best {
            for &p in c {
                out.set(p, true);
            }
        }
        out
    }

    /// Foreground pixels with at least one background 8-neighbour
    /// (the frame edge counts as background).
    pub fn boundary(&self) -> BinaryMask {
        BinaryMask::from_fn(self.width, self.height, |x, y| {
            let p = Pixel::new(x as i32, y as i32);
            self.at(x, y) && p.neighbors8().iter().any(|&q| !self.get(q))
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path)
            .map_err(|source| Error::Image {
                path: path.to_path_buf(),
                source,
            })?
            .to_luma8();
        let (w, h) = img.dimensions();
        if w == 0 || h == 0 {
            return Err(Error::invalid(format!("{} has a zero dimension", path.display())));
        }
        Ok(Self::from_fn(w as usize, h as usize, |x, y| {
            img.get_pixel(y as u32, x as u32).0[0] >= 128
        }))
    }

    /// Writes a single-channel PNG with foreground 255 and background 0.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let img = image::GrayImage::from_fn(self.width as u32, self.height as u32, |c, r| {
            image::Luma([if self.at(r as usize, c as usize) { 255 } else { 0 }])
        });
        img.save(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
    }
}
