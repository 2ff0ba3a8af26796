use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::raster::Raster;

/// 256-bin intensity histogram over `[0, 1]`. An intensity `v` falls in bin
/// `round(v * 255)`, so 8-bit input maps one-to-one onto bins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram256 {
    pub counts: [u64; 256],
}

impl Default for Histogram256 {
    fn default() -> Self {
        Self { counts: [0; 256] }
    }
}

impl Histogram256 {
    #[inline]
    pub fn bin_of(v: f32) -> usize {
        (v.clamp(0.0, 1.0) * 255.0).round() as usize
    }

    pub fn from_values(values: impl IntoIterator<Item = f32>) -> Self {
        let mut h = Self::default();
        for v in values {
            h.counts[Self::bin_of(v)] += 1;
        }
        h
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Result of an Otsu scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OtsuThreshold {
    /// Last bin of the lower class. Pixels in bins `> bin` are foreground.
    pub bin: u8,
    /// Threshold on the intensity scale: the boundary between `bin` and
    /// `bin + 1`, i.e. `(bin + 0.5) / 255`. Zero when `degenerate`.
    pub value: f32,
    /// Set when every split has zero between-class variance (a single
    /// populated bin); `bin` and `value` are then 0.
    pub degenerate: bool,
}

impl OtsuThreshold {
    fn from_bin(bin: u8) -> Self {
        Self {
            bin,
            value: (f32::from(bin) + 0.5) / 255.0,
            degenerate: false,
        }
    }

    fn degenerate() -> Self {
        Self {
            bin: 0,
            value: 0.0,
            degenerate: true,
        }
    }
}

/// Otsu threshold of a single-channel raster.
pub fn otsu_threshold(gray: &Raster) -> Result<OtsuThreshold> {
    gray.require_channels(1, "otsu_threshold")?;
    otsu_threshold_hist(&Histogram256::from_values(gray.data().iter().copied()))
}

/// Otsu threshold of a histogram: the split maximising between-class
/// variance, smallest bin on ties.
///
/// Between-class variance for a split after bin `t` is proportional to
/// `(N*S0 - n0*S)^2 / (n0*n1)`, with `n0`, `S0` the count and bin-index sum
/// of the lower class and `N`, `S` the totals. Candidates are compared as
/// exact rationals so that plateaus of equal variance resolve the same way
/// regardless of accumulation order.
pub fn otsu_threshold_hist(hist: &Histogram256) -> Result<OtsuThreshold> {
    let total = hist.total();
    if total == 0 {
        return Err(Error::EmptyInput("otsu_threshold on an empty histogram".into()));
    }
    let sum_all: u128 = hist
        .counts
        .iter()
        .enumerate()
        .map(|(i, &c)| i as u128 * u128::from(c))
        .sum();

    let mut best: Option<(u8, Score)> = None;
    let mut n0: u128 = 0;
    let mut s0: u128 = 0;
    for t in 0..255usize {
        n0 += u128::from(hist.counts[t]);
        s0 += t as u128 * u128::from(hist.counts[t]);
        let n1 = u128::from(total) - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let score = Score::new(u128::from(total) * s0, n0 * sum_all, n0 * n1);
        if score.is_zero() {
            continue;
        }
        if best.as_ref().map_or(true, |(_, b)| score.cmp(b) == Ordering::Greater) {
            best = Some((t as u8, score));
        }
    }
    Ok(match best {
        Some((bin, _)) => OtsuThreshold::from_bin(bin),
        None => OtsuThreshold::degenerate(),
    })
}

/// `diff^2 / den` kept as an exact rational.
#[derive(Debug, Clone, Copy)]
struct Score {
    diff: u128,
    den: u128,
}

impl Score {
    fn new(a: u128, b: u128, den: u128) -> Self {
        Self {
            diff: a.abs_diff(b),
            den,
        }
    }

    fn is_zero(&self) -> bool {
        self.diff == 0
    }

    fn cmp(&self, other: &Score) -> Ordering {
        // diff fits in 64 bits for any realistic image, so diff^2 fits in 128.
        let lhs = mul_wide(self.diff * self.diff, other.den);
        let rhs = mul_wide(other.diff * other.diff, self.den);
        lhs.cmp(&rhs)
    }
}

/// Full 256-bit product of two `u128`s as `(high, low)`.
fn mul_wide(a: u128, b: u128) -> (u128, u128) {
    const MASK: u128 = u64::MAX as u128;
    let (a_hi, a_lo) = (a >> 64, a & MASK);
    let (b_hi, b_lo) = (b >> 64, b & MASK);
    let ll = a_lo * b_lo;
    let lh = a_lo * b_hi;
    let hl = a_hi * b_lo;
    let hh = a_hi * b_hi;
    let mid = (ll >> 64) + (lh & MASK) + (hl & MASK);
    let lo = (ll & MASK) | (mid << 64);
    let hi = hh + (lh >> 64) + (hl >> 64) + (mid >> 64);
    (hi, lo)
}
