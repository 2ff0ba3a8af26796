use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{otsu_threshold_hist, BinaryMask, Histogram256, OtsuThreshold, Raster};

/// Luminance weights (R, G, B) used by [`to_grayscale`]; the Rec. 709
/// coefficients, which sum to one so gray pixels are fixed points.
pub const LUMA_WEIGHTS: [f32; 3] = [0.2125, 0.7154, 0.0721];

/// Thresholds of the two segmentation stages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentationParams {
    /// Lower bound on the stage-1 (grayscale foreground) threshold.
    pub stage1_floor: f32,
    /// Lower bound on the stage-2 (excess green) threshold.
    pub stage2_floor: f32,
    /// Upper bound on the stage-2 Otsu value before the floor is applied.
    pub stage2_cap: f32,
    /// Keep only the largest 8-connected component of the final mask.
    pub keep_largest_component: bool,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        Self {
            stage1_floor: 0.27,
            stage2_floor: 0.1,
            stage2_cap: 0.5,
            keep_largest_component: true,
        }
    }
}

impl SegmentationParams {
    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..=1.0).contains(&self.stage1_floor)
            && 0.0 <= self.stage2_floor
            && self.stage2_floor < self.stage2_cap
            && self.stage2_cap <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid segmentation thresholds: {self:?}")))
        }
    }
}

/// Weighted-sum luminance of an RGB raster (see [`LUMA_WEIGHTS`]).
pub fn to_grayscale(img: &Raster) -> Result<Raster> {
    img.require_channels(3, "to_grayscale")?;
    let data = img
        .data()
        .chunks_exact(3)
        .map(|p| (LUMA_WEIGHTS[0] * p[0] + LUMA_WEIGHTS[1] * p[1] + LUMA_WEIGHTS[2] * p[2]).clamp(0.0, 1.0))
        .collect();
    Raster::from_vec(img.width(), img.height(), 1, data)
}

/// Per-pixel, per-channel `|img - bg|`.
pub fn subtract_background(img: &Raster, bg: &Raster) -> Result<Raster> {
    if !img.same_shape(bg) {
        return Err(Error::invalid(format!(
            "background is {}x{}x{}, image is {}x{}x{}",
            bg.width(),
            bg.height(),
            bg.channels(),
            img.width(),
            img.height(),
            img.channels()
        )));
    }
    let data = img
        .data()
        .iter()
        .zip(bg.data())
        .map(|(a, b)| (a - b).abs().clamp(0.0, 1.0))
        .collect();
    Raster::from_vec(img.width(), img.height(), img.channels(), data)
}

/// Excess green `2G - R - B`, negative values clamped to zero.
pub fn excess_green(img: &Raster) -> Result<Raster> {
    img.require_channels(3, "excess_green")?;
    let data = img
        .data()
        .chunks_exact(3)
        .map(|p| (2.0 * p[1] - p[0] - p[2]).clamp(0.0, 1.0))
        .collect();
    Raster::from_vec(img.width(), img.height(), 1, data)
}

/// Intermediate results of [`segment_plant_detailed`].
#[derive(Debug, Clone)]
pub struct Segmentation {
    pub mask: BinaryMask,
    /// Pixels passing the grayscale stage.
    pub stage1: BinaryMask,
    pub stage1_otsu: OtsuThreshold,
    pub stage1_threshold: f32,
    /// `None` when stage 1 kept nothing.
    pub stage2_otsu: Option<OtsuThreshold>,
    pub stage2_threshold: Option<f32>,
}

/// Segments the plant silhouette from an RGB image and its background.
pub fn segment_plant(img: &Raster, bg: &Raster, params: &SegmentationParams) -> Result<BinaryMask> {
    segment_plant_detailed(img, bg, params).map(|s| s.mask)
}

/// Two-stage segmentation.
///
/// 1. `fg = |img - bg|`; the luminance of `fg` is thresholded at
///    `max(stage1_floor, otsu(luminance))`.
/// 2. Excess green of `fg` is thresholded, over stage-1 pixels only, at
///    `max(stage2_floor, min(otsu(exg | stage 1), stage2_cap))`.
///
/// Optionally the largest 8-connected component of the result is kept.
pub fn segment_plant_detailed(
    img: &Raster,
    bg: &Raster,
    params: &SegmentationParams,
) -> Result<Segmentation> {
    img.require_channels(3, "segment_plant")?;
    params.validate()?;
    let fg = subtract_background(img, bg)?;
    let gray = to_grayscale(&fg)?;
    let (w, h) = (img.width(), img.height());

    let stage1_otsu = otsu_threshold_hist(&Histogram256::from_values(gray.data().iter().copied()))?;
    let stage1_threshold = stage1_otsu.value.max(params.stage1_floor);
    let stage1 = BinaryMask::from_fn(w, h, |x, y| gray.get(x, y, 0) > stage1_threshold);

    let exg = excess_green(&fg)?;
    let inside: Vec<f32> = (0..h)
        .flat_map(|x| (0..w).map(move |y| (x, y)))
        .filter(|&(x, y)| stage1.at(x, y))
        .map(|(x, y)| exg.get(x, y, 0))
        .collect();

    if inside.is_empty() {
        return Ok(Segmentation {
            mask: stage1.clone(),
            stage1,
            stage1_otsu,
            stage1_threshold,
            stage2_otsu: None,
            stage2_threshold: None,
        });
    }

    let stage2_otsu = otsu_threshold_hist(&Histogram256::from_values(inside))?;
    let stage2_threshold = stage2_otsu.value.min(params.stage2_cap).max(params.stage2_floor);
    let mut mask = BinaryMask::from_fn(w, h, |x, y| stage1.at(x, y) && exg.get(x, y, 0) > stage2_threshold);
    if params.keep_largest_component {
        mask = mask.largest_component();
    }
    Ok(Segmentation {
        mask,
        stage1,
        stage1_otsu,
        stage1_threshold,
        stage2_otsu: Some(stage2_otsu),
        stage2_threshold: Some(stage2_threshold),
    })
}
