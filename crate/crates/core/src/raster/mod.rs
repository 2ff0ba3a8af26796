//! Images, binary masks, and two-stage plant segmentation.
//!
//! Intensities are stored as `f32` normalised to `[0, 1]`; 8-bit input is
//! divided by 255. Every threshold in [`SegmentationParams`] is on that scale.

mod mask;
mod otsu;
mod segment;

use std::path::Path;

use crate::error::{Error, Result};

pub use mask::BinaryMask;
pub use otsu::{otsu_threshold, otsu_threshold_hist, Histogram256, OtsuThreshold};
pub use segment::{
    excess_green, segment_plant, segment_plant_detailed, subtract_background, to_grayscale,
    Segmentation, SegmentationParams, LUMA_WEIGHTS,
};

/// A one- or three-channel image with row-major, channel-interleaved data.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Raster {
    /// Creates an all-zero raster.
    pub fn new(width: usize, height: usize, channels: usize) -> Result<Self> {
        Self::check_shape(width, height, channels)?;
        Ok(Self {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
        })
    }

    /// Wraps existing data, validating the shape and the `[0, 1]` range.
    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        Self::check_shape(width, height, channels)?;
        if data.len() != width * height * channels {
            return Err(Error::invalid(format!(
                "raster data has {} values, expected {}",
                data.len(),
                width * height * channels
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("intensity {v} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Builds a raster from a per-pixel closure `f(x, y) -> [channel values]`
    /// (`x` is the row). Values are clamped into `[0, 1]`.
    pub fn from_fn<const C: usize>(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [f32; C],
    ) -> Result<Self> {
        let mut r = Self::new(width, height, C)?;
        for x in 0..height {
            for y in 0..width {
                let px = f(x, y);
                let base = (x * width + y) * C;
                for (c, v) in px.iter().enumerate() {
                    r.data[base + c] = v.clamp(0.0, 1.0);
                }
            }
        }
        Ok(r)
    }

    fn check_shape(width: usize, height: usize, channels: usize) -> Result<()> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!(
                "raster dimensions must be positive, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::invalid(format!(
                "raster must have 1 or 3 channels, got {channels}"
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Channel values of pixel `(x, y)`, `x` being the row.
    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let base = (x * self.width + y) * self.channels;
        &self.data[base..base + self.channels]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(x * self.width + y) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f32) {
        self.data[(x * self.width + y) * self.channels + c] = v.clamp(0.0, 1.0);
    }

    pub(crate) fn require_channels(&self, channels: usize, op: &str) -> Result<()> {
        if self.channels != channels {
            return Err(Error::invalid(format!(
                "{op} needs a {channels}-channel raster, got {} channels",
                self.channels
            )));
        }
        Ok(())
    }

    pub(crate) fn same_shape(&self, other: &Raster) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    /// Converts an 8-bit RGB image.
    pub fn from_rgb8(img: &image::RgbImage) -> Result<Self> {
        let (w, h) = img.dimensions();
        let data = img.as_raw().iter().map(|&v| f32::from(v) / 255.0).collect();
        Self::from_vec(w as usize, h as usize, 3, data)
    }

    /// Converts to 8-bit RGB; gray rasters are replicated over the three channels.
    pub fn to_rgb8(&self) -> image::RgbImage {
        let mut out = image::RgbImage::new(self.width as u32, self.height as u32);
        for x in 0..self.height {
            for y in 0..self.width {
                let px = self.pixel(x, y);
                let rgb = if self.channels == 3 {
                    [to_u8(px[0]), to_u8(px[1]), to_u8(px[2])]
                } else {
                    let g = to_u8(px[0]);
                    [g, g, g]
                };
                out.put_pixel(y as u32, x as u32, image::Rgb(rgb));
            }
        }
        out
    }

    /// Reads a PNG (or any format the `image` crate decodes) as RGB.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_rgb8(&img.to_rgb8())
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.to_rgb8().save(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
    }
}

#[inline]
pub(crate) fn to_u8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}
