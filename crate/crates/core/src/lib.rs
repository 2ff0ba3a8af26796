//! Maize leaf detection, counting and tracking from daily two-view plant
//! images.

pub mod assignment;
pub mod dse;
pub mod error;
pub mod evaluation;
pub mod geom;
pub mod heuristics;
pub mod hull;
pub mod pipeline;
pub mod raster;
pub mod record;
pub mod skeleton;

pub use error::{Error, Result};
pub use geom::Pixel;

// The guide's code blocks run as doctests, one module per chapter.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/segmentation.md")]
    mod segmentation {}
    #[doc = include_str!("../../../book/src/views.md")]
    mod views {}
    #[doc = include_str!("../../../book/src/skeletons.md")]
    mod skeletons {}
    #[doc = include_str!("../../../book/src/pruning.md")]
    mod pruning {}
    #[doc = include_str!("../../../book/src/tracking.md")]
    mod tracking {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
}
