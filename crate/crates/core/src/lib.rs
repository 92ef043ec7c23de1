//! Toolkit for turning a sparse/dense reconstruction and a photo collection
//! into aligned deep-buffer datasets for neural rerendering.
//!
//! The crate covers the CPU-side half of the pipeline:
//!
//! - [`recon`]: reading and writing COLMAP-style model directories.
//! - [`camera`]: viewpoints, projection and resolution rescaling.
//! - [`splat`] and [`buffer`]: z-buffered point splatting into deep buffers
//!   and the NRDB container they are stored in.
//! - [`semantics`]: class-index label maps, the 150-class palette and
//!   transient masks.
//! - [`dataset`]: aligned dataset construction, filtering and splitting.
//! - [`style`]: Gram matrices, style distances, the triplet objective and
//!   triplet mining for appearance pretraining.
//! - [`metrics`]: L1, PSNR and feature-space perceptual distance.

pub mod buffer;
pub mod camera;
pub mod dataset;
pub mod metrics;
pub mod raster;
pub mod recon;
pub mod semantics;
pub mod splat;
pub mod style;

pub use buffer::DeepBuffer;
pub use camera::{Projection, Viewpoint};
pub use dataset::{build_dataset, split_validation, DatasetConfig, DatasetPaths, Manifest};
pub use raster::ImageRgb;
pub use recon::{parse_reconstruction, serialize_reconstruction, Format, Reconstruction};
pub use semantics::{LabelMap, Palette};
pub use splat::{render, PointCloud, SplatOptions};
pub use style::{gram, mine_triplets, style_distance, triplet_loss, GramSet, TripletConfig};

/// Sizes the global worker pool used by every parallel routine. Call once,
/// before any parallel work starts.
pub fn configure_threads(threads: usize) -> Result<(), rayon::ThreadPoolBuildError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
}
