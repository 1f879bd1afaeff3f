//! Geometric and mask data model shared by every analysis stage.

mod camera;
mod frame;
mod rle;
mod taxonomy;

pub use camera::{
    deg_to_px_radius, CameraModel, REFERENCE_ACCURACY_DEG, REFERENCE_FPS, REFERENCE_HFOV_DEG,
    REFERENCE_VFOV_DEG,
};
pub use frame::{frame_coverage, FrameSegmentation, InstanceMask};
pub use rle::{rasterize_disk, BBox, Intervals, RleMask};
pub use taxonomy::{ClassId, ClassTaxonomy, BACKGROUND_NAME, DEFAULT_CLASSES, NUM_CLASSES};
