use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Horizontal field of view of the head-mounted scene camera, degrees.
pub const REFERENCE_HFOV_DEG: f64 = 101.55;
/// Vertical field of view of the head-mounted scene camera, degrees.
pub const REFERENCE_VFOV_DEG: f64 = 73.60;
/// Digitization rate of the scene and eye cameras.
pub const REFERENCE_FPS: f64 = 29.96;
/// System-wide mean spatial accuracy across dogs, degrees.
pub const REFERENCE_ACCURACY_DEG: f64 = 5.32;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCamera", into = "RawCamera")]
pub struct CameraModel {
    width_px: u32,
    height_px: u32,
    hfov_deg: f64,
    vfov_deg: f64,
    fps: f64,
}

impl CameraModel {
    pub fn new(
        width_px: u32,
        height_px: u32,
        hfov_deg: f64,
        vfov_deg: f64,
        fps: f64,
    ) -> Result<Self> {
        if width_px == 0 || height_px == 0 {
            return Err(Error::param("camera", "resolution must be positive"));
        }
        for (name, v) in [("hfov_deg", hfov_deg), ("vfov_deg", vfov_deg), ("fps", fps)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(
                    "camera",
                    format!("{name} must be positive, got {v}"),
                ));
            }
        }
        Ok(CameraModel {
            width_px,
            height_px,
            hfov_deg,
            vfov_deg,
            fps,
        })
    }

    /// Scene-camera optics of the head-mounted tracker at the given resolution.
    pub fn reference(width_px: u32, height_px: u32) -> Result<Self> {
        CameraModel::new(
            width_px,
            height_px,
            REFERENCE_HFOV_DEG,
            REFERENCE_VFOV_DEG,
            REFERENCE_FPS,
        )
    }

    pub fn width_px(&self) -> u32 {
        self.width_px
    }

    pub fn height_px(&self) -> u32 {
        self.height_px
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width_px, self.height_px)
    }

    pub fn hfov_deg(&self) -> f64 {
        self.hfov_deg
    }

    pub fn vfov_deg(&self) -> f64 {
        self.vfov_deg
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn px_per_deg(&self) -> f64 {
        f64::from(self.width_px) / self.hfov_deg
    }

    pub fn deg_per_px(&self) -> f64 {
        self.hfov_deg / f64::from(self.width_px)
    }

    pub fn frame_area(&self) -> u64 {
        u64::from(self.width_px) * u64::from(self.height_px)
    }
}

/// Converts an angular accuracy to a pixel radius using the horizontal
/// pixels-per-degree scale, rounded to the nearest pixel.
pub fn deg_to_px_radius(accuracy_deg: f64, camera: &CameraModel) -> Result<u32> {
    if !(accuracy_deg.is_finite() && accuracy_deg > 0.0) {
        return Err(Error::param(
            "accuracy_deg",
            format!("must be positive, got {accuracy_deg}"),
        ));
    }
    Ok((accuracy_deg * camera.px_per_deg()).round() as u32)
}

#[derive(Serialize, Deserialize)]
struct RawCamera {
    width_px: u32,
    height_px: u32,
    hfov_deg: f64,
    vfov_deg: f64,
    fps: f64,
}

impl TryFrom<RawCamera> for CameraModel {
    type Error = crate::Error;

    fn try_from(r: RawCamera) -> Result<Self> {
        CameraModel::new(r.width_px, r.height_px, r.hfov_deg, r.vfov_deg, r.fps)
    }
}

impl From<CameraModel> for RawCamera {
    fn from(c: CameraModel) -> Self {
        RawCamera {
            width_px: c.width_px,
            height_px: c.height_px,
            hfov_deg: c.hfov_deg,
            vfov_deg: c.vfov_deg,
            fps: c.fps,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_radius() {
        let cam = CameraModel::reference(960, 720).unwrap();
        // 5.32 * 960 / 101.55 = 50.29
        assert_eq!(deg_to_px_radius(5.32, &cam).unwrap(), 50);
        assert_eq!(deg_to_px_radius(REFERENCE_HFOV_DEG, &cam).unwrap(), 960);
    }

    #[test]
    fn rejects_non_positive_accuracy() {
        let cam = CameraModel::reference(960, 720).unwrap();
        assert!(deg_to_px_radius(0.0, &cam).is_err());
        assert!(deg_to_px_radius(-1.0, &cam).is_err());
        assert!(deg_to_px_radius(f64::NAN, &cam).is_err());
    }

    #[test]
    fn rejects_bad_camera() {
        assert!(CameraModel::new(0, 10, 1.0, 1.0, 1.0).is_err());
        assert!(CameraModel::new(10, 10, -1.0, 1.0, 1.0).is_err());
        assert!(serde_json::from_str::<CameraModel>(
            r#"{"width_px":10,"height_px":10,"hfov_deg":0,"vfov_deg":1,"fps":30}"#
        )
        .is_err());
    }
}
