use std::collections::HashSet;

use super::rle::{BBox, RleMask};
use super::taxonomy::ClassId;
use crate::error::{Error, Result};

/// One class-labelled instance mask. Ground-truth masks carry confidence 1.0.
#[derive(Clone, Debug, PartialEq)]
pub struct InstanceMask {
    pub instance_id: u32,
    pub class_id: ClassId,
    pub mask: RleMask,
    pub bbox: Option<BBox>,
    pub confidence: f64,
}

impl InstanceMask {
    pub fn new(
        instance_id: u32,
        class_id: ClassId,
        mask: RleMask,
        confidence: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::param(
                "confidence",
                format!("must lie in [0, 1], got {confidence}"),
            ));
        }
        let bbox = mask.bbox();
        Ok(InstanceMask {
            instance_id,
            class_id,
            mask,
            bbox,
            confidence,
        })
    }

    pub fn ground_truth(instance_id: u32, class_id: ClassId, mask: RleMask) -> Self {
        InstanceMask::new(instance_id, class_id, mask, 1.0).expect("confidence 1.0 is valid")
    }

    pub fn area(&self) -> u64 {
        self.mask.area()
    }
}

/// The instance masks of a single frame.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSegmentation {
    pub frame_index: u64,
    pub timestamp_ms: f64,
    width: u32,
    height: u32,
    pub masks: Vec<InstanceMask>,
}

impl FrameSegmentation {
    pub fn new(
        frame_index: u64,
        timestamp_ms: f64,
        width: u32,
        height: u32,
        masks: Vec<InstanceMask>,
    ) -> Result<Self> {
        let mut ids = HashSet::new();
        for m in &masks {
            if m.mask.dims() != (width, height) {
                return Err(Error::DimensionMismatch {
                    expected: (width, height),
                    found: m.mask.dims(),
                });
            }
            if !ids.insert(m.instance_id) {
                return Err(Error::Validation(format!(
                    "frame {frame_index}: duplicate instance id {}",
                    m.instance_id
                )));
            }
        }
        Ok(FrameSegmentation {
            frame_index,
            timestamp_ms,
            width,
            height,
            masks,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn frame_area(&self) -> u64 {
        u64::from(self.width) * u64::from(self.height)
    }

    pub fn masks_of(&self, class: ClassId) -> impl Iterator<Item = &InstanceMask> {
        self.masks.iter().filter(move |m| m.class_id == class)
    }

    pub fn has_class(&self, class: ClassId) -> bool {
        self.masks.iter().any(|m| m.class_id == class)
    }

    /// Pixels covered by at least one mask of `class`.
    pub fn class_area(&self, class: ClassId) -> u64 {
        let union = RleMask::union_all(
            self.width,
            self.height,
            self.masks_of(class).map(|m| &m.mask),
        )
        .expect("frame masks share dimensions");
        union.area()
    }

    /// Union of every instance mask.
    pub fn union_mask(&self) -> RleMask {
        RleMask::union_all(self.width, self.height, self.masks.iter().map(|m| &m.mask))
            .expect("frame masks share dimensions")
    }

    /// Instance with the largest area; ties go to the lowest instance id.
    pub fn largest_instance(&self) -> Option<&InstanceMask> {
        self.masks.iter().max_by(|a, b| {
            a.area()
                .cmp(&b.area())
                .then(b.instance_id.cmp(&a.instance_id))
        })
    }
}

/// Fraction of the frame covered by the union of all masks.
pub fn frame_coverage(frame: &FrameSegmentation) -> f64 {
    frame.union_mask().area() as f64 / frame.frame_area() as f64
}
