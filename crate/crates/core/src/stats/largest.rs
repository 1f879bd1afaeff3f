use serde::Serialize;

use super::table::Moments;
use crate::attribution::AttributionRecord;
use crate::corpus::CorpusSet;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LargestObjectStats {
    pub fixations: usize,
    pub included: usize,
    /// Share of fixations whose region touches the frame's largest instance.
    pub fraction: Option<f64>,
    /// Frame share of the largest instance over fixations that include it.
    pub size_when_included: Option<Moments>,
}

/// The largest instance counts as fixated when its class has positive
/// probability and the instance itself intersects the fixation region.
pub fn largest_object_stats(
    records: &[AttributionRecord],
    corpora: &CorpusSet,
) -> Result<LargestObjectStats> {
    let mut fixations = 0;
    let mut sizes = Vec::new();
    for rec in records.iter().filter(|r| !r.is_null()) {
        let dog = rec.fixation.dog_id.as_str();
        let (_, frame) =
            corpora
                .frame(dog, rec.frame_index)
                .ok_or_else(|| Error::MissingFrame {
                    dog_id: dog.to_string(),
                    first: rec.frame_index,
                    last: rec.frame_index,
                })?;
        fixations += 1;
        let Some(largest) = frame.largest_instance() else {
            continue;
        };
        if rec.distribution.get(largest.class_id) <= 0.0 {
            continue;
        }
        let (w, h) = frame.dims();
        if largest.mask.intersect_count(&rec.region(w, h).disk)? > 0 {
            sizes.push(largest.area() as f64 / frame.frame_area() as f64);
        }
    }
    Ok(LargestObjectStats {
        fixations,
        included: sizes.len(),
        fraction: (fixations > 0).then(|| sizes.len() as f64 / fixations as f64),
        size_when_included: Moments::of(&sizes),
    })
}
