//! Segmentation corpus files: one JSON document per recording.
//!
//! ```json
//! { "dog_id": "d01",
//!   "camera": {"width_px": 320, "height_px": 240, "hfov_deg": 101.55, "vfov_deg": 73.6, "fps": 29.96},
//!   "taxonomy": ["bench/chair", ...],
//!   "frames": [{"frame_index": 0, "timestamp_ms": 0.0, "masks": [
//!       {"instance_id": 1, "class": "car", "confidence": 1.0, "bbox": [x0, y0, x1, y1],
//!        "rle": {"width": 320, "height": 240, "runs": [..]}}]}] }
//! ```
//!
//! Runs are uncompressed, row-major, and start with a background run.
//! Bounding boxes are inclusive and must be tight.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaze::{Fixation, FrameSpan};
use crate::scene::{CameraModel, ClassTaxonomy, FrameSegmentation, InstanceMask, RleMask};

#[derive(Clone, Debug, PartialEq)]
pub struct SegmentationCorpus {
    pub dog_id: Option<String>,
    pub camera: CameraModel,
    pub taxonomy: ClassTaxonomy,
    frames: Vec<FrameSegmentation>,
}

impl SegmentationCorpus {
    /// Frames are sorted by index; duplicates and foreign dimensions are rejected.
    pub fn new(
        dog_id: Option<String>,
        camera: CameraModel,
        taxonomy: ClassTaxonomy,
        mut frames: Vec<FrameSegmentation>,
    ) -> Result<Self> {
        for f in &frames {
            if f.dims() != camera.dims() {
                return Err(Error::DimensionMismatch {
                    expected: camera.dims(),
                    found: f.dims(),
                });
            }
            if let Some(m) = f
                .masks
                .iter()
                .find(|m| !taxonomy.contains(m.class_id) || m.class_id.is_background())
            {
                return Err(Error::Validation(format!(
                    "frame {}: instance {} has invalid class id {}",
                    f.frame_index, m.instance_id, m.class_id
                )));
            }
        }
        frames.sort_by_key(|f| f.frame_index);
        if let Some(w) = frames
            .windows(2)
            .find(|w| w[0].frame_index == w[1].frame_index)
        {
            return Err(Error::Validation(format!(
                "duplicate frame index {}",
                w[0].frame_index
            )));
        }
        Ok(SegmentationCorpus {
            dog_id,
            camera,
            taxonomy,
            frames,
        })
    }

    pub fn frames(&self) -> &[FrameSegmentation] {
        &self.frames
    }

    pub fn frame(&self, index: u64) -> Option<&FrameSegmentation> {
        self.frames
            .binary_search_by_key(&index, |f| f.frame_index)
            .ok()
            .map(|i| &self.frames[i])
    }

    /// First frame whose index lies inside `span`.
    pub fn find_in_span(&self, span: FrameSpan) -> Option<&FrameSegmentation> {
        let i = self.frames.partition_point(|f| f.frame_index < span.first);
        self.frames.get(i).filter(|f| f.frame_index <= span.last)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let raw: RawCorpus =
            serde_json::from_reader(BufReader::new(file)).map_err(|source| Error::Json {
                path: path.to_path_buf(),
                source,
            })?;
        raw.into_corpus()
            .map_err(|e| Error::Validation(format!("{}: {e}", path.display())))
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: RawCorpus = serde_json::from_str(s).map_err(|source| Error::Json {
            path: "<string>".into(),
            source,
        })?;
        raw.into_corpus()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&RawCorpus::from_corpus(self)).expect("corpus serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer(&mut w, &RawCorpus::from_corpus(self)).map_err(|source| {
            Error::Json {
                path: path.to_path_buf(),
                source,
            }
        })?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }
}

#[derive(Serialize, Deserialize)]
struct RawCorpus {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dog_id: Option<String>,
    camera: CameraModel,
    taxonomy: ClassTaxonomy,
    frames: Vec<RawFrame>,
}

#[derive(Serialize, Deserialize)]
struct RawFrame {
    frame_index: u64,
    #[serde(default)]
    timestamp_ms: f64,
    masks: Vec<RawMask>,
}

#[derive(Serialize, Deserialize)]
struct RawMask {
    instance_id: u32,
    class: String,
    #[serde(default = "one")]
    confidence: f64,
    bbox: Option<[u32; 4]>,
    rle: RawRle,
}

fn one() -> f64 {
    1.0
}

#[derive(Serialize, Deserialize)]
struct RawRle {
    width: u32,
    height: u32,
    runs: Vec<u32>,
}

impl RawCorpus {
    fn into_corpus(self) -> Result<SegmentationCorpus> {
        let (w, h) = self.camera.dims();
        let mut frames = Vec::with_capacity(self.frames.len());
        for rf in self.frames {
            let mut masks = Vec::with_capacity(rf.masks.len());
            for rm in rf.masks {
                let class_id = self.taxonomy.id_of(&rm.class).ok_or_else(|| {
                    Error::Validation(format!(
                        "frame {}: unknown class `{}`",
                        rf.frame_index, rm.class
                    ))
                })?;
                let rle = RleMask::from_runs(rm.rle.width, rm.rle.height, &rm.rle.runs)?;
                let mask = InstanceMask::new(rm.instance_id, class_id, rle, rm.confidence)?;
                let expected = mask.bbox.map(|b| b.as_array());
                if rm.bbox.is_some() && rm.bbox != expected {
                    return Err(Error::Validation(format!(
                        "frame {}: instance {} bbox {:?} is not the tight box {:?}",
                        rf.frame_index, rm.instance_id, rm.bbox, expected
                    )));
                }
                masks.push(mask);
            }
            frames.push(FrameSegmentation::new(
                rf.frame_index,
                rf.timestamp_ms,
                w,
                h,
                masks,
            )?);
        }
        SegmentationCorpus::new(self.dog_id, self.camera, self.taxonomy, frames)
    }

    fn from_corpus(c: &SegmentationCorpus) -> Self {
        RawCorpus {
            dog_id: c.dog_id.clone(),
            camera: c.camera,
            taxonomy: c.taxonomy.clone(),
            frames: c
                .frames
                .iter()
                .map(|f| RawFrame {
                    frame_index: f.frame_index,
                    timestamp_ms: f.timestamp_ms,
                    masks: f
                        .masks
                        .iter()
                        .map(|m| RawMask {
                            instance_id: m.instance_id,
                            class: c.taxonomy.name(m.class_id).to_string(),
                            confidence: m.confidence,
                            bbox: m.bbox.map(|b| b.as_array()),
                            rle: RawRle {
                                width: m.mask.width(),
                                height: m.mask.height(),
                                runs: m.mask.runs().to_vec(),
                            },
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

/// Corpora keyed by dog. A corpus without a dog id serves every dog that
/// has no corpus of its own.
#[derive(Clone, Debug)]
pub struct CorpusSet {
    taxonomy: ClassTaxonomy,
    by_dog: BTreeMap<String, SegmentationCorpus>,
    shared: Option<SegmentationCorpus>,
}

impl CorpusSet {
    pub fn new(corpora: impl IntoIterator<Item = SegmentationCorpus>) -> Result<Self> {
        let mut taxonomy: Option<ClassTaxonomy> = None;
        let mut by_dog = BTreeMap::new();
        let mut shared = None;
        for c in corpora {
            match &taxonomy {
                None => taxonomy = Some(c.taxonomy.clone()),
                Some(t) if *t != c.taxonomy => {
                    return Err(Error::Validation(
                        "corpora disagree on the class taxonomy".into(),
                    ))
                }
                _ => {}
            }
            match c.dog_id.clone() {
                Some(id) => {
                    if by_dog.insert(id.clone(), c).is_some() {
                        return Err(Error::Validation(format!("two corpora for dog `{id}`")));
                    }
                }
                None => {
                    if shared.replace(c).is_some() {
                        return Err(Error::Validation(
                            "more than one corpus without a dog id".into(),
                        ));
                    }
                }
            }
        }
        Ok(CorpusSet {
            taxonomy: taxonomy.unwrap_or_default(),
            by_dog,
            shared,
        })
    }

    pub fn load_all<P: AsRef<Path>>(paths: &[P]) -> Result<Self> {
        let corpora = paths
            .iter()
            .map(SegmentationCorpus::load)
            .collect::<Result<Vec<_>>>()?;
        CorpusSet::new(corpora)
    }

    pub fn taxonomy(&self) -> &ClassTaxonomy {
        &self.taxonomy
    }

    pub fn corpus(&self, dog_id: &str) -> Option<&SegmentationCorpus> {
        self.by_dog.get(dog_id).or(self.shared.as_ref())
    }

    pub fn corpora(&self) -> impl Iterator<Item = &SegmentationCorpus> {
        self.by_dog.values().chain(self.shared.iter())
    }

    pub fn frame_for(&self, fixation: &Fixation) -> Option<(&CameraModel, &FrameSegmentation)> {
        let c = self.corpus(&fixation.dog_id)?;
        c.find_in_span(fixation.frames).map(|f| (&c.camera, f))
    }

    pub fn frame(
        &self,
        dog_id: &str,
        frame_index: u64,
    ) -> Option<(&CameraModel, &FrameSegmentation)> {
        let c = self.corpus(dog_id)?;
        c.frame(frame_index).map(|f| (&c.camera, f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::ClassId;

    fn sample() -> SegmentationCorpus {
        let cam = CameraModel::reference(16, 8).unwrap();
        let frames = vec![
            FrameSegmentation::new(
                5,
                166.9,
                16,
                8,
                vec![InstanceMask::ground_truth(
                    1,
                    ClassId(5),
                    RleMask::rect(16, 8, 2, 1, 6, 4),
                )],
            )
            .unwrap(),
            FrameSegmentation::new(2, 66.7, 16, 8, vec![]).unwrap(),
        ];
        SegmentationCorpus::new(Some("d1".into()), cam, ClassTaxonomy::default(), frames).unwrap()
    }

    #[test]
    fn json_round_trip() {
        let c = sample();
        let s = c.to_json_string();
        assert!(s.contains("\"class\":\"car\""));
        assert!(s.contains("\"bbox\":[2,1,6,4]"));
        let back = SegmentationCorpus::from_json_str(&s).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.frames()[0].frame_index, 2);
    }

    #[test]
    fn rejects_loose_bbox_and_unknown_class() {
        let s = sample().to_json_string();
        let loose = s.replace("[2,1,6,4]", "[0,0,6,4]");
        assert!(SegmentationCorpus::from_json_str(&loose).is_err());
        let unknown = s.replace("\"class\":\"car\"", "\"class\":\"tractor\"");
        assert!(SegmentationCorpus::from_json_str(&unknown).is_err());
        let bad_runs = s.replace("\"runs\":[", "\"runs\":[1,");
        assert!(SegmentationCorpus::from_json_str(&bad_runs).is_err());
    }

    #[test]
    fn span_lookup() {
        let c = sample();
        assert_eq!(
            c.find_in_span(FrameSpan { first: 3, last: 9 })
                .unwrap()
                .frame_index,
            5
        );
        assert_eq!(
            c.find_in_span(FrameSpan { first: 0, last: 9 })
                .unwrap()
                .frame_index,
            2
        );
        assert!(c.find_in_span(FrameSpan { first: 6, last: 9 }).is_none());
    }
}
