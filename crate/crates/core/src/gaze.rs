//! Gaze samples, calibration accuracy, fixation detection and frame alignment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{deg_to_px_radius, CameraModel, FrameSegmentation};

/// Minimum duration of a stable eye position, milliseconds.
pub const MIN_FIXATION_MS: f64 = 100.0;
/// Default dispersion threshold, degrees of visual angle.
pub const DEFAULT_DISPERSION_DEG: f64 = 1.5;
/// Frames showing at most this many instance masks are sniffing bouts.
pub const SNIFFING_MAX_MASKS: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GazeSample {
    pub t_ms: f64,
    pub x_px: f64,
    pub y_px: f64,
    pub valid: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationObservation {
    #[serde(rename = "frame")]
    pub frame_index: u64,
    pub known_x: f64,
    pub known_y: f64,
    pub est_x: f64,
    pub est_y: f64,
}

impl CalibrationObservation {
    pub fn pixel_error(&self) -> f64 {
        (self.est_x - self.known_x).hypot(self.est_y - self.known_y)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DogProfile {
    pub dog_id: String,
    pub spatial_accuracy_deg: f64,
    pub radius_px: u32,
}

impl DogProfile {
    pub fn new(
        dog_id: impl Into<String>,
        spatial_accuracy_deg: f64,
        camera: &CameraModel,
    ) -> Result<Self> {
        let radius_px = deg_to_px_radius(spatial_accuracy_deg, camera)?;
        Ok(DogProfile {
            dog_id: dog_id.into(),
            spatial_accuracy_deg,
            radius_px,
        })
    }
}

/// Inclusive range of scene-camera frame indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameSpan {
    pub first: u64,
    pub last: u64,
}

impl FrameSpan {
    pub fn contains(&self, frame: u64) -> bool {
        frame >= self.first && frame <= self.last
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fixation {
    pub dog_id: String,
    pub start_ms: f64,
    pub end_ms: f64,
    pub x: f64,
    pub y: f64,
    pub frames: FrameSpan,
}

impl Fixation {
    pub fn duration_ms(&self) -> f64 {
        self.end_ms - self.start_ms
    }
}

/// Mean angular calibration error, degrees.
pub fn estimate_accuracy(
    observations: &[CalibrationObservation],
    camera: &CameraModel,
) -> Result<f64> {
    if observations.is_empty() {
        return Err(Error::Validation("no calibration observations".into()));
    }
    let mean_px =
        observations.iter().map(|o| o.pixel_error()).sum::<f64>() / observations.len() as f64;
    Ok(mean_px * camera.deg_per_px())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixationParams {
    pub min_duration_ms: f64,
    /// Largest allowed spread along either axis within a fixation, pixels.
    pub dispersion_px: f64,
    /// Samples further apart than this never share a window.
    pub max_gap_ms: f64,
}

impl FixationParams {
    pub fn for_camera(camera: &CameraModel, dispersion_deg: f64) -> Self {
        FixationParams {
            min_duration_ms: MIN_FIXATION_MS,
            dispersion_px: dispersion_deg * camera.px_per_deg(),
            max_gap_ms: 3.0 * 1000.0 / camera.fps(),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.min_duration_ms >= 0.0) {
            return Err(Error::param("min_duration_ms", "must be non-negative"));
        }
        if !(self.dispersion_px >= 0.0) {
            return Err(Error::param("dispersion_px", "must be non-negative"));
        }
        if !(self.max_gap_ms > 0.0) {
            return Err(Error::param("max_gap_ms", "must be positive"));
        }
        Ok(())
    }
}

/// A detected stable window over `samples[first..=last]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixationWindow {
    pub first: usize,
    pub last: usize,
    pub start_ms: f64,
    pub end_ms: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Copy)]
struct Spread {
    min_x: f64,
    max_x: f64,
    min_y: f64,
    max_y: f64,
}

impl Spread {
    fn new(s: &GazeSample) -> Self {
        Spread {
            min_x: s.x_px,
            max_x: s.x_px,
            min_y: s.y_px,
            max_y: s.y_px,
        }
    }

    fn with(mut self, s: &GazeSample) -> Self {
        self.min_x = self.min_x.min(s.x_px);
        self.max_x = self.max_x.max(s.x_px);
        self.min_y = self.min_y.min(s.y_px);
        self.max_y = self.max_y.max(s.y_px);
        self
    }

    fn dispersion(&self) -> f64 {
        (self.max_x - self.min_x).max(self.max_y - self.min_y)
    }
}

/// Dispersion-threshold (I-DT) fixation detection.
///
/// A window grows from each candidate start until it spans
/// `min_duration_ms`; if its spread stays within `dispersion_px` it is
/// extended sample by sample while the spread holds, then emitted with the
/// centroid of its samples. Invalid samples and gaps longer than
/// `max_gap_ms` terminate windows.
pub fn detect_fixations(
    samples: &[GazeSample],
    params: &FixationParams,
) -> Result<Vec<FixationWindow>> {
    params.validate()?;
    for (i, w) in samples.windows(2).enumerate() {
        if !(w[1].t_ms >= w[0].t_ms) {
            return Err(Error::Format(format!(
                "gaze timestamps out of order at sample {}: {} after {}",
                i + 1,
                w[1].t_ms,
                w[0].t_ms
            )));
        }
    }
    let usable = |i: usize| {
        let s = &samples[i];
        s.valid && s.x_px.is_finite() && s.y_px.is_finite()
    };
    let linked = |i: usize| samples[i + 1].t_ms - samples[i].t_ms <= params.max_gap_ms;

    let n = samples.len();
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        if !usable(i) {
            i += 1;
            continue;
        }
        // initial window covering the minimum duration
        let mut j = i;
        let mut spread = Spread::new(&samples[i]);
        let mut broken = false;
        while samples[j].t_ms - samples[i].t_ms < params.min_duration_ms {
            if j + 1 >= n {
                broken = true;
                break;
            }
            if !usable(j + 1) || !linked(j) {
                broken = true;
                break;
            }
            j += 1;
            spread = spread.with(&samples[j]);
        }
        if broken {
            if j + 1 >= n {
                break;
            }
            // no window starting in i..=j can cross the break at j + 1
            i = j + 1;
            continue;
        }
        if spread.dispersion() > params.dispersion_px {
            i += 1;
            continue;
        }
        while j + 1 < n && usable(j + 1) && linked(j) {
            let grown = spread.with(&samples[j + 1]);
            if grown.dispersion() > params.dispersion_px {
                break;
            }
            spread = grown;
            j += 1;
        }
        let count = (j - i + 1) as f64;
        let (sx, sy) = samples[i..=j]
            .iter()
            .fold((0.0, 0.0), |(ax, ay), s| (ax + s.x_px, ay + s.y_px));
        out.push(FixationWindow {
            first: i,
            last: j,
            start_ms: samples[i].t_ms,
            end_ms: samples[j].t_ms,
            x: sx / count,
            y: sy / count,
        });
        i = j + 1;
    }
    Ok(out)
}

/// Frame indices exposed at the start and end of an interval:
/// `floor(t * fps / 1000)`, with a degenerate range collapsed to one frame.
pub fn align_to_frames(start_ms: f64, end_ms: f64, fps: f64) -> FrameSpan {
    let to_frame = |t: f64| (t * fps / 1000.0).floor().max(0.0) as u64;
    let first = to_frame(start_ms);
    let last = to_frame(end_ms).max(first);
    FrameSpan { first, last }
}

/// Detects fixations for one recording and aligns them to scene frames.
/// Samples falling outside the frame are treated as tracker loss.
pub fn extract_fixations(
    dog_id: &str,
    samples: &[GazeSample],
    params: &FixationParams,
    camera: &CameraModel,
) -> Result<Vec<Fixation>> {
    let (w, h) = (f64::from(camera.width_px()), f64::from(camera.height_px()));
    let masked: Vec<GazeSample> = samples
        .iter()
        .map(|s| GazeSample {
            valid: s.valid && s.x_px >= 0.0 && s.x_px < w && s.y_px >= 0.0 && s.y_px < h,
            ..*s
        })
        .collect();
    let windows = detect_fixations(&masked, params)?;
    Ok(windows
        .into_iter()
        .map(|win| Fixation {
            dog_id: dog_id.to_string(),
            start_ms: win.start_ms,
            end_ms: win.end_ms,
            x: win.x,
            y: win.y,
            frames: align_to_frames(win.start_ms, win.end_ms, camera.fps()),
        })
        .collect())
}

/// Result of dropping sniffing-bout frames.
#[derive(Debug)]
pub struct SniffingFiltered<T> {
    pub kept: Vec<T>,
    pub removed: usize,
}

/// Drops entries whose frame shows at most `max_masks` instance masks,
/// preserving the order of the rest.
pub fn filter_sniffing<T, F>(
    items: impl IntoIterator<Item = T>,
    max_masks: usize,
    frame_of: F,
) -> SniffingFiltered<T>
where
    F: Fn(&T) -> &FrameSegmentation,
{
    let mut kept = Vec::new();
    let mut removed = 0;
    for item in items {
        if frame_of(&item).masks.len() <= max_masks {
            removed += 1;
        } else {
            kept.push(item);
        }
    }
    SniffingFiltered { kept, removed }
}
