//! Fixation regions, class attribution from mask overlap, chi-square
//! comparison of attributions, and batch attribution over a corpus.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::CorpusSet;
use crate::error::{Error, Result};
use crate::gaze::{filter_sniffing, DogProfile, Fixation};
use crate::scene::{rasterize_disk, BBox, CameraModel, ClassId, FrameSegmentation, RleMask};
pub use crate::special::chi_square_critical;

/// Zero-expected cells contribute `p^2 / EPSILON` in Pearson mode.
pub const PEARSON_EPSILON: f64 = 1e-6;
/// Significance level of the goodness-of-fit test.
pub const DEFAULT_ALPHA: f64 = 0.05;
/// 15 object classes plus background, minus one.
pub const DEFAULT_DOF: u32 = 15;

/// Disk of plausible true fixation points around a point of regard.
#[derive(Clone, Debug, PartialEq)]
pub struct FixationRegion {
    pub center: (i64, i64),
    pub radius_px: u32,
    pub disk: RleMask,
}

impl FixationRegion {
    /// The point is rounded to the nearest pixel centre before rasterizing.
    pub fn new(point: (f64, f64), radius_px: u32, width: u32, height: u32) -> Self {
        let center = (point.0.round() as i64, point.1.round() as i64);
        FixationRegion {
            center,
            radius_px,
            disk: rasterize_disk(center, radius_px, width, height),
        }
    }

    pub fn area(&self) -> u64 {
        self.disk.area()
    }

    fn bbox(&self) -> Option<BBox> {
        self.disk.bbox()
    }
}

pub fn make_region(
    fixation: &Fixation,
    profile: &DogProfile,
    camera: &CameraModel,
) -> FixationRegion {
    FixationRegion::new(
        (fixation.x, fixation.y),
        profile.radius_px,
        camera.width_px(),
        camera.height_px(),
    )
}

/// Probability vector indexed by class id, background at 0. A null
/// distribution carries no mass at all.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassDistribution {
    probs: Vec<f64>,
    null: bool,
}

impl ClassDistribution {
    pub fn null(slots: usize) -> Self {
        ClassDistribution {
            probs: vec![0.0; slots],
            null: true,
        }
    }

    /// Normalizes non-negative counts; an all-zero vector is null.
    pub fn from_counts(counts: &[u64]) -> Self {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return ClassDistribution::null(counts.len());
        }
        let t = total as f64;
        ClassDistribution {
            probs: counts.iter().map(|&c| c as f64 / t).collect(),
            null: false,
        }
    }

    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::param(
                "probs",
                "entries must be finite and non-negative",
            ));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::param(
                "probs",
                format!("must sum to 1, sum is {sum}"),
            ));
        }
        Ok(ClassDistribution { probs, null: false })
    }

    pub fn is_null(&self) -> bool {
        self.null
    }

    pub fn probs(&self) -> Option<&[f64]> {
        (!self.null).then_some(self.probs.as_slice())
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Probability of `class`; zero for null distributions.
    pub fn get(&self, class: ClassId) -> f64 {
        if self.null {
            0.0
        } else {
            self.probs.get(class.index()).copied().unwrap_or(0.0)
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributionOptions {
    /// Count region pixels covered by no mask as background.
    pub include_background: bool,
}

/// Exact pixel bookkeeping for one region against one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionOverlap {
    /// Per class id: sum over instances of `|instance ∩ region|`. Index 0
    /// holds uncovered region pixels when background is included, else 0.
    pub counts: Vec<u64>,
    /// Per class id: fraction of region pixels under any mask of the class;
    /// index 0 is the uncovered fraction.
    pub occupancy: Vec<f64>,
    pub region_area: u64,
}

pub fn region_overlap(
    region: &FixationRegion,
    frame: &FrameSegmentation,
    slots: usize,
    opts: AttributionOptions,
) -> Result<RegionOverlap> {
    if region.disk.dims() != frame.dims() {
        return Err(Error::DimensionMismatch {
            expected: frame.dims(),
            found: region.disk.dims(),
        });
    }
    let mut counts = vec![0u64; slots];
    let mut occupancy = vec![0.0; slots];
    let area = region.area();
    let Some(region_box) = region.bbox() else {
        return Ok(RegionOverlap {
            counts,
            occupancy,
            region_area: 0,
        });
    };

    let mut touching: Vec<&crate::scene::InstanceMask> = Vec::new();
    for m in &frame.masks {
        if !m.bbox.is_some_and(|b| b.overlaps(&region_box)) {
            continue;
        }
        let slot = m.class_id.index();
        if slot >= slots {
            return Err(Error::Validation(format!(
                "class id {} outside taxonomy of {} slots",
                m.class_id, slots
            )));
        }
        let n = m.mask.intersect_count(&region.disk)?;
        if n > 0 {
            counts[slot] += n;
            touching.push(m);
        }
    }

    let a = area as f64;
    let mut classes: Vec<ClassId> = touching.iter().map(|m| m.class_id).collect();
    classes.sort_unstable();
    classes.dedup();
    for c in classes {
        let covered = if touching.iter().filter(|m| m.class_id == c).count() == 1 {
            counts[c.index()]
        } else {
            let (w, h) = frame.dims();
            let union = RleMask::union_all(
                w,
                h,
                touching.iter().filter(|m| m.class_id == c).map(|m| &m.mask),
            )?;
            union.intersect_count(&region.disk)?
        };
        occupancy[c.index()] = covered as f64 / a;
    }
    let covered_any = if touching.is_empty() {
        0
    } else {
        let (w, h) = frame.dims();
        RleMask::union_all(w, h, touching.iter().map(|m| &m.mask))?.intersect_count(&region.disk)?
    };
    let uncovered = area - covered_any;
    occupancy[0] = uncovered as f64 / a;
    if opts.include_background {
        counts[0] = uncovered;
    }
    Ok(RegionOverlap {
        counts,
        occupancy,
        region_area: area,
    })
}

/// Normalized per-class pixel counts inside the region. Overlapping
/// instances each contribute their own intersection.
pub fn attribute(
    region: &FixationRegion,
    frame: &FrameSegmentation,
    slots: usize,
    opts: AttributionOptions,
) -> Result<ClassDistribution> {
    let overlap = region_overlap(region, frame, slots, opts)?;
    Ok(ClassDistribution::from_counts(&overlap.counts))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChiMode {
    /// `sum (p - q)^2 / q` with `q` the expected (ground-truth) vector.
    #[default]
    Pearson,
    /// `sum (p - q)^2 / (p + q)`.
    Symmetric,
}

impl FromStr for ChiMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pearson" => Ok(ChiMode::Pearson),
            "symmetric" => Ok(ChiMode::Symmetric),
            other => Err(Error::param("chi_mode", format!("unknown mode `{other}`"))),
        }
    }
}

impl fmt::Display for ChiMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChiMode::Pearson => "pearson",
            ChiMode::Symmetric => "symmetric",
        })
    }
}

/// Chi-square statistic between two equal-length non-negative vectors,
/// either probabilities or raw pixel counts.
pub fn chi_square_statistic(observed: &[f64], expected: &[f64], mode: ChiMode) -> Result<f64> {
    if observed.len() != expected.len() {
        return Err(Error::param(
            "distributions",
            format!("length mismatch {} vs {}", observed.len(), expected.len()),
        ));
    }
    let mut total = 0.0;
    for (&p, &q) in observed.iter().zip(expected) {
        total += match mode {
            ChiMode::Pearson if q > 0.0 => (p - q) * (p - q) / q,
            ChiMode::Pearson if p > 0.0 => p * p / PEARSON_EPSILON,
            ChiMode::Pearson => 0.0,
            ChiMode::Symmetric if p + q > 0.0 => (p - q) * (p - q) / (p + q),
            ChiMode::Symmetric => 0.0,
        };
    }
    Ok(total)
}

/// Chi-square distance of `p` (predicted) from `q` (reference).
pub fn chi_square_distance(
    p: &ClassDistribution,
    q: &ClassDistribution,
    mode: ChiMode,
) -> Result<f64> {
    match (p.probs(), q.probs()) {
        (Some(p), Some(q)) => chi_square_statistic(p, q, mode),
        _ => Err(Error::NullDistribution),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GoodnessOfFit {
    pub accept: bool,
    pub critical: f64,
    /// `critical - distance`; positive when accepted.
    pub margin: f64,
}

/// Accepts the match hypothesis iff `distance < critical(dof, alpha)`.
pub fn goodness_of_fit(distance: f64, dof: u32, alpha: f64) -> Result<GoodnessOfFit> {
    if !(distance >= 0.0) {
        return Err(Error::param(
            "distance",
            format!("must be non-negative, got {distance}"),
        ));
    }
    let critical = chi_square_critical(dof, alpha)?;
    Ok(GoodnessOfFit {
        accept: distance < critical,
        critical,
        margin: critical - distance,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttributionRecord {
    pub fixation: Fixation,
    pub frame_index: u64,
    pub radius_px: u32,
    pub distribution: ClassDistribution,
    pub occupancy: Vec<f64>,
    /// Raw per-class pixel counts behind the distribution.
    pub counts: Vec<u64>,
}

impl AttributionRecord {
    pub fn is_null(&self) -> bool {
        self.distribution.is_null()
    }

    pub fn region(&self, width: u32, height: u32) -> FixationRegion {
        FixationRegion::new(
            (self.fixation.x, self.fixation.y),
            self.radius_px,
            width,
            height,
        )
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct BatchSummary {
    pub total: usize,
    pub missing_frames: usize,
    pub sniffing_removed: usize,
    pub null: usize,
    pub retained: usize,
}

#[derive(Debug)]
pub struct BatchOutput {
    /// One record per attributed fixation, in input order; nulls included.
    pub records: Vec<AttributionRecord>,
    /// Per-fixation failures, by input position.
    pub errors: Vec<(usize, Error)>,
    pub summary: BatchSummary,
}

impl BatchOutput {
    pub fn retained(&self) -> impl Iterator<Item = &AttributionRecord> {
        self.records.iter().filter(|r| !r.is_null())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BatchOptions {
    pub attribution: AttributionOptions,
    pub sniffing_max_masks: usize,
}

impl Default for BatchOptions {
    fn default() -> Self {
        BatchOptions {
            attribution: AttributionOptions::default(),
            sniffing_max_masks: crate::gaze::SNIFFING_MAX_MASKS,
        }
    }
}

/// Attributes every fixation against its dog's corpus.
///
/// Each fixation is paired with the first corpus frame inside its frame
/// span; fixations without one become per-record errors. Sniffing-bout
/// frames are dropped before attribution. Fails up front if a fixation's
/// dog has no profile.
pub fn batch_attribute(
    fixations: &[Fixation],
    corpora: &CorpusSet,
    profiles: &BTreeMap<String, DogProfile>,
    opts: &BatchOptions,
) -> Result<BatchOutput> {
    for f in fixations {
        if !profiles.contains_key(&f.dog_id) {
            return Err(Error::MissingProfile(f.dog_id.clone()));
        }
    }
    let mut errors = Vec::new();
    let mut paired = Vec::with_capacity(fixations.len());
    for (i, f) in fixations.iter().enumerate() {
        match corpora.frame_for(f) {
            Some((camera, frame)) => paired.push((i, camera, frame)),
            None => errors.push((
                i,
                Error::MissingFrame {
                    dog_id: f.dog_id.clone(),
                    first: f.frames.first,
                    last: f.frames.last,
                },
            )),
        }
    }
    let missing_frames = errors.len();
    let filtered = filter_sniffing(paired, opts.sniffing_max_masks, |p| p.2);
    let slots = corpora.taxonomy().slots();

    let results: Vec<(usize, Result<AttributionRecord>)> = filtered
        .kept
        .par_iter()
        .map(|&(i, camera, frame)| {
            let f = &fixations[i];
            let profile = &profiles[&f.dog_id];
            let region = make_region(f, profile, camera);
            let rec = region_overlap(&region, frame, slots, opts.attribution).map(|ov| {
                AttributionRecord {
                    fixation: f.clone(),
                    frame_index: frame.frame_index,
                    radius_px: profile.radius_px,
                    distribution: ClassDistribution::from_counts(&ov.counts),
                    occupancy: ov.occupancy,
                    counts: ov.counts,
                }
            });
            (i, rec)
        })
        .collect();

    let mut records = Vec::with_capacity(results.len());
    for (i, r) in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => errors.push((i, e)),
        }
    }
    errors.sort_by_key(|(i, _)| *i);
    let null = records.iter().filter(|r| r.is_null()).count();
    let summary = BatchSummary {
        total: fixations.len(),
        missing_frames,
        sniffing_removed: filtered.removed,
        null,
        retained: records.len() - null,
    };
    Ok(BatchOutput {
        records,
        errors,
        summary,
    })
}

/// What the chi-square comparison is computed on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChiInput {
    /// Normalized class distributions.
    #[default]
    Probabilities,
    /// Raw per-class pixel counts inside the region.
    Counts,
}

impl FromStr for ChiInput {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "probabilities" => Ok(ChiInput::Probabilities),
            "counts" => Ok(ChiInput::Counts),
            other => Err(Error::param(
                "chi_input",
                format!("unknown input `{other}`"),
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub mode: ChiMode,
    pub input: ChiInput,
    pub dof: u32,
    pub alpha: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            mode: ChiMode::Pearson,
            input: ChiInput::Probabilities,
            dof: DEFAULT_DOF,
            alpha: DEFAULT_ALPHA,
        }
    }
}

/// Agreement between ground-truth attributions and the same regions laid
/// over predicted segmentations.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PredictionFit {
    pub options: FitOptions,
    pub critical: f64,
    /// Non-null ground-truth records with a predicted frame.
    pub compared: usize,
    /// Of those, regions that hit no predicted mask.
    pub predicted_null: usize,
    pub accepted: usize,
    pub accept_rate: f64,
    pub median_distance: Option<f64>,
    pub p90_distance: Option<f64>,
    /// Per compared record, in record order; `None` for predicted nulls.
    #[serde(skip)]
    pub distances: Vec<Option<f64>>,
}

fn percentile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64))
}

/// Re-attributes every non-null record against `predicted` and tests each
/// predicted distribution (observed) against the ground truth (expected).
pub fn prediction_fit(
    records: &[AttributionRecord],
    predicted: &CorpusSet,
    attribution: AttributionOptions,
    opts: FitOptions,
) -> Result<PredictionFit> {
    let critical = chi_square_critical(opts.dof, opts.alpha)?;
    let slots = predicted.taxonomy().slots();
    let distances: Vec<Option<f64>> = records
        .par_iter()
        .filter(|r| !r.is_null())
        .filter_map(|r| {
            predicted
                .frame(&r.fixation.dog_id, r.frame_index)
                .map(|f| (r, f))
        })
        .map(|(r, (camera, frame))| {
            let region = r.region(camera.width_px(), camera.height_px());
            let ov = region_overlap(&region, frame, slots, attribution)?;
            if ov.counts.iter().all(|&c| c == 0) {
                return Ok(None);
            }
            let d = match opts.input {
                ChiInput::Probabilities => {
                    let p = ClassDistribution::from_counts(&ov.counts);
                    chi_square_distance(&p, &r.distribution, opts.mode)?
                }
                ChiInput::Counts => {
                    let obs: Vec<f64> = ov.counts.iter().map(|&c| c as f64).collect();
                    let exp: Vec<f64> = r.counts.iter().map(|&c| c as f64).collect();
                    chi_square_statistic(&obs, &exp, opts.mode)?
                }
            };
            Ok(Some(d))
        })
        .collect::<Result<_>>()?;
    let mut sorted: Vec<f64> = distances.iter().flatten().copied().collect();
    sorted.sort_by(f64::total_cmp);
    let accepted = sorted.iter().filter(|&&d| d < critical).count();
    let compared = distances.len();
    Ok(PredictionFit {
        options: opts,
        critical,
        compared,
        predicted_null: compared - sorted.len(),
        accepted,
        accept_rate: if compared == 0 {
            0.0
        } else {
            accepted as f64 / compared as f64
        },
        median_distance: percentile(&sorted, 0.5),
        p90_distance: percentile(&sorted, 0.9),
        distances,
    })
}
