//! Deterministic synthetic walks with planted ground truth.
//!
//! Frames hold layered rectangle and ellipse masks (smaller shapes occlude
//! larger ones, so visible masks never overlap). Each fixation is planted on
//! a target class, with its whole accuracy disk touching no other class, or
//! on uncovered pixels for null fixations. The manifest records every
//! realized quantity so analyses can be checked against it.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::corpus::SegmentationCorpus;
use crate::error::{Error, Result};
use crate::gaze::{CalibrationObservation, GazeSample, DEFAULT_DISPERSION_DEG};
use crate::scene::{
    deg_to_px_radius, rasterize_disk, CameraModel, ClassId, ClassTaxonomy, FrameSegmentation,
    InstanceMask, RleMask, DEFAULT_CLASSES, REFERENCE_ACCURACY_DEG,
};
use crate::stats::Moments;

/// Per-class scene and attention plan. Sizes are fractions of the frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassPlan {
    #[serde(default)]
    pub availability: f64,
    #[serde(default = "default_size")]
    pub size_mean: f64,
    #[serde(default)]
    pub size_sd: f64,
    #[serde(default)]
    pub attention: f64,
}

fn default_size() -> f64 {
    0.05
}

/// How the set of classes in a frame is drawn.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum AvailabilityMode {
    /// One Bernoulli draw per class, corrected so that availabilities hold
    /// after frames with fewer than `min_objects` classes are rejected.
    Independent,
    /// Object count from a rounded normal, classes drawn without replacement
    /// in proportion to availability.
    ObjectCount { mean: f64, sd: f64 },
}

/// How fixation targets follow the attention distribution.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionMode {
    /// Target counts are fixed up front by quota; a target missing from its
    /// frame is added to it.
    #[default]
    Marginal,
    /// The target is drawn among the classes in view, weighted by attention.
    Conditional,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DogPlan {
    pub id: String,
    #[serde(default = "default_accuracy")]
    pub accuracy_deg: f64,
}

fn default_accuracy() -> f64 {
    REFERENCE_ACCURACY_DEG
}

/// Prediction corruption applied to ground-truth frames.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorruptionParams {
    /// Probability that a mask gets a different, uniformly drawn class.
    pub label_swap_rate: f64,
    /// Fraction of every row segment kept; 1 leaves masks intact.
    pub erosion_keep: f64,
    /// Probability that a mask is dropped.
    pub drop_rate: f64,
    /// Probability that a frame gains one spurious mask.
    pub spurious_rate: f64,
    /// Standard deviation of the confidence shortfall below 1.
    pub confidence_noise: f64,
}

impl Default for CorruptionParams {
    fn default() -> Self {
        CorruptionParams {
            label_swap_rate: 0.0,
            erosion_keep: 1.0,
            drop_rate: 0.0,
            spurious_rate: 0.0,
            confidence_noise: 0.0,
        }
    }
}

impl CorruptionParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("label_swap_rate", self.label_swap_rate),
            ("erosion_keep", self.erosion_keep),
            ("drop_rate", self.drop_rate),
            ("spurious_rate", self.spurious_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::param(name, format!("must lie in [0, 1], got {v}")));
            }
        }
        if !(self.confidence_noise >= 0.0 && self.confidence_noise.is_finite()) {
            return Err(Error::param(
                "confidence_noise",
                "must be finite and non-negative",
            ));
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        *self == CorruptionParams::default()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub camera: CameraModel,
    pub taxonomy: ClassTaxonomy,
    pub dogs: Vec<DogPlan>,
    pub fixations_per_dog: usize,
    /// Plans keyed by class name; unlisted classes never appear.
    pub classes: IndexMap<String, ClassPlan>,
    pub availability: AvailabilityMode,
    pub attention_mode: AttentionMode,
    /// Frames with fewer classes are redrawn.
    pub min_objects: usize,
    pub null_rate: f64,
    /// Uniform gaze noise around the planted point, degrees.
    pub jitter_deg: f64,
    pub duration_ms: [f64; 2],
    pub calibration_points: usize,
    pub corruption: Option<CorruptionParams>,
    /// Also write a rendered image per frame.
    pub render_frames: bool,
}

/// Availability, fixated share in view and size (percent, mean and sd) of
/// each default class, in taxonomy order.
const DEFAULT_PLANS: [(f64, f64, f64, f64); 15] = [
    (0.033, 0.012, 1.0, 0.3),
    (0.024, 0.099, 3.1, 1.0),
    (0.878, 0.144, 14.5, 5.1),
    (0.008, 0.348, 18.7, 6.3),
    (0.299, 0.064, 2.7, 1.0),
    (0.011, 0.145, 4.4, 2.2),
    (0.885, 0.381, 33.6, 9.1),
    (0.389, 0.157, 13.1, 5.8),
    (0.616, 0.174, 18.0, 6.4),
    (0.934, 0.269, 21.2, 6.5),
    (0.168, 0.027, 2.2, 1.1),
    (0.008, 0.077, 1.2, 1.2),
    (0.037, 0.036, 1.5, 1.3),
    (0.013, 0.049, 2.8, 2.7),
    (0.838, 0.070, 7.5, 3.3),
];

impl Default for SynthConfig {
    /// A walk resembling urban footage: availability and size per class, and
    /// attention proportional to availability times the share fixated in view.
    fn default() -> Self {
        let total: f64 = DEFAULT_PLANS.iter().map(|p| p.0 * p.1).sum();
        let classes = DEFAULT_CLASSES
            .iter()
            .zip(DEFAULT_PLANS)
            .map(|(&name, (avail, fixated, size, sd))| {
                (
                    name.to_string(),
                    ClassPlan {
                        availability: avail,
                        size_mean: size / 100.0,
                        size_sd: sd / 100.0,
                        attention: avail * fixated / total,
                    },
                )
            })
            .collect();
        SynthConfig {
            seed: 0,
            camera: CameraModel::reference(640, 480).expect("reference camera is valid"),
            taxonomy: ClassTaxonomy::default(),
            dogs: (1..=3)
                .map(|i| DogPlan {
                    id: format!("dog{i}"),
                    accuracy_deg: REFERENCE_ACCURACY_DEG,
                })
                .collect(),
            fixations_per_dog: 200,
            classes,
            availability: AvailabilityMode::Independent,
            attention_mode: AttentionMode::Marginal,
            min_objects: 3,
            null_rate: 0.015,
            jitter_deg: 0.25,
            duration_ms: [100.0, 600.0],
            calibration_points: 20,
            corruption: None,
            render_frames: false,
        }
    }
}

impl SynthConfig {
    pub fn from_toml_str(s: &str, path: impl AsRef<Path>) -> Result<Self> {
        let cfg: SynthConfig = toml::from_str(s).map_err(|source| Error::Toml {
            path: path.as_ref().to_path_buf(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        SynthConfig::from_toml_str(&s, path)
    }

    /// Plans in taxonomy order; slot 0 is background and unused.
    fn plans(&self) -> Result<Vec<ClassPlan>> {
        let empty = ClassPlan {
            availability: 0.0,
            size_mean: default_size(),
            size_sd: 0.0,
            attention: 0.0,
        };
        let mut plans = vec![empty; self.taxonomy.slots()];
        for (name, plan) in &self.classes {
            let id = self
                .taxonomy
                .id_of(name)
                .filter(|c| !c.is_background())
                .ok_or_else(|| Error::param("classes", format!("unknown class `{name}`")))?;
            plans[id.index()] = plan.clone();
        }
        Ok(plans)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dogs.is_empty() {
            return Err(Error::param("dogs", "need at least one dog"));
        }
        let mut ids = std::collections::HashSet::new();
        for d in &self.dogs {
            if d.id.is_empty() || !ids.insert(d.id.as_str()) {
                return Err(Error::param(
                    "dogs",
                    format!("dog ids must be unique and non-empty, got `{}`", d.id),
                ));
            }
            deg_to_px_radius(d.accuracy_deg, &self.camera)?;
        }
        if self.fixations_per_dog == 0 {
            return Err(Error::param("fixations_per_dog", "must be positive"));
        }
        let plans = self.plans()?;
        let frame_px = self.camera.frame_area() as f64;
        for (name, p) in &self.classes {
            let bad = |what: &str| Error::param("classes", format!("`{name}`: {what}"));
            if !(0.0..=1.0).contains(&p.availability) {
                return Err(bad("availability must lie in [0, 1]"));
            }
            if !(0.0..=1.0).contains(&p.attention) {
                return Err(bad("attention must lie in [0, 1]"));
            }
            if !(p.size_mean > 0.0 && p.size_mean <= 1.0) {
                return Err(bad(
                    "size_mean must lie in (0, 1]; a class cannot exceed the frame",
                ));
            }
            if p.size_mean * frame_px < 1.0 {
                return Err(bad("size_mean is below one pixel"));
            }
            if !(p.size_sd >= 0.0 && p.size_sd.is_finite()) {
                return Err(bad("size_sd must be finite and non-negative"));
            }
        }
        let attention: f64 = plans.iter().map(|p| p.attention).sum();
        if (attention - 1.0).abs() > 1e-6 {
            return Err(Error::param(
                "classes",
                format!("attention must sum to 1, got {attention}"),
            ));
        }
        if self.attention_mode == AttentionMode::Marginal {
            if let Some(c) = plans
                .iter()
                .position(|p| p.attention > 0.0 && p.availability == 0.0)
            {
                return Err(Error::param(
                    "classes",
                    format!(
                        "`{}` gets attention but is never available",
                        self.taxonomy.name(ClassId(c as u16))
                    ),
                ));
            }
        }
        if !(0.0..=1.0).contains(&self.null_rate) {
            return Err(Error::param("null_rate", "must lie in [0, 1]"));
        }
        if !(self.jitter_deg >= 0.0 && self.jitter_deg.is_finite()) {
            return Err(Error::param(
                "jitter_deg",
                "must be finite and non-negative",
            ));
        }
        if self.jitter_deg * 2.0 >= DEFAULT_DISPERSION_DEG {
            return Err(Error::param(
                "jitter_deg",
                "gaze noise would exceed the fixation dispersion limit",
            ));
        }
        let [lo, hi] = self.duration_ms;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::param("duration_ms", "need 0 < min <= max"));
        }
        let available = plans.iter().filter(|p| p.availability > 0.0).count();
        if self.min_objects > available {
            return Err(Error::param(
                "min_objects",
                format!(
                    "{} exceeds the {available} classes that can appear",
                    self.min_objects
                ),
            ));
        }
        if let AvailabilityMode::ObjectCount { mean, sd } = self.availability {
            if !(mean > 0.0 && sd >= 0.0 && mean.is_finite() && sd.is_finite()) {
                return Err(Error::param(
                    "availability",
                    "object count needs a positive mean and finite sd",
                ));
            }
        }
        for d in &self.dogs {
            let reach = 2
                * (u64::from(deg_to_px_radius(d.accuracy_deg, &self.camera)?) + self.margin_px())
                + 1;
            if reach > u64::from(self.camera.width_px().min(self.camera.height_px())) {
                return Err(Error::param(
                    "camera",
                    format!(
                        "fixation region of dog `{}` does not fit in the frame",
                        d.id
                    ),
                ));
            }
        }
        if let Some(c) = &self.corruption {
            c.validate()?;
        }
        Ok(())
    }

    fn jitter_px(&self) -> f64 {
        self.jitter_deg * self.camera.px_per_deg()
    }

    /// Slack around planted points covering gaze noise and centre rounding.
    fn margin_px(&self) -> u64 {
        self.jitter_px().ceil() as u64 + 1
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedFixation {
    pub dog_id: String,
    pub frame: u64,
    pub x: f64,
    pub y: f64,
    /// Target class name; `None` for a null fixation.
    pub target: Option<String>,
    /// Whether other masks had to be cleared around the point.
    pub cleared: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedDog {
    pub id: String,
    pub accuracy_deg: f64,
    pub radius_px: u32,
    pub fixations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedMoments {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
}

impl From<Moments> for PlantedMoments {
    fn from(m: Moments) -> Self {
        PlantedMoments {
            n: m.n,
            mean: m.mean,
            sd: m.sd,
        }
    }
}

/// Everything the generator planted, as realized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub camera: CameraModel,
    pub dogs: Vec<PlantedDog>,
    pub fixations: usize,
    /// Configured attention distribution.
    pub attention_planted: IndexMap<String, f64>,
    pub attention_counts: IndexMap<String, usize>,
    /// Target shares among non-null fixations.
    pub attention_realized: IndexMap<String, f64>,
    pub null_count: usize,
    pub null_rate: f64,
    pub availability_planted: IndexMap<String, f64>,
    /// Share of fixation frames showing the class.
    pub time_in_view: IndexMap<String, f64>,
    pub objects_per_frame: PlantedMoments,
    /// Visible mask area as a fraction of the frame, over frames showing it.
    pub size_in_view: IndexMap<String, PlantedMoments>,
    pub cleared_fixations: usize,
    pub planted: Vec<PlantedFixation>,
}

pub struct SynthOutput {
    pub corpora: Vec<SegmentationCorpus>,
    pub gaze: BTreeMap<String, Vec<GazeSample>>,
    pub calibration: BTreeMap<String, Vec<CalibrationObservation>>,
    pub predictions: Option<Vec<SegmentationCorpus>>,
    pub manifest: Manifest,
}

/// Scene, gaze point, target class and whether the point had to be cleared.
type FixationFrame = (Scene, (i64, i64), Option<ClassId>, bool);

const MAX_FRAME_ATTEMPTS: usize = 10_000;
const POINT_ATTEMPTS: usize = 64;

/// Probability that a Poisson-binomial count with per-class rates `q` is at
/// least `m`, optionally leaving class `skip` out.
fn count_at_least(q: &[f64], m: usize, skip: Option<usize>) -> f64 {
    let mut dist = vec![1.0];
    for (i, &p) in q.iter().enumerate() {
        if Some(i) == skip || p == 0.0 {
            continue;
        }
        let mut next = vec![0.0; dist.len() + 1];
        for (k, &d) in dist.iter().enumerate() {
            next[k] += d * (1.0 - p);
            next[k + 1] += d * p;
        }
        dist = next;
    }
    dist.iter().skip(m).sum()
}

/// Per-class draw rates whose marginals equal `target` once draws with
/// fewer than `m` classes are rejected.
pub fn conditioned_draw_rates(target: &[f64], m: usize) -> Result<Vec<f64>> {
    let mut q = target.to_vec();
    if m == 0 {
        return Ok(q);
    }
    for _ in 0..10_000 {
        let total = count_at_least(&q, m, None);
        if total <= 0.0 {
            break;
        }
        let marg: Vec<f64> = (0..q.len())
            .map(|c| q[c] * count_at_least(&q, m - 1, Some(c)) / total)
            .collect();
        let err = marg
            .iter()
            .zip(target)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if err < 1e-12 {
            return Ok(q);
        }
        for c in 0..q.len() {
            if marg[c] > 0.0 {
                q[c] = (q[c] * target[c] / marg[c]).min(1.0);
            }
        }
    }
    Err(Error::Validation(format!(
        "availabilities cannot hold when every frame must show at least {m} classes"
    )))
}

fn truncated_normal(rng: &mut ChaCha8Rng, mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    if sd == 0.0 {
        return mean.clamp(lo, hi);
    }
    let normal = Normal::new(mean, sd).expect("sd is finite and positive");
    for _ in 0..1000 {
        let v = normal.sample(rng);
        if (lo..=hi).contains(&v) {
            return v;
        }
    }
    mean.clamp(lo, hi)
}

/// A rectangle or ellipse of roughly `area` pixels, fully inside the frame.
fn draw_shape(rng: &mut ChaCha8Rng, area: f64, w: u32, h: u32) -> RleMask {
    let (wf, hf) = (f64::from(w), f64::from(h));
    let aspect = rng
        .random_range(-std::f64::consts::LN_2..=std::f64::consts::LN_2)
        .exp();
    let ellipse_fits = area <= 0.7 * std::f64::consts::PI / 4.0 * wf * hf;
    if rng.random_bool(0.5) && ellipse_fits {
        let mut rx = (area * aspect / std::f64::consts::PI).sqrt().min(wf / 2.0);
        let ry = (area / (std::f64::consts::PI * rx)).min(hf / 2.0);
        rx = (area / (std::f64::consts::PI * ry)).min(wf / 2.0);
        let cx = rng.random_range(rx..=wf - rx);
        let cy = rng.random_range(ry..=hf - ry);
        let m = RleMask::ellipse(w, h, cx - 0.5, cy - 0.5, rx, ry);
        if !m.is_empty() {
            return m;
        }
    }
    let mut bw = (area * aspect).sqrt().clamp(1.0, wf);
    let bh = (area / bw).clamp(1.0, hf);
    bw = (area / bh).clamp(1.0, wf);
    let (bw, bh) = (bw.round().max(1.0) as i64, bh.round().max(1.0) as i64);
    let x0 = rng.random_range(0..=i64::from(w) - bw);
    let y0 = rng.random_range(0..=i64::from(h) - bh);
    RleMask::rect(w, h, x0, y0, x0 + bw - 1, y0 + bh - 1)
}

fn random_pixel(rng: &mut ChaCha8Rng, mask: &RleMask) -> (i64, i64) {
    let mut k = rng.random_range(0..mask.area());
    let w = u64::from(mask.width());
    for (s, e) in mask.intervals() {
        if k < e - s {
            let idx = s + k;
            return ((idx % w) as i64, (idx / w) as i64);
        }
        k -= e - s;
    }
    unreachable!("k is below the mask area")
}

struct Scene {
    /// Visible masks in paint order, background first.
    masks: Vec<(ClassId, RleMask)>,
}

impl Scene {
    fn clear(&mut self, disk: &RleMask, keep: Option<ClassId>) -> Result<()> {
        for (c, m) in &mut self.masks {
            if Some(*c) != keep {
                *m = m.difference(disk)?;
            }
        }
        self.masks.retain(|(_, m)| !m.is_empty());
        Ok(())
    }
}

struct Generator<'a> {
    cfg: &'a SynthConfig,
    plans: Vec<ClassPlan>,
    draw_rates: Vec<f64>,
    rng: ChaCha8Rng,
}

impl Generator<'_> {
    fn draw_classes(&mut self, force: Option<ClassId>) -> Vec<ClassId> {
        let n = self.plans.len();
        let mut present: Vec<ClassId> = match self.cfg.availability {
            AvailabilityMode::Independent => (1..n)
                .filter(|&c| self.draw_rates[c] > 0.0 && self.rng.random_bool(self.draw_rates[c]))
                .map(|c| ClassId(c as u16))
                .collect(),
            AvailabilityMode::ObjectCount { mean, sd } => {
                let normal = Normal::new(mean, sd).expect("validated moments");
                let k = normal.sample(&mut self.rng).round().max(0.0) as usize;
                let mut pool: Vec<usize> = (1..n)
                    .filter(|&c| self.plans[c].availability > 0.0)
                    .collect();
                let mut chosen = Vec::new();
                while chosen.len() < k && !pool.is_empty() {
                    let total: f64 = pool.iter().map(|&c| self.plans[c].availability).sum();
                    let mut u = self.rng.random::<f64>() * total;
                    let mut pick = pool.len() - 1;
                    for (i, &c) in pool.iter().enumerate() {
                        if u < self.plans[c].availability {
                            pick = i;
                            break;
                        }
                        u -= self.plans[c].availability;
                    }
                    chosen.push(ClassId(pool.remove(pick) as u16));
                }
                chosen.sort_unstable();
                chosen
            }
        };
        if let Some(f) = force {
            if !present.contains(&f) {
                // a fixed object count is kept by swapping the target in
                if matches!(self.cfg.availability, AvailabilityMode::ObjectCount { .. })
                    && !present.is_empty()
                {
                    let k = self.rng.random_range(0..present.len());
                    present.remove(k);
                }
                present.push(f);
                present.sort_unstable();
            }
        }
        present
    }

    fn draw_scene(&mut self, classes: &[ClassId]) -> Result<Scene> {
        let (w, h) = self.cfg.camera.dims();
        let frame_px = f64::from(w) * f64::from(h);
        let mut drawn: Vec<(ClassId, RleMask)> = classes
            .iter()
            .map(|&c| {
                let p = &self.plans[c.index()];
                let size =
                    truncated_normal(&mut self.rng, p.size_mean, p.size_sd, 1.0 / frame_px, 1.0);
                (c, draw_shape(&mut self.rng, size * frame_px, w, h))
            })
            .collect();
        // larger shapes sit behind smaller ones
        drawn.sort_by(|a, b| b.1.area().cmp(&a.1.area()).then(a.0.cmp(&b.0)));
        let mut covered = RleMask::empty(w, h);
        let mut visible = Vec::with_capacity(drawn.len());
        for (c, m) in drawn.into_iter().rev() {
            let v = m.difference(&covered)?;
            covered = covered.union(&m)?;
            if !v.is_empty() {
                visible.push((c, v));
            }
        }
        visible.reverse();
        Ok(Scene { masks: visible })
    }

    fn in_bounds(&self, p: (i64, i64)) -> bool {
        let (w, h) = self.cfg.camera.dims();
        let m = self.cfg.margin_px() as i64;
        p.0 >= m && p.1 >= m && p.0 < i64::from(w) - m && p.1 < i64::from(h) - m
    }

    /// A point whose whole region only touches `target` (or nothing, for a
    /// null fixation). Returns the point and whether masks were cleared.
    fn place(
        &mut self,
        scene: &mut Scene,
        target: Option<ClassId>,
        radius: u32,
    ) -> Result<Option<((i64, i64), bool)>> {
        let (w, h) = self.cfg.camera.dims();
        let margin = self.cfg.margin_px();
        let reach = radius + margin as u32;
        let target_mask = match target {
            Some(t) => match scene.masks.iter().find(|m| m.0 == t) {
                Some((_, m)) => Some(m.clone()),
                None => return Ok(None),
            },
            None => None,
        };
        let others = RleMask::union_all(
            w,
            h,
            scene
                .masks
                .iter()
                .filter(|m| Some(m.0) != target)
                .map(|m| &m.1),
        )?;
        let mut fallback = None;
        for _ in 0..POINT_ATTEMPTS {
            let p = match &target_mask {
                Some(m) => random_pixel(&mut self.rng, m),
                None => {
                    let m = margin as i64;
                    (
                        self.rng.random_range(m..i64::from(w) - m),
                        self.rng.random_range(m..i64::from(h) - m),
                    )
                }
            };
            if !self.in_bounds(p) {
                continue;
            }
            if let Some(m) = &target_mask {
                let core = rasterize_disk(p, margin as u32, w, h);
                if m.intersect_count(&core)? != core.area() {
                    continue;
                }
            }
            let disk = rasterize_disk(p, reach, w, h);
            if others.intersect_count(&disk)? == 0 {
                return Ok(Some((p, false)));
            }
            // clearing should erase as few objects and pixels as possible
            let mut vanished = 0;
            let mut overlap = 0;
            for (_, m) in scene.masks.iter().filter(|m| Some(m.0) != target) {
                let hit = m.intersect_count(&disk)?;
                overlap += hit;
                vanished += usize::from(hit == m.area());
            }
            let cost = (vanished, overlap);
            if fallback
                .as_ref()
                .is_none_or(|f: &(_, _, (usize, u64))| cost < f.2)
            {
                fallback = Some((p, disk, cost));
            }
        }
        match fallback {
            Some((p, disk, _)) => {
                scene.clear(&disk, target)?;
                Ok(Some((p, true)))
            }
            None => Ok(None),
        }
    }

    fn attention_pick(&mut self, classes: &[ClassId]) -> Option<ClassId> {
        let total: f64 = classes
            .iter()
            .map(|c| self.plans[c.index()].attention)
            .sum();
        if total <= 0.0 {
            return None;
        }
        let mut u = self.rng.random::<f64>() * total;
        for &c in classes {
            let a = self.plans[c.index()].attention;
            if u < a {
                return Some(c);
            }
            u -= a;
        }
        classes
            .iter()
            .rev()
            .copied()
            .find(|c| self.plans[c.index()].attention > 0.0)
    }

    /// Draws a frame for one scheduled fixation. `slot` is `None` for null,
    /// `Some(None)` for a conditional target, `Some(Some(c))` for a fixed one.
    fn fixation_frame(
        &mut self,
        slot: Option<Option<ClassId>>,
        radius: u32,
    ) -> Result<FixationFrame> {
        for _ in 0..MAX_FRAME_ATTEMPTS {
            let force = slot.flatten();
            let classes = self.draw_classes(force);
            if classes.len() < self.cfg.min_objects {
                continue;
            }
            let target = match slot {
                None => None,
                Some(Some(c)) => Some(c),
                Some(None) => match self.attention_pick(&classes) {
                    Some(c) => Some(c),
                    None => continue,
                },
            };
            let mut scene = self.draw_scene(&classes)?;
            if scene.masks.len() < self.cfg.min_objects {
                continue;
            }
            let Some((p, cleared)) = self.place(&mut scene, target, radius)? else {
                continue;
            };
            if scene.masks.len() < self.cfg.min_objects {
                continue;
            }
            return Ok((scene, p, target, cleared));
        }
        Err(Error::Validation(
            "could not plant a fixation; class sizes or availabilities are infeasible".into(),
        ))
    }
}

/// Splits `total` into integer counts proportional to `weights` by largest
/// remainder, ties going to the lower index.
fn quota(weights: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 {
        return vec![0; weights.len()];
    }
    let exact: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let missing = total - counts.iter().sum::<usize>();
    for &i in order.iter().take(missing) {
        counts[i] += 1;
    }
    counts
}

fn far_corner(w: u32, h: u32, a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let corners = [
        (0.0, 0.0),
        (f64::from(w) - 1.0, 0.0),
        (0.0, f64::from(h) - 1.0),
        (f64::from(w) - 1.0, f64::from(h) - 1.0),
    ];
    let dist = |p: (f64, f64), q: (f64, f64)| (p.0 - q.0).hypot(p.1 - q.1);
    corners
        .into_iter()
        .max_by(|&p, &q| {
            dist(p, a)
                .min(dist(p, b))
                .total_cmp(&dist(q, a).min(dist(q, b)))
        })
        .expect("four corners")
}

fn calibration(
    rng: &mut ChaCha8Rng,
    cfg: &SynthConfig,
    accuracy_deg: f64,
) -> Vec<CalibrationObservation> {
    let (w, h) = cfg.camera.dims();
    let err_px = accuracy_deg * cfg.camera.px_per_deg();
    (0..cfg.calibration_points)
        .map(|i| {
            // paired +-5% magnitudes keep the mean error at the planted value
            let scale = match (i % 2, i + 1 == cfg.calibration_points) {
                (0, true) => 1.0,
                (0, false) => 1.05,
                _ => 0.95,
            };
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            let known_x = rng.random_range(0.0..f64::from(w));
            let known_y = rng.random_range(0.0..f64::from(h));
            CalibrationObservation {
                frame_index: i as u64,
                known_x,
                known_y,
                est_x: known_x + err_px * scale * angle.cos(),
                est_y: known_y + err_px * scale * angle.sin(),
            }
        })
        .collect()
}

fn names_map<T: Clone>(tax: &ClassTaxonomy, values: &[T]) -> IndexMap<String, T> {
    tax.class_ids()
        .map(|c| (tax.name(c).to_string(), values[c.index()].clone()))
        .collect()
}

/// Generates a complete synthetic corpus from `cfg`; identical configs give
/// identical output.
pub fn synth_corpus(cfg: &SynthConfig) -> Result<SynthOutput> {
    cfg.validate()?;
    let plans = cfg.plans()?;
    let availability: Vec<f64> = plans.iter().map(|p| p.availability).collect();
    let draw_rates = match cfg.availability {
        AvailabilityMode::Independent => conditioned_draw_rates(&availability, cfg.min_objects)?,
        AvailabilityMode::ObjectCount { .. } => availability.clone(),
    };
    let mut g = Generator {
        cfg,
        plans,
        draw_rates,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
    };
    let tax = &cfg.taxonomy;
    let slots = tax.slots();
    let (w, h) = cfg.camera.dims();
    let period = 1000.0 / cfg.camera.fps();

    let total = cfg.fixations_per_dog * cfg.dogs.len();
    let n_null = (cfg.null_rate * total as f64).round() as usize;
    let mut schedule: Vec<Option<Option<ClassId>>> = vec![None; n_null];
    match cfg.attention_mode {
        AttentionMode::Marginal => {
            let weights: Vec<f64> = g.plans.iter().map(|p| p.attention).collect();
            for (c, &k) in quota(&weights, total - n_null).iter().enumerate() {
                schedule.extend(std::iter::repeat_n(Some(Some(ClassId(c as u16))), k));
            }
        }
        AttentionMode::Conditional => {
            schedule.extend(std::iter::repeat_n(Some(None), total - n_null))
        }
    }
    schedule.shuffle(&mut g.rng);

    let mut corpora = Vec::new();
    let mut gaze = BTreeMap::new();
    let mut calib = BTreeMap::new();
    let mut planted = Vec::with_capacity(total);
    let mut planted_dogs = Vec::new();
    let mut in_view = vec![0usize; slots];
    let mut sizes: Vec<Vec<f64>> = vec![Vec::new(); slots];
    let mut object_counts = Vec::with_capacity(total);
    let mut counts = vec![0usize; slots];
    let frame_px = cfg.camera.frame_area() as f64;

    for (d, dog) in cfg.dogs.iter().enumerate() {
        let radius = deg_to_px_radius(dog.accuracy_deg, &cfg.camera)?;
        let jitter = cfg.jitter_px();
        let mut frames = Vec::with_capacity(cfg.fixations_per_dog);
        let mut points = Vec::with_capacity(cfg.fixations_per_dog);
        let mut cursor = 0u64;
        for slot in &schedule[d * cfg.fixations_per_dog..(d + 1) * cfg.fixations_per_dog] {
            let (scene, p, target, cleared) = g.fixation_frame(*slot, radius)?;
            let duration = g.rng.random_range(cfg.duration_ms[0]..=cfg.duration_ms[1]);
            let n_samples = (duration / period).ceil() as u64 + 1;
            let masks: Vec<InstanceMask> = scene
                .masks
                .into_iter()
                .enumerate()
                .map(|(i, (c, m))| InstanceMask::ground_truth(i as u32 + 1, c, m))
                .collect();
            object_counts.push(masks.len() as f64);
            for m in &masks {
                in_view[m.class_id.index()] += 1;
                sizes[m.class_id.index()].push(m.area() as f64 / frame_px);
            }
            if let Some(c) = target {
                counts[c.index()] += 1;
            }
            frames.push(FrameSegmentation::new(
                cursor,
                cursor as f64 * period,
                w,
                h,
                masks,
            )?);
            planted.push(PlantedFixation {
                dog_id: dog.id.clone(),
                frame: cursor,
                x: p.0 as f64,
                y: p.1 as f64,
                target: target.map(|c| tax.name(c).to_string()),
                cleared,
            });
            points.push((cursor, n_samples, (p.0 as f64, p.1 as f64)));
            // two saccade samples separate consecutive fixations
            cursor += n_samples + 2;
        }

        let mut samples = Vec::new();
        for (i, &(first, n, p)) in points.iter().enumerate() {
            for k in first..first + n {
                samples.push(GazeSample {
                    t_ms: (k as f64 + 0.5) * period,
                    x_px: p.0 + g.rng.random_range(-1.0..=1.0) * jitter,
                    y_px: p.1 + g.rng.random_range(-1.0..=1.0) * jitter,
                    valid: true,
                });
            }
            let next = points.get(i + 1).map_or(p, |q| q.2);
            let corner = far_corner(w, h, p, next);
            for k in first + n..first + n + 2 {
                samples.push(GazeSample {
                    t_ms: (k as f64 + 0.5) * period,
                    x_px: corner.0,
                    y_px: corner.1,
                    valid: true,
                });
            }
        }
        gaze.insert(dog.id.clone(), samples);
        calib.insert(
            dog.id.clone(),
            calibration(&mut g.rng, cfg, dog.accuracy_deg),
        );
        corpora.push(SegmentationCorpus::new(
            Some(dog.id.clone()),
            cfg.camera,
            tax.clone(),
            frames,
        )?);
        planted_dogs.push(PlantedDog {
            id: dog.id.clone(),
            accuracy_deg: dog.accuracy_deg,
            radius_px: radius,
            fixations: cfg.fixations_per_dog,
        });
    }

    let predictions = match &cfg.corruption {
        Some(params) => Some(
            corpora
                .iter()
                .enumerate()
                .map(|(i, c)| corrupt_predictions(c, params, cfg.seed.wrapping_add(i as u64 + 1)))
                .collect::<Result<Vec<_>>>()?,
        ),
        None => None,
    };

    let n_targets = total - n_null;
    let realized: Vec<f64> = counts
        .iter()
        .map(|&k| {
            if n_targets == 0 {
                0.0
            } else {
                k as f64 / n_targets as f64
            }
        })
        .collect();
    let size_moments: IndexMap<String, PlantedMoments> = tax
        .class_ids()
        .filter_map(|c| Moments::of(&sizes[c.index()]).map(|m| (tax.name(c).to_string(), m.into())))
        .collect();
    let manifest = Manifest {
        seed: cfg.seed,
        camera: cfg.camera,
        dogs: planted_dogs,
        fixations: total,
        attention_planted: names_map(
            tax,
            &g.plans.iter().map(|p| p.attention).collect::<Vec<_>>(),
        ),
        attention_counts: names_map(tax, &counts),
        attention_realized: names_map(tax, &realized),
        null_count: n_null,
        null_rate: n_null as f64 / total as f64,
        availability_planted: names_map(tax, &availability),
        time_in_view: names_map(
            tax,
            &in_view
                .iter()
                .map(|&k| k as f64 / total as f64)
                .collect::<Vec<_>>(),
        ),
        objects_per_frame: Moments::of(&object_counts)
            .expect("at least one frame")
            .into(),
        size_in_view: size_moments,
        cleared_fixations: planted.iter().filter(|p| p.cleared).count(),
        planted,
    };
    Ok(SynthOutput {
        corpora,
        gaze,
        calibration: calib,
        predictions,
        manifest,
    })
}

/// Predicted segmentations derived from ground truth by label swaps, row
/// erosion, drops, spurious masks and confidence noise. Each frame uses its
/// own random stream, so results do not depend on frame order.
pub fn corrupt_predictions(
    gt: &SegmentationCorpus,
    params: &CorruptionParams,
    seed: u64,
) -> Result<SegmentationCorpus> {
    params.validate()?;
    let tax = &gt.taxonomy;
    let classes: Vec<ClassId> = tax.class_ids().collect();
    let mut frames = Vec::with_capacity(gt.frames().len());
    for f in gt.frames() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(f.frame_index);
        let (w, h) = f.dims();
        let mut masks = Vec::with_capacity(f.masks.len() + 1);
        for m in &f.masks {
            if params.drop_rate > 0.0 && rng.random_bool(params.drop_rate) {
                continue;
            }
            let mut class = m.class_id;
            if params.label_swap_rate > 0.0 && rng.random_bool(params.label_swap_rate) {
                let k = rng.random_range(0..classes.len() - 1);
                let others: Vec<ClassId> = classes
                    .iter()
                    .copied()
                    .filter(|&c| c != m.class_id)
                    .collect();
                class = others[k];
            }
            let mask = if params.erosion_keep < 1.0 {
                m.mask.shrink_rows(params.erosion_keep)
            } else {
                m.mask.clone()
            };
            if mask.is_empty() {
                continue;
            }
            let confidence = confidence(&mut rng, params.confidence_noise);
            masks.push(InstanceMask::new(m.instance_id, class, mask, confidence)?);
        }
        if params.spurious_rate > 0.0 && rng.random_bool(params.spurious_rate) {
            let id = f.masks.iter().map(|m| m.instance_id).max().unwrap_or(0) + 1;
            let class = classes[rng.random_range(0..classes.len())];
            let area = rng.random_range(0.005..0.05) * f64::from(w) * f64::from(h);
            let mut shape_rng = ChaCha8Rng::seed_from_u64(rng.random());
            let mask = draw_shape(&mut shape_rng, area, w, h);
            let confidence = confidence(&mut rng, params.confidence_noise);
            masks.push(InstanceMask::new(id, class, mask, confidence)?);
        }
        frames.push(FrameSegmentation::new(
            f.frame_index,
            f.timestamp_ms,
            w,
            h,
            masks,
        )?);
    }
    SegmentationCorpus::new(gt.dog_id.clone(), gt.camera, tax.clone(), frames)
}

fn confidence(rng: &mut ChaCha8Rng, noise: f64) -> f64 {
    if noise == 0.0 {
        return 1.0;
    }
    let n: f64 = Normal::new(0.0, noise).expect("finite sd").sample(rng);
    (1.0 - n.abs()).clamp(0.0, 1.0)
}

fn class_color(c: ClassId) -> [u8; 3] {
    if c.is_background() {
        return [96, 96, 96];
    }
    let hue = (f64::from(c.0) * 0.618_033_988_749_895).fract() * 6.0;
    let value = 0.45 + 0.5 * f64::from((c.0 * 7) % 5) / 4.0;
    let sat = 0.65;
    let f = hue.fract();
    let (p, q, t) = (
        value * (1.0 - sat),
        value * (1.0 - sat * f),
        value * (1.0 - sat * (1.0 - f)),
    );
    let (r, g, b) = match hue as u32 {
        0 => (value, t, p),
        1 => (q, value, p),
        2 => (p, value, t),
        3 => (p, q, value),
        4 => (t, p, value),
        _ => (value, p, q),
    };
    [
        (r * 255.0).round() as u8,
        (g * 255.0).round() as u8,
        (b * 255.0).round() as u8,
    ]
}

/// Flat-shaded rendering of a frame with one fixed colour per class.
pub fn render_frame(frame: &FrameSegmentation) -> image::RgbImage {
    let (w, h) = frame.dims();
    let mut img = image::RgbImage::from_pixel(w, h, image::Rgb(class_color(ClassId::BACKGROUND)));
    for m in &frame.masks {
        let color = image::Rgb(class_color(m.class_id));
        for (s, e) in m.mask.intervals() {
            for idx in s..e {
                img.put_pixel(
                    (idx % u64::from(w)) as u32,
                    (idx / u64::from(w)) as u32,
                    color,
                );
            }
        }
    }
    img
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&s).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Writes the corpus, gaze, calibration, manifest and optional predictions
/// and frame renderings under `dir`; returns the files written.
pub fn write_synth(
    out: &SynthOutput,
    dir: impl AsRef<Path>,
    render_frames: bool,
) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for c in &out.corpora {
        let dog = c.dog_id.as_deref().unwrap_or("shared");
        let path = dir.join(format!("corpus_{dog}.json"));
        c.save(&path)?;
        written.push(path);
        if render_frames {
            let fdir = dir.join("frames").join(dog);
            std::fs::create_dir_all(&fdir).map_err(|e| Error::io(&fdir, e))?;
            for f in c.frames() {
                let path = fdir.join(format!("frame_{:06}.png", f.frame_index));
                render_frame(f).save(&path).map_err(|e| Error::Image {
                    path: path.clone(),
                    source: e,
                })?;
                written.push(path);
            }
        }
    }
    for (dog, samples) in &out.gaze {
        let path = dir.join(format!("gaze_{dog}.csv"));
        crate::io::write_gaze(&path, samples)?;
        written.push(path);
    }
    for (dog, obs) in &out.calibration {
        let path = dir.join(format!("calibration_{dog}.csv"));
        crate::io::write_calibration(&path, obs)?;
        written.push(path);
    }
    if let Some(preds) = &out.predictions {
        for c in preds {
            let dog = c.dog_id.as_deref().unwrap_or("shared");
            let path = dir.join(format!("pred_{dog}.json"));
            c.save(&path)?;
            written.push(path);
        }
    }
    let path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&out.manifest).map_err(|source| Error::Json {
        path: path.clone(),
        source,
    })?;
    std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(fixations: usize, seed: u64) -> SynthConfig {
        SynthConfig {
            seed,
            dogs: vec![DogPlan {
                id: "a".into(),
                accuracy_deg: REFERENCE_ACCURACY_DEG,
            }],
            fixations_per_dog: fixations,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn quota_is_exact() {
        assert_eq!(quota(&[0.5, 0.25, 0.25], 10), vec![5, 3, 2]);
        assert_eq!(quota(&[1.0, 0.0], 7), vec![7, 0]);
        assert_eq!(quota(&[0.2; 5], 3).iter().sum::<usize>(), 3);
    }

    #[test]
    fn conditioned_rates_restore_marginals() {
        let target = [0.0, 0.9, 0.5, 0.3, 0.7, 0.2];
        let q = conditioned_draw_rates(&target, 2).unwrap();
        let total = count_at_least(&q, 2, None);
        for c in 0..target.len() {
            let marg = q[c] * count_at_least(&q, 1, Some(c)) / total;
            assert!((marg - target[c]).abs() < 1e-9);
        }
        assert!(conditioned_draw_rates(&[0.1, 0.1], 3).is_err());
    }

    #[test]
    fn same_seed_same_output() {
        let a = synth_corpus(&small(30, 7)).unwrap();
        let b = synth_corpus(&small(30, 7)).unwrap();
        assert_eq!(a.manifest, b.manifest);
        assert_eq!(a.corpora, b.corpora);
        assert_eq!(a.gaze, b.gaze);
        let c = synth_corpus(&small(30, 8)).unwrap();
        assert_ne!(a.manifest.planted, c.manifest.planted);
    }

    #[test]
    fn visible_masks_are_disjoint() {
        let out = synth_corpus(&small(20, 1)).unwrap();
        for f in out.corpora[0].frames() {
            assert!(f.masks.len() >= 3);
            let union = f.union_mask();
            let sum: u64 = f.masks.iter().map(|m| m.area()).sum();
            assert_eq!(union.area(), sum);
        }
    }

    #[test]
    fn planted_regions_touch_only_target() {
        let cfg = small(40, 3);
        let out = synth_corpus(&cfg).unwrap();
        let r = out.manifest.dogs[0].radius_px + cfg.margin_px() as u32;
        let (w, h) = cfg.camera.dims();
        for (p, f) in out.manifest.planted.iter().zip(out.corpora[0].frames()) {
            assert_eq!(p.frame, f.frame_index);
            let disk = rasterize_disk((p.x as i64, p.y as i64), r, w, h);
            for m in &f.masks {
                let hit = m.mask.intersect_count(&disk).unwrap() > 0;
                let is_target = p.target.as_deref() == Some(cfg.taxonomy.name(m.class_id));
                assert!(!hit || is_target);
            }
        }
    }

    #[test]
    fn rejects_infeasible_configs() {
        let mut cfg = small(5, 0);
        cfg.classes.get_mut("sky").unwrap().size_mean = 1.5;
        assert!(synth_corpus(&cfg).is_err());
        let mut cfg = small(5, 0);
        cfg.classes.get_mut("sky").unwrap().attention += 0.5;
        assert!(cfg.validate().is_err());
        let mut cfg = small(5, 0);
        cfg.min_objects = 16;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn zero_corruption_is_identity() {
        let out = synth_corpus(&small(10, 2)).unwrap();
        let pred = corrupt_predictions(&out.corpora[0], &CorruptionParams::default(), 9).unwrap();
        assert_eq!(pred, out.corpora[0]);
    }

    #[test]
    fn corruption_is_order_independent() {
        let out = synth_corpus(&small(10, 2)).unwrap();
        let params = CorruptionParams {
            label_swap_rate: 0.3,
            drop_rate: 0.1,
            spurious_rate: 0.2,
            ..CorruptionParams::default()
        };
        let a = corrupt_predictions(&out.corpora[0], &params, 4).unwrap();
        let b = corrupt_predictions(&out.corpora[0], &params, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, out.corpora[0]);
    }

    #[test]
    fn toml_round_trip() {
        let cfg = small(5, 11);
        let s = toml::to_string(&cfg).unwrap();
        assert_eq!(SynthConfig::from_toml_str(&s, "synth.toml").unwrap(), cfg);
    }
}
