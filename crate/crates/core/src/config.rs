//! Pipeline configuration. Defaults suit head-mounted scene cameras at 29.96 fps.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attribution::{
    AttributionOptions, BatchOptions, ChiInput, ChiMode, FitOptions, DEFAULT_ALPHA, DEFAULT_DOF,
};
use crate::error::{Error, Result};
use crate::gaze::{
    estimate_accuracy, DogProfile, FixationParams, DEFAULT_DISPERSION_DEG, MIN_FIXATION_MS,
    SNIFFING_MAX_MASKS,
};
use crate::io::read_calibration;
use crate::saliency::{AucOptions, FprMode, SaliencyConfig, SaliencyMode, DEFAULT_JITTER};
use crate::scene::{CameraModel, ClassTaxonomy};
use crate::seg_eval::DEFAULT_IOU_THRESHOLD;
use crate::stats::RowMode;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixationSection {
    pub min_duration_ms: f64,
    /// Largest spread along either axis, degrees of visual angle.
    pub dispersion_deg: f64,
    /// Longest tolerated sample gap, in frames.
    pub max_gap_frames: f64,
}

impl Default for FixationSection {
    fn default() -> Self {
        FixationSection {
            min_duration_ms: MIN_FIXATION_MS,
            dispersion_deg: DEFAULT_DISPERSION_DEG,
            max_gap_frames: 3.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SniffingSection {
    /// Frames showing at most this many masks are dropped.
    pub max_masks: usize,
}

impl Default for SniffingSection {
    fn default() -> Self {
        SniffingSection {
            max_masks: SNIFFING_MAX_MASKS,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttributionSection {
    pub include_background: bool,
    pub chi_mode: ChiMode,
    pub chi_input: ChiInput,
    pub alpha: f64,
    pub dof: u32,
}

impl Default for AttributionSection {
    fn default() -> Self {
        AttributionSection {
            include_background: false,
            chi_mode: ChiMode::Pearson,
            chi_input: ChiInput::Probabilities,
            alpha: DEFAULT_ALPHA,
            dof: DEFAULT_DOF,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegEvalSection {
    pub iou_threshold: f64,
}

impl Default for SegEvalSection {
    fn default() -> Self {
        SegEvalSection {
            iou_threshold: DEFAULT_IOU_THRESHOLD,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsSection {
    pub row_mode: RowMode,
    /// Pairwise class contrasts (uncorrected).
    pub contrasts: bool,
}

impl Default for StatsSection {
    fn default() -> Self {
        StatsSection {
            row_mode: RowMode::Weighted,
            contrasts: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaliencySection {
    pub mode: SaliencyMode,
    pub fpr: FprMode,
    pub jitter: f64,
    pub model: SaliencyConfig,
}

impl Default for SaliencySection {
    fn default() -> Self {
        SaliencySection {
            mode: SaliencyMode::Color,
            fpr: FprMode::PerFrame,
            jitter: DEFAULT_JITTER,
            model: SaliencyConfig::default(),
        }
    }
}

/// A dog's spatial accuracy, given directly or estimated from calibration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DogEntry {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy_deg: Option<f64>,
    /// Calibration CSV, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub taxonomy: ClassTaxonomy,
    pub camera: CameraModel,
    pub fixation: FixationSection,
    pub sniffing: SniffingSection,
    pub attribution: AttributionSection,
    pub seg_eval: SegEvalSection,
    pub stats: StatsSection,
    pub saliency: SaliencySection,
    pub dogs: Vec<DogEntry>,
    /// Directory that relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            taxonomy: ClassTaxonomy::default(),
            camera: CameraModel::reference(640, 480).expect("reference camera is valid"),
            fixation: FixationSection::default(),
            sniffing: SniffingSection::default(),
            attribution: AttributionSection::default(),
            seg_eval: SegEvalSection::default(),
            stats: StatsSection::default(),
            saliency: SaliencySection::default(),
            dogs: Vec::new(),
            base_dir: PathBuf::from("."),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(s: &str, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg: PipelineConfig = toml::from_str(s).map_err(|source| Error::Toml {
            path: path.to_path_buf(),
            source,
        })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        PipelineConfig::from_toml_str(&s, path)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let a = &self.attribution;
        if !(a.alpha > 0.0 && a.alpha < 1.0) {
            return Err(Error::param(
                "attribution.alpha",
                format!("must lie in (0, 1), got {}", a.alpha),
            ));
        }
        if a.dof == 0 {
            return Err(Error::param("attribution.dof", "must be positive"));
        }
        let f = &self.fixation;
        for (name, v) in [
            ("fixation.min_duration_ms", f.min_duration_ms),
            ("fixation.dispersion_deg", f.dispersion_deg),
            ("fixation.max_gap_frames", f.max_gap_frames),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        let t = self.seg_eval.iou_threshold;
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::param(
                "seg_eval.iou_threshold",
                format!("must lie in (0, 1], got {t}"),
            ));
        }
        if !(self.saliency.jitter >= 0.0) {
            return Err(Error::param("saliency.jitter", "must be non-negative"));
        }
        let mut seen = std::collections::HashSet::new();
        for d in &self.dogs {
            if !seen.insert(d.id.as_str()) {
                return Err(Error::Validation(format!("dog `{}` is listed twice", d.id)));
            }
            if d.accuracy_deg.is_none() && d.calibration.is_none() {
                return Err(Error::Validation(format!(
                    "dog `{}` needs accuracy_deg or a calibration file",
                    d.id
                )));
            }
        }
        Ok(())
    }

    pub fn fixation_params(&self) -> FixationParams {
        FixationParams {
            min_duration_ms: self.fixation.min_duration_ms,
            dispersion_px: self.fixation.dispersion_deg * self.camera.px_per_deg(),
            max_gap_ms: self.fixation.max_gap_frames * 1000.0 / self.camera.fps(),
        }
    }

    pub fn batch_options(&self) -> BatchOptions {
        BatchOptions {
            attribution: self.attribution_options(),
            sniffing_max_masks: self.sniffing.max_masks,
        }
    }

    pub fn attribution_options(&self) -> AttributionOptions {
        AttributionOptions {
            include_background: self.attribution.include_background,
        }
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            mode: self.attribution.chi_mode,
            input: self.attribution.chi_input,
            dof: self.attribution.dof,
            alpha: self.attribution.alpha,
        }
    }

    pub fn auc_options(&self) -> AucOptions {
        AucOptions {
            mode: self.saliency.fpr,
            jitter: self.saliency.jitter,
            seed: self.seed,
        }
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    /// Profiles for every configured dog; calibration files are read when no
    /// accuracy is given.
    pub fn profiles(&self) -> Result<BTreeMap<String, DogProfile>> {
        self.dogs
            .iter()
            .map(|d| {
                let acc = match (d.accuracy_deg, &d.calibration) {
                    (Some(a), _) => a,
                    (None, Some(p)) => {
                        estimate_accuracy(&read_calibration(self.resolve(p))?, &self.camera)?
                    }
                    (None, None) => return Err(Error::MissingProfile(d.id.clone())),
                };
                Ok((
                    d.id.clone(),
                    DogProfile::new(d.id.clone(), acc, &self.camera)?,
                ))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_documented_constants() {
        let cfg = PipelineConfig::default();
        assert_eq!(cfg.fixation.min_duration_ms, 100.0);
        assert_eq!(cfg.sniffing.max_masks, 2);
        assert_eq!(cfg.attribution.alpha, 0.05);
        assert_eq!(cfg.attribution.dof, 15);
        assert_eq!(cfg.seg_eval.iou_threshold, 0.75);
    }

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = PipelineConfig::default();
        cfg.dogs.push(DogEntry {
            id: "a".into(),
            accuracy_deg: Some(5.0),
            calibration: None,
        });
        let s = cfg.to_toml_string();
        let back = PipelineConfig::from_toml_str(&s, "pipeline.toml").unwrap();
        assert_eq!(back.dogs, cfg.dogs);
        assert_eq!(back.attribution, cfg.attribution);
        assert_eq!(back.saliency, cfg.saliency);
    }

    #[test]
    fn partial_file_and_validation() {
        let cfg =
            PipelineConfig::from_toml_str("[attribution]\nchi_mode = \"symmetric\"\n", "x.toml")
                .unwrap();
        assert_eq!(cfg.attribution.chi_mode, ChiMode::Symmetric);
        assert_eq!(cfg.attribution.dof, 15);
        assert!(PipelineConfig::from_toml_str("[attribution]\nalpha = 1.5\n", "x.toml").is_err());
        assert!(PipelineConfig::from_toml_str("[[dogs]]\nid = \"a\"\n", "x.toml").is_err());
        assert!(PipelineConfig::from_toml_str("bogus = 1\n", "x.toml").is_err());
    }
}
