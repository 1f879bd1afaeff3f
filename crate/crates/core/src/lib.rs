//! Gaze-to-object attribution for head-mounted eye tracking.
//!
//! The crate turns raw gaze samples into fixations, overlays each fixation's
//! accuracy disk on per-frame instance segmentations, and summarizes the
//! resulting class distributions. Companion modules evaluate segmentation
//! quality, fit the behavioural statistics, score saliency baselines and
//! synthesize corpora with known ground truth.

// `!(x >= 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attribution;
pub mod config;
pub mod corpus;
pub mod error;
pub mod gaze;
pub mod io;
pub mod report;
pub mod saliency;
pub mod scene;
pub mod seg_eval;
pub mod special;
pub mod stats;
pub mod synth;

pub use attribution::{
    attribute, batch_attribute, chi_square_distance, chi_square_statistic, goodness_of_fit,
    make_region, prediction_fit, AttributionOptions, AttributionRecord, BatchOptions, BatchOutput,
    BatchSummary, ChiInput, ChiMode, ClassDistribution, FitOptions, FixationRegion, GoodnessOfFit,
    PredictionFit,
};
pub use config::PipelineConfig;
pub use corpus::{CorpusSet, SegmentationCorpus};
pub use error::{Error, Result};
pub use gaze::{
    detect_fixations, estimate_accuracy, extract_fixations, filter_sniffing,
    CalibrationObservation, DogProfile, Fixation, FixationParams, FrameSpan, GazeSample,
};
pub use report::{build_report, stats_report, Report, ReportInputs, StatsReport};
pub use scene::{
    BBox, CameraModel, ClassId, ClassTaxonomy, FrameSegmentation, InstanceMask, RleMask,
};
pub use special::chi_square_critical;
pub use synth::{corrupt_predictions, synth_corpus, SynthConfig, SynthOutput};
