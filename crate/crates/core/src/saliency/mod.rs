//! Low-level saliency baseline and fixation-based ROC evaluation.

mod eval;
mod maps;
mod model;
mod roc;

pub use eval::{evaluate_saliency, FileIndex, MapSource, SaliencyEvaluation};
pub use maps::{frame_index_of, load_image, load_map, map_index, save_map};
pub use model::{saliency_map, Image, SaliencyConfig, SaliencyMap, SaliencyMode};
pub use roc::{auc_judd, fixation_score, AucOptions, FprMode, RocCurve, RocPoint, DEFAULT_JITTER};
