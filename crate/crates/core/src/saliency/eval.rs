use std::collections::BTreeMap;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;

use super::maps::{load_image, load_map};
use super::model::{saliency_map, SaliencyConfig, SaliencyMap, SaliencyMode};
use super::roc::{auc_judd, fixation_score, AucOptions, FprMode, RocCurve};
use crate::attribution::AttributionRecord;
use crate::corpus::CorpusSet;
use crate::error::{Error, Result};

/// Files keyed by `(dog id, frame index)`; a `None` dog serves every dog.
pub type FileIndex = BTreeMap<(Option<String>, u64), PathBuf>;

/// Where the maps for scored frames come from.
pub enum MapSource<'a> {
    /// Precomputed grayscale maps.
    Maps(&'a FileIndex),
    /// Scene frames run through the built-in model.
    Frames {
        index: &'a FileIndex,
        mode: SaliencyMode,
        config: &'a SaliencyConfig,
    },
}

impl MapSource<'_> {
    pub fn label(&self) -> String {
        match self {
            MapSource::Maps(_) => "external".to_string(),
            MapSource::Frames { mode, .. } => format!("generated-{mode}"),
        }
    }

    fn path(&self, dog: &str, frame: u64) -> Option<&PathBuf> {
        let index = match self {
            MapSource::Maps(i) => i,
            MapSource::Frames { index, .. } => index,
        };
        index
            .get(&(Some(dog.to_string()), frame))
            .or_else(|| index.get(&(None, frame)))
    }

    fn load(&self, path: &PathBuf) -> Result<SaliencyMap> {
        match self {
            MapSource::Maps(_) => load_map(path),
            MapSource::Frames { mode, config, .. } => {
                saliency_map(&load_image(path)?, *mode, config)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SaliencyEvaluation {
    pub source: String,
    pub fixations: usize,
    pub maps: usize,
    /// Scored fixations whose frame had no map.
    pub missing: usize,
    /// Maps normalized from a constant response.
    pub degenerate_maps: usize,
    pub auc_per_frame: f64,
    pub auc_pooled: f64,
    /// Curve for the configured false-positive mode.
    pub roc: RocCurve,
}

/// Scores each non-null fixation region on its frame's map and computes
/// AUC-Judd in both false-positive modes.
pub fn evaluate_saliency(
    records: &[AttributionRecord],
    corpora: &CorpusSet,
    source: &MapSource<'_>,
    opts: &AucOptions,
) -> Result<SaliencyEvaluation> {
    let mut needed: BTreeMap<(String, u64), PathBuf> = BTreeMap::new();
    let mut missing = 0;
    for r in records.iter().filter(|r| !r.is_null()) {
        let key = (r.fixation.dog_id.clone(), r.frame_index);
        match source.path(&key.0, key.1) {
            Some(p) => {
                needed.insert(key, p.clone());
            }
            None => missing += 1,
        }
    }
    let loaded: Vec<((String, u64), SaliencyMap)> = needed
        .into_par_iter()
        .map(|(k, p)| source.load(&p).map(|m| (k, m)))
        .collect::<Result<_>>()?;
    let slot: BTreeMap<&(String, u64), usize> = loaded
        .iter()
        .enumerate()
        .map(|(i, (k, _))| (k, i))
        .collect();

    let mut scores = Vec::new();
    let mut map_of = Vec::new();
    for r in records.iter().filter(|r| !r.is_null()) {
        let Some(&i) = slot.get(&(r.fixation.dog_id.clone(), r.frame_index)) else {
            continue;
        };
        let (camera, _) = corpora
            .frame(&r.fixation.dog_id, r.frame_index)
            .ok_or_else(|| Error::MissingFrame {
                dog_id: r.fixation.dog_id.clone(),
                first: r.frame_index,
                last: r.frame_index,
            })?;
        let map = &loaded[i].1;
        if map.dims() != camera.dims() {
            return Err(Error::DimensionMismatch {
                expected: camera.dims(),
                found: map.dims(),
            });
        }
        scores.push(fixation_score(
            map,
            &r.region(camera.width_px(), camera.height_px()),
        )?);
        map_of.push(i);
    }
    if scores.is_empty() {
        return Err(Error::Validation("no fixation has a saliency map".into()));
    }
    let maps: Vec<&SaliencyMap> = loaded.iter().map(|(_, m)| m).collect();
    let per_frame = auc_judd(
        &scores,
        &map_of,
        &maps,
        &AucOptions {
            mode: FprMode::PerFrame,
            ..*opts
        },
    )?;
    let pooled = auc_judd(
        &scores,
        &map_of,
        &maps,
        &AucOptions {
            mode: FprMode::Pooled,
            ..*opts
        },
    )?;
    Ok(SaliencyEvaluation {
        source: source.label(),
        fixations: scores.len(),
        maps: maps.len(),
        missing,
        degenerate_maps: maps.iter().filter(|m| m.degenerate).count(),
        auc_per_frame: per_frame.auc,
        auc_pooled: pooled.auc,
        roc: match opts.mode {
            FprMode::PerFrame => per_frame,
            FprMode::Pooled => pooled,
        },
    })
}
