//! Tabular and line-oriented file formats.
//!
//! * gaze CSV: `t_ms,x_px,y_px,valid` (`valid` is `1`/`0` or `true`/`false`)
//! * calibration CSV: `frame,known_x,known_y,est_x,est_y`
//! * fixation CSV: `dog_id,start_ms,end_ms,x,y,first_frame,last_frame`
//! * attribution JSONL: one object per fixation with `dog_id`, `frame`,
//!   `null`, `probs`, `occupancy` and `pixels` keyed by class name.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::attribution::{AttributionRecord, ClassDistribution};
use crate::error::{Error, Result};
use crate::gaze::{CalibrationObservation, Fixation, FrameSpan, GazeSample};
use crate::scene::{ClassId, ClassTaxonomy};

fn csv_err(path: &Path, source: csv::Error) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

#[derive(Deserialize)]
struct RawGaze {
    t_ms: f64,
    x_px: f64,
    y_px: f64,
    valid: String,
}

fn parse_flag(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" => Some(true),
        "0" | "false" => Some(false),
        _ => None,
    }
}

pub fn read_gaze_from<R: Read>(reader: R, path: &Path) -> Result<Vec<GazeSample>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for (line, row) in rdr.deserialize::<RawGaze>().enumerate() {
        let row = row.map_err(|e| csv_err(path, e))?;
        let valid = parse_flag(&row.valid).ok_or_else(|| {
            Error::Format(format!(
                "{}: row {}: bad valid flag `{}`",
                path.display(),
                line + 2,
                row.valid
            ))
        })?;
        out.push(GazeSample {
            t_ms: row.t_ms,
            x_px: row.x_px,
            y_px: row.y_px,
            valid,
        });
    }
    Ok(out)
}

pub fn read_gaze(path: impl AsRef<Path>) -> Result<Vec<GazeSample>> {
    let path = path.as_ref();
    read_gaze_from(open(path)?, path)
}

pub fn write_gaze(path: impl AsRef<Path>, samples: &[GazeSample]) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "t_ms,x_px,y_px,valid").map_err(io)?;
    for s in samples {
        writeln!(w, "{},{},{},{}", s.t_ms, s.x_px, s.y_px, u8::from(s.valid)).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_calibration(path: impl AsRef<Path>) -> Result<Vec<CalibrationObservation>> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(open(path)?);
    rdr.deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| csv_err(path, e))
}

pub fn write_calibration(path: impl AsRef<Path>, obs: &[CalibrationObservation]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_writer(create(path)?);
    for o in obs {
        w.serialize(o).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize, Deserialize)]
struct FixationRow {
    dog_id: String,
    start_ms: f64,
    end_ms: f64,
    x: f64,
    y: f64,
    first_frame: u64,
    last_frame: u64,
}

pub fn read_fixations(path: impl AsRef<Path>) -> Result<Vec<Fixation>> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(open(path)?);
    let mut out = Vec::new();
    for row in rdr.deserialize::<FixationRow>() {
        let r = row.map_err(|e| csv_err(path, e))?;
        if r.last_frame < r.first_frame || r.end_ms < r.start_ms {
            return Err(Error::Format(format!(
                "{}: fixation of `{}` at {} ms ends before it starts",
                path.display(),
                r.dog_id,
                r.start_ms
            )));
        }
        out.push(Fixation {
            dog_id: r.dog_id,
            start_ms: r.start_ms,
            end_ms: r.end_ms,
            x: r.x,
            y: r.y,
            frames: FrameSpan {
                first: r.first_frame,
                last: r.last_frame,
            },
        });
    }
    Ok(out)
}

pub fn write_fixations(path: impl AsRef<Path>, fixations: &[Fixation]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_writer(create(path)?);
    for f in fixations {
        w.serialize(FixationRow {
            dog_id: f.dog_id.clone(),
            start_ms: f.start_ms,
            end_ms: f.end_ms,
            x: f.x,
            y: f.y,
            first_frame: f.frames.first,
            last_frame: f.frames.last,
        })
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize, Deserialize)]
struct RecordLine {
    dog_id: String,
    frame: u64,
    null: bool,
    probs: IndexMap<String, f64>,
    occupancy: IndexMap<String, f64>,
    pixels: IndexMap<String, u64>,
    start_ms: f64,
    end_ms: f64,
    x: f64,
    y: f64,
    first_frame: u64,
    last_frame: u64,
    radius_px: u32,
}

/// Serializes one record as a single JSON line (no trailing newline).
pub fn record_to_json(rec: &AttributionRecord, taxonomy: &ClassTaxonomy) -> String {
    let named = |v: &[f64]| -> IndexMap<String, f64> {
        taxonomy
            .all_ids()
            .map(|id| {
                (
                    taxonomy.name(id).to_string(),
                    v.get(id.index()).copied().unwrap_or(0.0),
                )
            })
            .collect()
    };
    let line = RecordLine {
        dog_id: rec.fixation.dog_id.clone(),
        frame: rec.frame_index,
        null: rec.is_null(),
        probs: rec.distribution.probs().map(named).unwrap_or_default(),
        occupancy: named(&rec.occupancy),
        pixels: taxonomy
            .all_ids()
            .map(|id| {
                (
                    taxonomy.name(id).to_string(),
                    rec.counts.get(id.index()).copied().unwrap_or(0),
                )
            })
            .collect(),
        start_ms: rec.fixation.start_ms,
        end_ms: rec.fixation.end_ms,
        x: rec.fixation.x,
        y: rec.fixation.y,
        first_frame: rec.fixation.frames.first,
        last_frame: rec.fixation.frames.last,
        radius_px: rec.radius_px,
    };
    serde_json::to_string(&line).expect("record serializes")
}

pub fn write_records(
    path: impl AsRef<Path>,
    records: &[AttributionRecord],
    taxonomy: &ClassTaxonomy,
) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    for r in records {
        writeln!(w, "{}", record_to_json(r, taxonomy)).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn by_slot<T: Copy + Default>(
    map: &IndexMap<String, T>,
    taxonomy: &ClassTaxonomy,
    what: &str,
) -> Result<Vec<T>> {
    let mut v = vec![T::default(); taxonomy.slots()];
    for (name, &x) in map {
        let id = taxonomy
            .id_of(name)
            .ok_or_else(|| Error::Format(format!("{what}: unknown class `{name}`")))?;
        v[id.index()] = x;
    }
    Ok(v)
}

pub fn record_from_json(line: &str, taxonomy: &ClassTaxonomy) -> Result<AttributionRecord> {
    let l: RecordLine = serde_json::from_str(line).map_err(|source| Error::Json {
        path: "<record>".into(),
        source,
    })?;
    let distribution = if l.null {
        ClassDistribution::null(taxonomy.slots())
    } else {
        ClassDistribution::from_probs(by_slot(&l.probs, taxonomy, "probs")?)?
    };
    Ok(AttributionRecord {
        fixation: Fixation {
            dog_id: l.dog_id,
            start_ms: l.start_ms,
            end_ms: l.end_ms,
            x: l.x,
            y: l.y,
            frames: FrameSpan {
                first: l.first_frame,
                last: l.last_frame,
            },
        },
        frame_index: l.frame,
        radius_px: l.radius_px,
        distribution,
        occupancy: by_slot(&l.occupancy, taxonomy, "occupancy")?,
        counts: by_slot(&l.pixels, taxonomy, "pixels")?,
    })
}

pub fn read_records(
    path: impl AsRef<Path>,
    taxonomy: &ClassTaxonomy,
) -> Result<Vec<AttributionRecord>> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for (i, line) in BufReader::new(open(path)?).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = record_from_json(&line, taxonomy)
            .map_err(|e| Error::Format(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

/// Probability of `class` in a record, zero for nulls.
pub fn record_prob(rec: &AttributionRecord, class: ClassId) -> f64 {
    rec.distribution.get(class)
}
