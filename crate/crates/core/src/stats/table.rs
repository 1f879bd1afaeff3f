use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::Sample;
use crate::attribution::AttributionRecord;
use crate::corpus::CorpusSet;
use crate::error::{Error, Result};
use crate::scene::ClassId;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Moments {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation; zero for a single value.
    pub sd: f64,
}

impl Moments {
    pub fn of(values: &[f64]) -> Option<Moments> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Moments { n, mean, sd })
    }
}

/// One dog's exposure to, and attention on, one class.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BehaviorCell {
    /// Fixation frames showing the class.
    pub frames_in_view: usize,
    /// Fixations with positive probability on the class.
    pub fixated: usize,
    /// Share of fixation frames showing the class.
    pub time_in_view: f64,
    /// Mean probability of the class over fixations where it was in view.
    pub time_fixated_in_view: Option<f64>,
    /// Per-instance area as a share of the frame.
    pub size_in_view: Option<Moments>,
    /// Share of the fixation region under the class when fixated.
    pub region_occupancy: Option<Moments>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassSummary {
    pub class: String,
    /// Across dogs.
    pub time_in_view: Option<Moments>,
    /// Across dogs that had the class in view.
    pub time_fixated_in_view: Option<Moments>,
    /// Pooled over all instances.
    pub size_in_view: Option<Moments>,
    /// Pooled over all fixations on the class.
    pub region_occupancy: Option<Moments>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BehaviorTable {
    pub classes: Vec<String>,
    pub dogs: Vec<String>,
    /// `cells[dog][class]`, classes in taxonomy order without background.
    pub cells: Vec<Vec<BehaviorCell>>,
    pub summary: Vec<ClassSummary>,
    /// Fixations per dog behind the table.
    pub fixations: Vec<usize>,
    /// Mean and spread of distinct classes in view per fixation frame.
    pub classes_in_view: Option<Moments>,
    pub time_in_view_denominator: &'static str,
}

#[derive(Default)]
struct Acc {
    frames_in_view: usize,
    prob_in_view: f64,
    fixated: usize,
    sizes: Sample,
    occupancy: Sample,
}

/// Builds the per-dog, per-class table from non-null attribution records.
pub fn behavior_table(records: &[AttributionRecord], corpora: &CorpusSet) -> Result<BehaviorTable> {
    let tax = corpora.taxonomy();
    let classes: Vec<ClassId> = tax.class_ids().collect();
    let mut per_dog: BTreeMap<&str, (usize, Vec<Acc>)> = BTreeMap::new();
    let mut in_view_counts = Vec::new();

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
        let entry = per_dog
            .entry(dog)
            .or_insert_with(|| (0, classes.iter().map(|_| Acc::default()).collect()));
        entry.0 += 1;
        let area = frame.frame_area() as f64;
        let mut distinct = 0usize;
        for (acc, &c) in entry.1.iter_mut().zip(&classes) {
            if !frame.has_class(c) {
                continue;
            }
            distinct += 1;
            let p = rec.distribution.get(c);
            acc.frames_in_view += 1;
            acc.prob_in_view += p;
            for m in frame.masks_of(c) {
                acc.sizes.push(m.area() as f64 / area);
            }
            if p > 0.0 {
                acc.fixated += 1;
                acc.occupancy
                    .push(rec.occupancy.get(c.index()).copied().unwrap_or(0.0));
            }
        }
        in_view_counts.push(distinct as f64);
    }

    let dogs: Vec<String> = per_dog.keys().map(|d| d.to_string()).collect();
    let fixations: Vec<usize> = per_dog.values().map(|(n, _)| *n).collect();
    let cells: Vec<Vec<BehaviorCell>> = per_dog
        .values()
        .map(|(n, accs)| {
            accs.iter()
                .map(|a| BehaviorCell {
                    frames_in_view: a.frames_in_view,
                    fixated: a.fixated,
                    time_in_view: a.frames_in_view as f64 / *n as f64,
                    time_fixated_in_view: (a.frames_in_view > 0)
                        .then(|| a.prob_in_view / a.frames_in_view as f64),
                    size_in_view: a.sizes.moments(),
                    region_occupancy: a.occupancy.moments(),
                })
                .collect()
        })
        .collect();

    let summary = classes
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            let mut sizes = Sample::default();
            let mut occ = Sample::default();
            for (_, accs) in per_dog.values() {
                sizes.extend(&accs[k].sizes);
                occ.extend(&accs[k].occupancy);
            }
            let tiv: Vec<f64> = cells.iter().map(|row| row[k].time_in_view).collect();
            let tfv: Vec<f64> = cells
                .iter()
                .filter_map(|row| row[k].time_fixated_in_view)
                .collect();
            ClassSummary {
                class: tax.name(c).to_string(),
                time_in_view: Moments::of(&tiv),
                time_fixated_in_view: Moments::of(&tfv),
                size_in_view: sizes.moments(),
                region_occupancy: occ.moments(),
            }
        })
        .collect();

    Ok(BehaviorTable {
        classes: classes.iter().map(|&c| tax.name(c).to_string()).collect(),
        dogs,
        cells,
        summary,
        fixations,
        classes_in_view: Moments::of(&in_view_counts),
        time_in_view_denominator: "fixation frames",
    })
}

fn pm(m: Option<Moments>) -> String {
    m.map_or_else(
        || "-".to_string(),
        |m| format!("{:.1} ± {:.1}", 100.0 * m.mean, 100.0 * m.sd),
    )
}

impl BehaviorTable {
    /// Dogs × classes grid of time in view, the ANOVA input.
    pub fn time_in_view_grid(&self) -> Vec<Vec<f64>> {
        self.cells
            .iter()
            .map(|row| row.iter().map(|c| c.time_in_view).collect())
            .collect()
    }

    /// Across-dog summary as an aligned text table (percentages).
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<18} {:>16} {:>22} {:>16} {:>28}",
            "Class",
            "Time in View",
            "Time Fixated in View",
            "Size in View",
            "% Fixation Region Occupied"
        );
        for c in &self.summary {
            let _ = writeln!(
                s,
                "{:<18} {:>16} {:>22} {:>16} {:>28}",
                c.class,
                pm(c.time_in_view),
                pm(c.time_fixated_in_view),
                pm(c.size_in_view),
                pm(c.region_occupancy)
            );
        }
        let _ = writeln!(
            s,
            "dogs {}  fixations {}  time-in-view denominator: {}",
            self.dogs.len(),
            self.fixations.iter().sum::<usize>(),
            self.time_in_view_denominator
        );
        s
    }
}
