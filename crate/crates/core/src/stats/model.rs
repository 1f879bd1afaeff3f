use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::firth::{fit_firth_logistic, lr_test, FirthFit, FirthOptions, LrTest};
use crate::attribution::AttributionRecord;
use crate::corpus::CorpusSet;
use crate::error::{Error, Result};

/// How a fixation's class distribution becomes regression outcomes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowMode {
    /// One row per (fixation, in-view class), outcome `P > 0`.
    Unweighted,
    /// Each (fixation, in-view class) contributes outcome 1 with weight `P`
    /// and outcome 0 with weight `1 - P`.
    #[default]
    Weighted,
}

/// Aggregated logistic-regression rows: identical covariate patterns and
/// outcomes are merged by summing their weights.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DesignRows {
    pub names: Vec<String>,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub w: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairwiseContrast {
    pub a: String,
    pub b: String,
    pub lr: LrTest,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassEffectModels {
    pub mode: RowMode,
    /// (fixation, in-view class) observations behind the fits.
    pub observations: usize,
    pub classes: Vec<String>,
    pub dogs: Vec<String>,
    pub interaction_terms: usize,
    pub full: FirthFit,
    pub main_effects: FirthFit,
    pub dog_only: FirthFit,
    pub class_effect: LrTest,
    pub interaction_effect: LrTest,
    /// Class-pair contrasts without multiplicity correction.
    pub contrasts: Vec<PairwiseContrast>,
    pub contrast_correction: &'static str,
}

/// Outcome weight totals per (dog, class) cell.
#[derive(Clone, Copy, Default)]
struct Cell {
    pos: f64,
    neg: f64,
}

struct Terms {
    class: bool,
    dog: bool,
    interaction: bool,
}

fn design(
    cells: &BTreeMap<(usize, usize), Cell>,
    n_dogs: usize,
    class_map: &[usize],
    t: &Terms,
) -> DesignRows {
    let n_merged = class_map.iter().max().map_or(0, |m| m + 1);
    let combos: Vec<(usize, usize)> = {
        let mut v: Vec<(usize, usize)> = cells
            .keys()
            .map(|&(d, c)| (d, class_map[c]))
            .filter(|&(d, c)| d > 0 && c > 0)
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let mut names = vec!["intercept".to_string()];
    if t.class {
        names.extend((1..n_merged).map(|c| format!("class{c}")));
    }
    if t.dog {
        names.extend((1..n_dogs).map(|d| format!("dog{d}")));
    }
    if t.interaction {
        names.extend(combos.iter().map(|(d, c)| format!("dog{d}:class{c}")));
    }

    let mut merged: BTreeMap<(usize, usize), Cell> = BTreeMap::new();
    for (&(d, c), cell) in cells {
        let e = merged.entry((d, class_map[c])).or_default();
        e.pos += cell.pos;
        e.neg += cell.neg;
    }
    let (mut x, mut y, mut w) = (Vec::new(), Vec::new(), Vec::new());
    for (&(d, c), cell) in &merged {
        let mut row = vec![1.0];
        if t.class {
            row.extend((1..n_merged).map(|k| f64::from(u8::from(k == c))));
        }
        if t.dog {
            row.extend((1..n_dogs).map(|k| f64::from(u8::from(k == d))));
        }
        if t.interaction {
            row.extend(combos.iter().map(|&k| f64::from(u8::from(k == (d, c)))));
        }
        for (outcome, weight) in [(1.0, cell.pos), (0.0, cell.neg)] {
            if weight > 0.0 {
                x.push(row.clone());
                y.push(outcome);
                w.push(weight);
            }
        }
    }
    drop_aliased(DesignRows { names, x, y, w })
}

/// Removes columns lying in the span of earlier ones, so effects that the
/// observed cells cannot identify (a class seen by only some dogs) do not
/// make the information matrix singular. Likelihood-ratio degrees of
/// freedom then count estimable terms only.
fn drop_aliased(rows: DesignRows) -> DesignRows {
    let n_cols = rows.names.len();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut keep = Vec::with_capacity(n_cols);
    for j in 0..n_cols {
        let mut v: Vec<f64> = rows.x.iter().map(|r| r[j]).collect();
        let norm0 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(b).for_each(|(a, b)| *a -= dot * b);
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-9 * norm0.max(1.0) {
            v.iter_mut().for_each(|a| *a /= norm);
            basis.push(v);
            keep.push(j);
        }
    }
    if keep.len() == n_cols {
        return rows;
    }
    DesignRows {
        names: keep.iter().map(|&j| rows.names[j].clone()).collect(),
        x: rows
            .x
            .iter()
            .map(|r| keep.iter().map(|&j| r[j]).collect())
            .collect(),
        y: rows.y,
        w: rows.w,
    }
}

fn fit(rows: &DesignRows) -> Result<FirthFit> {
    fit_firth_logistic(&rows.x, &rows.y, Some(&rows.w), &FirthOptions::default())
}

/// Fits class, dog and interaction models over (fixation × in-view class)
/// rows and tests the class and interaction effects by likelihood ratio.
pub fn class_effect_models(
    records: &[AttributionRecord],
    corpora: &CorpusSet,
    mode: RowMode,
    with_contrasts: bool,
) -> Result<ClassEffectModels> {
    let tax = corpora.taxonomy();
    let mut dog_ix: BTreeMap<&str, usize> = BTreeMap::new();
    let mut raw: Vec<(&str, usize, f64)> = Vec::new();
    let mut class_seen = vec![false; tax.slots()];
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
        dog_ix.entry(dog).or_insert(0);
        for c in tax.class_ids().filter(|&c| frame.has_class(c)) {
            class_seen[c.index()] = true;
            raw.push((dog, c.index(), rec.distribution.get(c)));
        }
    }
    for (i, v) in dog_ix.values_mut().enumerate() {
        *v = i;
    }
    let class_slots: Vec<usize> = (1..tax.slots()).filter(|&s| class_seen[s]).collect();
    if class_slots.len() < 2 {
        return Err(Error::Validation(
            "need at least two classes in view to test a class effect".into(),
        ));
    }
    let class_pos: BTreeMap<usize, usize> = class_slots
        .iter()
        .enumerate()
        .map(|(i, &s)| (s, i))
        .collect();

    let mut cells: BTreeMap<(usize, usize), Cell> = BTreeMap::new();
    for &(dog, slot, p) in &raw {
        let cell = cells.entry((dog_ix[dog], class_pos[&slot])).or_default();
        match mode {
            RowMode::Unweighted => {
                if p > 0.0 {
                    cell.pos += 1.0;
                } else {
                    cell.neg += 1.0;
                }
            }
            RowMode::Weighted => {
                cell.pos += p;
                cell.neg += 1.0 - p;
            }
        }
    }

    let n_dogs = dog_ix.len();
    let n_classes = class_slots.len();
    let identity: Vec<usize> = (0..n_classes).collect();
    let with = |class, dog, interaction| Terms {
        class,
        dog,
        interaction,
    };
    let full_rows = design(&cells, n_dogs, &identity, &with(true, true, true));
    let main_rows = design(&cells, n_dogs, &identity, &with(true, true, false));
    let dog_rows = design(&cells, n_dogs, &identity, &with(false, true, false));
    let (full, (main_effects, dog_only)) = rayon::join(
        || fit(&full_rows),
        || rayon::join(|| fit(&main_rows), || fit(&dog_rows)),
    );
    let (full, main_effects, dog_only) = (full?, main_effects?, dog_only?);

    let names: Vec<String> = class_slots
        .iter()
        .map(|&s| tax.name(crate::scene::ClassId(s as u16)).to_string())
        .collect();
    let contrasts = if with_contrasts {
        let pairs: Vec<(usize, usize)> = (0..n_classes)
            .flat_map(|a| (a + 1..n_classes).map(move |b| (a, b)))
            .collect();
        pairs
            .par_iter()
            .map(|&(a, b)| {
                // merge b into a, then relabel densely
                let mut map: Vec<usize> =
                    (0..n_classes).map(|c| if c == b { a } else { c }).collect();
                for m in map.iter_mut() {
                    if *m > b {
                        *m -= 1;
                    }
                }
                let reduced = fit(&design(&cells, n_dogs, &map, &with(true, true, false)))?;
                Ok(PairwiseContrast {
                    a: names[a].clone(),
                    b: names[b].clone(),
                    lr: lr_test(&main_effects, &reduced)?,
                })
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };

    Ok(ClassEffectModels {
        mode,
        observations: raw.len(),
        classes: names,
        dogs: dog_ix.keys().map(|d| d.to_string()).collect(),
        interaction_terms: full.dof() - main_effects.dof(),
        class_effect: lr_test(&main_effects, &dog_only)?,
        interaction_effect: lr_test(&full, &main_effects)?,
        full,
        main_effects,
        dog_only,
        contrasts,
        contrast_correction: "uncorrected",
    })
}
