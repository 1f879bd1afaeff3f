//! One document chaining attribution, behaviour statistics and saliency.
//!
//! All inputs are processed in a fixed order and every random draw is
//! seeded, so identical inputs give byte-identical text and JSON.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use indexmap::IndexMap;
use serde::Serialize;

use crate::attribution::{
    batch_attribute, prediction_fit, AttributionRecord, BatchSummary, PredictionFit,
};
use crate::config::PipelineConfig;
use crate::corpus::CorpusSet;
use crate::error::Result;
use crate::gaze::{DogProfile, Fixation};
use crate::saliency::{evaluate_saliency, MapSource, SaliencyEvaluation};
use crate::special::chi_square_critical;
use crate::stats::{
    behavior_table, class_effect_models, largest_object_stats, spearman, two_way_anova,
    AnovaResult, BehaviorTable, ClassEffectModels, LargestObjectStats, RowMode, SpearmanResult,
};
use crate::synth::Manifest;

pub const ATTENTION_L1_TOLERANCE: f64 = 0.02;
pub const NULL_RATE_TOLERANCE: f64 = 0.003;
pub const TIME_IN_VIEW_TOLERANCE: f64 = 0.02;
pub const OBJECTS_RELATIVE_TOLERANCE: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AttributionBlock {
    pub summary: BatchSummary,
    pub null_rate: f64,
    /// Mean class distribution over retained fixations.
    pub aggregate: IndexMap<String, f64>,
    pub chi_dof: u32,
    pub chi_alpha: f64,
    pub chi_critical: f64,
    pub prediction_fit: Option<PredictionFit>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SaliencySummary {
    pub source: String,
    pub fixations: usize,
    pub maps: usize,
    pub missing: usize,
    pub degenerate_maps: usize,
    pub auc_per_frame: f64,
    pub auc_pooled: f64,
}

impl From<&SaliencyEvaluation> for SaliencySummary {
    fn from(e: &SaliencyEvaluation) -> Self {
        SaliencySummary {
            source: e.source.clone(),
            fixations: e.fixations,
            maps: e.maps,
            missing: e.missing,
            degenerate_maps: e.degenerate_maps,
            auc_per_frame: e.auc_per_frame,
            auc_pooled: e.auc_pooled,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub target: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: impl Into<String>, value: f64, target: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            value,
            target,
            tolerance,
            pass: (value - target).abs() <= tolerance,
        }
    }
}

/// Behaviour statistics over attribution records.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StatsReport {
    pub behavior: BehaviorTable,
    pub anova: Option<AnovaResult>,
    pub class_effect: Option<ClassEffectModels>,
    /// Class size against time fixated in view, over classes.
    pub size_vs_fixated: Option<SpearmanResult>,
    /// Class size against region occupancy, over classes.
    pub size_vs_occupancy: Option<SpearmanResult>,
    pub largest_object: LargestObjectStats,
    /// Analyses skipped for lack of data.
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub fixations: usize,
    pub attribution: AttributionBlock,
    pub stats: StatsReport,
    pub saliency: Vec<SaliencySummary>,
    /// Comparison against a synthetic corpus's planted values.
    pub planted: Vec<Check>,
    pub notes: Vec<String>,
}

pub struct ReportInputs<'a> {
    pub config: &'a PipelineConfig,
    pub corpora: &'a CorpusSet,
    pub fixations: &'a [Fixation],
    pub profiles: &'a BTreeMap<String, DogProfile>,
    pub predicted: Option<&'a CorpusSet>,
    pub saliency: Vec<MapSource<'a>>,
    pub manifest: Option<&'a Manifest>,
}

fn aggregate(records: &[&AttributionRecord], corpora: &CorpusSet) -> IndexMap<String, f64> {
    let tax = corpora.taxonomy();
    tax.class_ids()
        .map(|c| {
            let mean = if records.is_empty() {
                0.0
            } else {
                records.iter().map(|r| r.distribution.get(c)).sum::<f64>() / records.len() as f64
            };
            (tax.name(c).to_string(), mean)
        })
        .collect()
}

fn class_spearman(
    table: &BehaviorTable,
    pick: impl Fn(usize) -> Option<f64>,
) -> Result<SpearmanResult> {
    let (x, y): (Vec<f64>, Vec<f64>) = table
        .summary
        .iter()
        .enumerate()
        .filter_map(|(k, s)| Some((s.size_in_view?.mean, pick(k)?)))
        .unzip();
    spearman(&x, &y)
}

fn planted_checks(
    manifest: &Manifest,
    attribution: &AttributionBlock,
    table: &BehaviorTable,
) -> Vec<Check> {
    let mut checks = Vec::new();
    let l1: f64 = manifest
        .attention_realized
        .iter()
        .map(|(name, &want)| (attribution.aggregate.get(name).copied().unwrap_or(0.0) - want).abs())
        .sum();
    checks.push(Check::new("attention L1", l1, 0.0, ATTENTION_L1_TOLERANCE));
    checks.push(Check::new(
        "null rate",
        attribution.null_rate,
        manifest.null_rate,
        NULL_RATE_TOLERANCE,
    ));
    let total: usize = table.fixations.iter().sum();
    for (k, name) in table.classes.iter().enumerate() {
        let in_view: usize = table.cells.iter().map(|row| row[k].frames_in_view).sum();
        let value = if total == 0 {
            0.0
        } else {
            in_view as f64 / total as f64
        };
        let target = manifest.time_in_view.get(name).copied().unwrap_or(0.0);
        checks.push(Check::new(
            format!("time in view: {name}"),
            value,
            target,
            TIME_IN_VIEW_TOLERANCE,
        ));
    }
    if let Some(m) = table.classes_in_view {
        let target = manifest.objects_per_frame.mean;
        checks.push(Check::new(
            "objects per frame",
            m.mean,
            target,
            OBJECTS_RELATIVE_TOLERANCE * target,
        ));
    }
    checks
}

/// Table, ANOVA, class-effect models, Spearman correlations and the
/// largest-object rule. Analyses without enough data are skipped with a note.
pub fn stats_report(
    records: &[AttributionRecord],
    corpora: &CorpusSet,
    row_mode: RowMode,
    contrasts: bool,
) -> Result<StatsReport> {
    let mut notes = Vec::new();
    let behavior = behavior_table(records, corpora)?;
    let anova = match two_way_anova(&behavior.time_in_view_grid()) {
        Ok(a) => Some(a),
        Err(e) => {
            notes.push(format!("anova skipped: {e}"));
            None
        }
    };
    let class_effect = match class_effect_models(records, corpora, row_mode, contrasts) {
        Ok(m) => Some(m),
        Err(e) => {
            notes.push(format!("class-effect models skipped: {e}"));
            None
        }
    };
    let mut spearman_or_note = |label: &str, r: Result<SpearmanResult>| match r {
        Ok(s) => Some(s),
        Err(e) => {
            notes.push(format!("{label} skipped: {e}"));
            None
        }
    };
    let size_vs_fixated = spearman_or_note(
        "size vs time fixated",
        class_spearman(&behavior, |k| {
            behavior.summary[k].time_fixated_in_view.map(|m| m.mean)
        }),
    );
    let size_vs_occupancy = spearman_or_note(
        "size vs occupancy",
        class_spearman(&behavior, |k| {
            behavior.summary[k].region_occupancy.map(|m| m.mean)
        }),
    );
    let largest_object = largest_object_stats(records, corpora)?;
    Ok(StatsReport {
        behavior,
        anova,
        class_effect,
        size_vs_fixated,
        size_vs_occupancy,
        largest_object,
        notes,
    })
}

/// Runs attribution, behaviour statistics and saliency scoring.
pub fn build_report(inputs: &ReportInputs<'_>) -> Result<Report> {
    let cfg = inputs.config;
    let mut notes = Vec::new();
    let batch = batch_attribute(
        inputs.fixations,
        inputs.corpora,
        inputs.profiles,
        &cfg.batch_options(),
    )?;
    for (i, e) in &batch.errors {
        notes.push(format!("fixation {i}: {e}"));
    }
    let retained: Vec<&AttributionRecord> = batch.retained().collect();
    let prediction = match inputs.predicted {
        Some(pred) => Some(prediction_fit(
            &batch.records,
            pred,
            cfg.attribution_options(),
            cfg.fit_options(),
        )?),
        None => None,
    };
    let attributed =
        batch.summary.total - batch.summary.missing_frames - batch.summary.sniffing_removed;
    let attribution = AttributionBlock {
        summary: batch.summary,
        null_rate: if attributed == 0 {
            0.0
        } else {
            batch.summary.null as f64 / attributed as f64
        },
        aggregate: aggregate(&retained, inputs.corpora),
        chi_dof: cfg.attribution.dof,
        chi_alpha: cfg.attribution.alpha,
        chi_critical: chi_square_critical(cfg.attribution.dof, cfg.attribution.alpha)?,
        prediction_fit: prediction,
    };

    let records = &batch.records;
    let stats = stats_report(
        records,
        inputs.corpora,
        cfg.stats.row_mode,
        cfg.stats.contrasts,
    )?;

    let mut saliency = Vec::new();
    for source in &inputs.saliency {
        let eval = evaluate_saliency(records, inputs.corpora, source, &cfg.auc_options())?;
        saliency.push(SaliencySummary::from(&eval));
    }
    let planted = inputs
        .manifest
        .map(|m| planted_checks(m, &attribution, &stats.behavior))
        .unwrap_or_default();

    Ok(Report {
        fixations: inputs.fixations.len(),
        attribution,
        stats,
        saliency,
        planted,
        notes,
    })
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.digits$}"))
}

impl StatsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("stats serialize") + "\n"
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "== Behaviour ==");
        s.push_str(&self.behavior.to_table());
        if let Some(m) = self.behavior.classes_in_view {
            let _ = writeln!(s, "classes in view per frame {:.2} ± {:.2}", m.mean, m.sd);
        }
        if let Some(r) = &self.anova {
            let _ = writeln!(
                s,
                "ANOVA time in view: class F({}, {}) = {:.3}, p = {:.3e}, eta2 = {:.3}; dog F({}, {}) = {:.3}, p = {:.3e}, eta2 = {:.3}",
                r.dof_class, r.dof_error, r.f_class, r.p_class, r.eta2_class, r.dof_dog, r.dof_error, r.f_dog, r.p_dog, r.eta2_dog
            );
        }
        if let Some(m) = &self.class_effect {
            let _ = writeln!(
                s,
                "Firth logistic ({:?} rows, {} observations): class chi2({}) = {:.3}, p = {:.3e}; dog x class chi2({}) = {:.3}, p = {:.3e}",
                m.mode,
                m.observations,
                m.class_effect.dof,
                m.class_effect.chi2,
                m.class_effect.p,
                m.interaction_effect.dof,
                m.interaction_effect.chi2,
                m.interaction_effect.p
            );
            if !m.contrasts.is_empty() {
                let _ = writeln!(s, "pairwise contrasts ({}):", m.contrast_correction);
                for c in &m.contrasts {
                    let _ = writeln!(
                        s,
                        "  {} vs {}: chi2({}) = {:.3}, p = {:.3e}",
                        c.a, c.b, c.lr.dof, c.lr.chi2, c.lr.p
                    );
                }
            }
        }
        for (label, r) in [
            ("size vs time fixated", &self.size_vs_fixated),
            ("size vs occupancy", &self.size_vs_occupancy),
        ] {
            if let Some(r) = r {
                let _ = writeln!(
                    s,
                    "Spearman {label}: rho = {:.3}, p = {:.3e}, n = {}",
                    r.rho, r.p, r.n
                );
            }
        }
        let l = &self.largest_object;
        let _ = writeln!(
            s,
            "largest object in region: {}/{} ({}), size when included {}",
            l.included,
            l.fixations,
            opt(l.fraction, 4),
            l.size_when_included.map_or_else(
                || "-".to_string(),
                |m| format!("{:.1} ± {:.1}%", 100.0 * m.mean, 100.0 * m.sd)
            )
        );

        for n in &self.notes {
            let _ = writeln!(s, "note: {n}");
        }
        s
    }
}

impl Report {
    pub fn all_checks_pass(&self) -> bool {
        self.planted.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let a = &self.attribution;
        let _ = writeln!(s, "== Attribution ==");
        let _ = writeln!(
            s,
            "fixations {}  missing frames {}  sniffing removed {}  null {}  retained {}",
            a.summary.total,
            a.summary.missing_frames,
            a.summary.sniffing_removed,
            a.summary.null,
            a.summary.retained
        );
        let _ = writeln!(s, "null rate {:.4}", a.null_rate);
        let _ = writeln!(
            s,
            "chi-square critical (dof {}, alpha {}) = {:.3}",
            a.chi_dof, a.chi_alpha, a.chi_critical
        );
        let _ = writeln!(s, "{:<18} {:>10}", "Class", "Mean P");
        for (name, p) in &a.aggregate {
            let _ = writeln!(s, "{name:<18} {p:>10.4}");
        }
        if let Some(fit) = &a.prediction_fit {
            let _ = writeln!(
                s,
                "predicted vs ground truth: compared {}  predicted null {}  accepted {} ({:.3})  median {}  p90 {}",
                fit.compared,
                fit.predicted_null,
                fit.accepted,
                fit.accept_rate,
                opt(fit.median_distance, 4),
                opt(fit.p90_distance, 4)
            );
        }

        s.push('\n');
        s.push_str(&self.stats.to_text());
        if !self.saliency.is_empty() {
            let _ = writeln!(s, "\n== Saliency ==");
            for e in &self.saliency {
                let _ = writeln!(
                    s,
                    "{}: fixations {}  maps {}  missing {}  degenerate {}  AUC-Judd per-frame {:.4}  pooled {:.4}",
                    e.source, e.fixations, e.maps, e.missing, e.degenerate_maps, e.auc_per_frame, e.auc_pooled
                );
            }
        }
        if !self.planted.is_empty() {
            let _ = writeln!(s, "\n== Planted checks ==");
            for c in &self.planted {
                let _ = writeln!(
                    s,
                    "{} {:<32} value {:.4}  target {:.4}  tolerance {:.4}",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.name,
                    c.value,
                    c.target,
                    c.tolerance
                );
            }
        }
        if !self.notes.is_empty() {
            let _ = writeln!(s, "\n== Notes ==");
            for n in &self.notes {
                let _ = writeln!(s, "{n}");
            }
        }
        s
    }
}
