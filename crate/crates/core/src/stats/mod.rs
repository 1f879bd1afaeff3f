//! Behavioural statistics over attributed fixations.

mod anova;
mod correlation;
mod firth;
mod largest;
mod model;
mod table;

pub use anova::{two_way_anova, AnovaResult};
pub use correlation::{mid_ranks, pearson, spearman, SpearmanResult};
pub use firth::{fit_firth_logistic, lr_test, FirthFit, FirthOptions, LrTest};
pub use largest::{largest_object_stats, LargestObjectStats};
pub use model::{class_effect_models, ClassEffectModels, DesignRows, PairwiseContrast, RowMode};
pub use table::{behavior_table, BehaviorCell, BehaviorTable, ClassSummary, Moments};

use serde::Serialize;

/// Running sample used for mean and standard deviation columns.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub(crate) struct Sample(pub Vec<f64>);

impl Sample {
    pub fn push(&mut self, v: f64) {
        self.0.push(v);
    }

    pub fn extend(&mut self, other: &Sample) {
        self.0.extend_from_slice(&other.0);
    }

    pub fn moments(&self) -> Option<Moments> {
        Moments::of(&self.0)
    }
}
