use serde::Serialize;

use crate::error::{Error, Result};
use crate::special::f_sf;

/// Two-way ANOVA without replication or interaction.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnovaResult {
    pub ss_class: f64,
    pub ss_dog: f64,
    pub ss_error: f64,
    pub ss_total: f64,
    pub dof_class: usize,
    pub dof_dog: usize,
    pub dof_error: usize,
    pub f_class: f64,
    pub f_dog: f64,
    pub p_class: f64,
    pub p_dog: f64,
    pub eta2_class: f64,
    pub eta2_dog: f64,
}

fn f_stat(ss: f64, dof: usize, ms_error: f64) -> f64 {
    if ss == 0.0 {
        0.0
    } else if ms_error == 0.0 {
        f64::INFINITY
    } else {
        ss / dof as f64 / ms_error
    }
}

fn partial_eta2(ss: f64, ss_error: f64) -> f64 {
    if ss + ss_error == 0.0 {
        0.0
    } else {
        ss / (ss + ss_error)
    }
}

/// `grid[dog][class]`, one observation per cell. The error sum of squares
/// comes from the residuals directly, so the decomposition is a check
/// rather than a definition.
pub fn two_way_anova(grid: &[Vec<f64>]) -> Result<AnovaResult> {
    let d = grid.len();
    let k = grid.first().map_or(0, Vec::len);
    if d < 2 || k < 2 {
        return Err(Error::param(
            "grid",
            format!("need at least 2x2 cells, got {d}x{k}"),
        ));
    }
    if grid.iter().any(|r| r.len() != k) {
        return Err(Error::Validation("ANOVA grid has missing cells".into()));
    }
    if grid.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Validation("ANOVA grid has non-finite cells".into()));
    }
    let n = (d * k) as f64;
    let grand = grid.iter().flatten().sum::<f64>() / n;
    let dog_mean: Vec<f64> = grid
        .iter()
        .map(|r| r.iter().sum::<f64>() / k as f64)
        .collect();
    let class_mean: Vec<f64> = (0..k)
        .map(|j| grid.iter().map(|r| r[j]).sum::<f64>() / d as f64)
        .collect();

    let ss_total: f64 = grid.iter().flatten().map(|v| (v - grand).powi(2)).sum();
    let ss_dog = k as f64 * dog_mean.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ss_class = d as f64 * class_mean.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let mut ss_error = 0.0;
    for (i, row) in grid.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            ss_error += (v - dog_mean[i] - class_mean[j] + grand).powi(2);
        }
    }

    let dof_class = k - 1;
    let dof_dog = d - 1;
    let dof_error = dof_class * dof_dog;
    let ms_error = ss_error / dof_error as f64;
    let f_class = f_stat(ss_class, dof_class, ms_error);
    let f_dog = f_stat(ss_dog, dof_dog, ms_error);
    Ok(AnovaResult {
        ss_class,
        ss_dog,
        ss_error,
        ss_total,
        dof_class,
        dof_dog,
        dof_error,
        f_class,
        f_dog,
        p_class: f_sf(f_class, dof_class as f64, dof_error as f64),
        p_dog: f_sf(f_dog, dof_dog as f64, dof_error as f64),
        eta2_class: partial_eta2(ss_class, ss_error),
        eta2_dog: partial_eta2(ss_dog, ss_error),
    })
}
