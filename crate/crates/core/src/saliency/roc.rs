use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::SaliencyMap;
use crate::attribution::FixationRegion;
use crate::error::{Error, Result};

pub const DEFAULT_JITTER: f64 = 1e-7;

/// Mean map value over the region's pixels.
pub fn fixation_score(map: &SaliencyMap, region: &FixationRegion) -> Result<f64> {
    if map.dims() != region.disk.dims() {
        return Err(Error::DimensionMismatch {
            expected: map.dims(),
            found: region.disk.dims(),
        });
    }
    let vals = map.values();
    let mut sum = 0.0;
    let mut n = 0u64;
    for (s, e) in region.disk.intervals() {
        sum += vals[s as usize..e as usize].iter().sum::<f64>();
        n += e - s;
    }
    if n == 0 {
        return Err(Error::param("region", "fixation region covers no pixels"));
    }
    Ok(sum / n as f64)
}

/// How negatives from several maps are combined.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FprMode {
    /// Each fixation is compared against its own map; rates are averaged
    /// over fixations.
    #[default]
    PerFrame,
    /// All pixels of all maps form one negative set.
    Pooled,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AucOptions {
    pub mode: FprMode,
    pub jitter: f64,
    pub seed: u64,
}

impl Default for AucOptions {
    fn default() -> Self {
        AucOptions {
            mode: FprMode::PerFrame,
            jitter: DEFAULT_JITTER,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RocCurve {
    /// One point per fixation threshold, thresholds descending.
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

impl RocCurve {
    /// Curve vertices including both end points, for plotting or checks.
    pub fn vertices(&self) -> Vec<(f64, f64)> {
        let mut v = vec![(0.0, 0.0)];
        v.extend(self.points.iter().map(|p| (p.fpr, p.tpr)));
        v.push((1.0, 1.0));
        v
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("threshold,fpr,tpr\n");
        for p in &self.points {
            s.push_str(&format!("{},{},{}\n", p.threshold, p.fpr, p.tpr));
        }
        s
    }
}

/// AUC-Judd: positives are fixation scores, negatives map pixels; every
/// value gets seeded uniform jitter to break ties. Thresholds sweep the
/// jittered fixation scores, and the area is integrated over the empirical
/// ROC staircase, which makes it equal to the normalized Mann-Whitney U.
///
/// `scores[i]` was taken on `maps[map_of[i]]`.
pub fn auc_judd(
    scores: &[f64],
    map_of: &[usize],
    maps: &[&SaliencyMap],
    opts: &AucOptions,
) -> Result<RocCurve> {
    if scores.is_empty() {
        return Err(Error::param("scores", "need at least one fixation score"));
    }
    if map_of.len() != scores.len() {
        return Err(Error::param("map_of", "need one map index per score"));
    }
    if let Some(&bad) = map_of.iter().find(|&&m| m >= maps.len()) {
        return Err(Error::param(
            "map_of",
            format!("map index {bad} out of range"),
        ));
    }
    if !(opts.jitter >= 0.0) {
        return Err(Error::param("jitter", "must be non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut jitter = |v: f64| {
        if opts.jitter > 0.0 {
            v + rng.random::<f64>() * opts.jitter
        } else {
            v
        }
    };
    let mut fix: Vec<f64> = scores.iter().map(|&s| jitter(s)).collect();
    let sorted_maps: Vec<Vec<f64>> = maps
        .iter()
        .map(|m| {
            let mut v: Vec<f64> = m.values().iter().map(|&x| jitter(x)).collect();
            v.sort_by(f64::total_cmp);
            v
        })
        .collect();

    let n = scores.len() as f64;
    let weights: Vec<f64> = match opts.mode {
        FprMode::PerFrame => {
            let mut w = vec![0.0; maps.len()];
            for &m in map_of {
                w[m] += 1.0 / n;
            }
            w.iter()
                .zip(&sorted_maps)
                .map(|(w, v)| w / v.len() as f64)
                .collect()
        }
        FprMode::Pooled => {
            let total: usize = sorted_maps.iter().map(Vec::len).sum();
            vec![1.0 / total as f64; maps.len()]
        }
    };
    // weighted share of negatives at or above t
    let fpr_at = |t: f64| -> f64 {
        sorted_maps
            .iter()
            .zip(&weights)
            .filter(|(_, &w)| w > 0.0)
            .map(|(v, &w)| (v.len() - v.partition_point(|&x| x < t)) as f64 * w)
            .sum::<f64>()
            .min(1.0)
    };

    fix.sort_by(|a, b| b.total_cmp(a));
    let mut points = Vec::with_capacity(fix.len());
    let mut auc = 0.0;
    let mut prev_fpr = 0.0;
    for (i, &t) in fix.iter().enumerate() {
        let fpr = fpr_at(t);
        // horizontal run at the previous true-positive rate
        auc += (fpr - prev_fpr) * i as f64 / n;
        prev_fpr = fpr;
        points.push(RocPoint {
            threshold: t,
            fpr,
            tpr: (i + 1) as f64 / n,
        });
    }
    auc += 1.0 - prev_fpr;
    Ok(RocCurve { points, auc })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(values: Vec<f64>) -> SaliencyMap {
        let n = values.len() as u32;
        SaliencyMap::from_values(n, 1, values).unwrap()
    }

    #[test]
    fn perfect_predictor() {
        let m = map((0..100).map(|i| i as f64 / 200.0).collect());
        let roc = auc_judd(&[0.9, 0.95, 1.0], &[0, 0, 0], &[&m], &AucOptions::default()).unwrap();
        assert!(roc.auc > 0.999);
        let v = roc.vertices();
        assert!(v.windows(2).all(|w| w[1].0 >= w[0].0 && w[1].1 >= w[0].1));
    }

    #[test]
    fn worst_predictor() {
        let m = map((0..100).map(|i| 0.5 + i as f64 / 200.0).collect());
        let roc = auc_judd(&[0.0, 0.1], &[0, 0], &[&m], &AucOptions::default()).unwrap();
        assert!(roc.auc < 1e-3);
    }

    #[test]
    fn score_of_constant_map() {
        let m = SaliencyMap::from_values(10, 10, vec![0.25; 100]).unwrap();
        let r = FixationRegion::new((5.0, 5.0), 3, 10, 10);
        assert!((fixation_score(&m, &r).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn rejects_empty_and_bad_index() {
        let m = map(vec![0.0, 1.0]);
        assert!(auc_judd(&[], &[], &[&m], &AucOptions::default()).is_err());
        assert!(auc_judd(&[0.5], &[1], &[&m], &AucOptions::default()).is_err());
    }
}
