//! Segmentation quality: max-IoU pairing, confusion matrix, per-class IoU,
//! count accuracy, coverage and the confidence-gated loss weight.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::SegmentationCorpus;
use crate::error::{Error, Result};
use crate::scene::{frame_coverage, ClassId, ClassTaxonomy, FrameSegmentation, InstanceMask};

/// Pairs with at least this IoU (and matching class) get a modulated loss.
pub const DEFAULT_IOU_THRESHOLD: f64 = 0.75;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MaskPair {
    pub instance_id: u32,
    pub class_id: ClassId,
    /// Best partner on the other side, `None` when nothing overlaps.
    pub partner: Option<(u32, ClassId)>,
    pub iou: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct MaskPairing {
    pub gt_to_pred: Vec<MaskPair>,
    pub pred_to_gt: Vec<MaskPair>,
}

fn iou_of(a: &InstanceMask, b: &InstanceMask) -> Result<f64> {
    match (a.bbox, b.bbox) {
        (Some(x), Some(y)) if x.overlaps(&y) => {
            let inter = a.mask.intersect_count(&b.mask)?;
            let union = a.area() + b.area() - inter;
            Ok(if union == 0 {
                0.0
            } else {
                inter as f64 / union as f64
            })
        }
        _ => Ok(0.0),
    }
}

fn best_partners(
    from: &[InstanceMask],
    to: &[InstanceMask],
    iou: &[Vec<f64>],
    transpose: bool,
) -> Vec<MaskPair> {
    let mut order: Vec<usize> = (0..to.len()).collect();
    order.sort_by_key(|&j| to[j].instance_id);
    from.iter()
        .enumerate()
        .map(|(i, m)| {
            let mut best: Option<(usize, f64)> = None;
            for &j in &order {
                let v = if transpose { iou[j][i] } else { iou[i][j] };
                if v > 0.0 && best.is_none_or(|(_, b)| v > b) {
                    best = Some((j, v));
                }
            }
            MaskPair {
                instance_id: m.instance_id,
                class_id: m.class_id,
                partner: best.map(|(j, _)| (to[j].instance_id, to[j].class_id)),
                iou: best.map_or(0.0, |(_, v)| v),
            }
        })
        .collect()
}

/// Pairs every mask with its highest-IoU counterpart in both directions.
/// Ties go to the lower instance id; masks overlapping nothing stay unpaired.
pub fn pair_masks(gt: &FrameSegmentation, pred: &FrameSegmentation) -> Result<MaskPairing> {
    if gt.dims() != pred.dims() {
        return Err(Error::DimensionMismatch {
            expected: gt.dims(),
            found: pred.dims(),
        });
    }
    let iou = gt
        .masks
        .iter()
        .map(|g| {
            pred.masks
                .iter()
                .map(|p| iou_of(g, p))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MaskPairing {
        gt_to_pred: best_partners(&gt.masks, &pred.masks, &iou, false),
        pred_to_gt: best_partners(&pred.masks, &gt.masks, &iou, true),
    })
}

/// Rows are ground-truth classes, columns predicted classes; index 0 is
/// background on both axes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    slots: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(slots: usize) -> Self {
        ConfusionMatrix {
            slots,
            counts: vec![0; slots * slots],
        }
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let slots = rows.len();
        if rows.iter().any(|r| r.len() != slots) {
            return Err(Error::param("rows", "confusion matrix must be square"));
        }
        Ok(ConfusionMatrix {
            slots,
            counts: rows.concat(),
        })
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn get(&self, gt: ClassId, pred: ClassId) -> u64 {
        self.counts[gt.index() * self.slots + pred.index()]
    }

    pub fn add(&mut self, gt: ClassId, pred: ClassId, n: u64) {
        self.counts[gt.index() * self.slots + pred.index()] += n;
    }

    pub fn row_sum(&self, gt: ClassId) -> u64 {
        let r = gt.index() * self.slots;
        self.counts[r..r + self.slots].iter().sum()
    }

    pub fn col_sum(&self, pred: ClassId) -> u64 {
        (0..self.slots)
            .map(|r| self.counts[r * self.slots + pred.index()])
            .sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.slots)
            .map(|i| self.counts[i * self.slots + i])
            .sum()
    }

    /// Share of counts off the diagonal; zero for an empty matrix.
    pub fn off_diagonal_fraction(&self) -> f64 {
        let t = self.total();
        if t == 0 {
            0.0
        } else {
            (t - self.trace()) as f64 / t as f64
        }
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts
            .chunks(self.slots)
            .map(<[u64]>::to_vec)
            .collect()
    }

    fn merge(mut self, other: &ConfusionMatrix) -> Self {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self
    }
}

/// Every ground-truth mask lands in its row (background column when
/// unpaired); unpaired predictions land in the background row.
pub fn confusion_from_pairing(pairing: &MaskPairing, slots: usize) -> ConfusionMatrix {
    let mut m = ConfusionMatrix::new(slots);
    for p in &pairing.gt_to_pred {
        let pred = p.partner.map_or(ClassId::BACKGROUND, |(_, c)| c);
        m.add(p.class_id, pred, 1);
    }
    for p in pairing.pred_to_gt.iter().filter(|p| p.partner.is_none()) {
        m.add(ClassId::BACKGROUND, p.class_id, 1);
    }
    m
}

/// Best IoU over same-class (gt, pred) pairs; zero if either side lacks the class.
pub fn per_class_iou(
    gt: &FrameSegmentation,
    pred: &FrameSegmentation,
    class: ClassId,
) -> Result<f64> {
    let mut best: f64 = 0.0;
    for g in gt.masks_of(class) {
        for p in pred.masks_of(class) {
            best = best.max(iou_of(g, p)?);
        }
    }
    Ok(best)
}

/// `min/max` of the two instance counts; `None` when both are zero.
pub fn count_agreement(gt_count: usize, pred_count: usize) -> Option<f64> {
    let hi = gt_count.max(pred_count);
    (hi > 0).then(|| gt_count.min(pred_count) as f64 / hi as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Rates {
    /// Indexed by class id, background at 0.
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub accuracy: f64,
}

pub fn rates_from_confusion(m: &ConfusionMatrix) -> Rates {
    let ratio = |num: u64, den: u64| {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let ids = (0..m.slots()).map(|i| ClassId(i as u16));
    let (precision, recall) = ids
        .map(|c| {
            let d = m.get(c, c);
            (ratio(d, m.col_sum(c)), ratio(d, m.row_sum(c)))
        })
        .unzip();
    Rates {
        precision,
        recall,
        accuracy: ratio(m.trace(), m.total()),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverageStats {
    pub mean_gt: f64,
    pub mean_pred: f64,
    /// Per class id: mean over frames of `(pred area - gt area) / frame area`.
    pub class_gap: Vec<f64>,
}

fn aligned<'a>(
    gt: &'a [FrameSegmentation],
    pred: &'a [FrameSegmentation],
) -> Result<Vec<(&'a FrameSegmentation, &'a FrameSegmentation)>> {
    if gt.len() != pred.len() {
        return Err(Error::Validation(format!(
            "corpora are not aligned: {} ground-truth frames vs {} predicted",
            gt.len(),
            pred.len()
        )));
    }
    gt.iter()
        .zip(pred)
        .map(|(g, p)| {
            if g.frame_index != p.frame_index {
                Err(Error::Validation(format!(
                    "corpora are not aligned: frame {} vs {}",
                    g.frame_index, p.frame_index
                )))
            } else if g.dims() != p.dims() {
                Err(Error::DimensionMismatch {
                    expected: g.dims(),
                    found: p.dims(),
                })
            } else {
                Ok((g, p))
            }
        })
        .collect()
}

pub fn coverage_gap(
    gt: &[FrameSegmentation],
    pred: &[FrameSegmentation],
    slots: usize,
) -> Result<CoverageStats> {
    let pairs = aligned(gt, pred)?;
    let n = pairs.len().max(1) as f64;
    let per_frame: Vec<(f64, f64, Vec<f64>)> = pairs
        .par_iter()
        .map(|(g, p)| {
            let area = g.frame_area() as f64;
            let gap = (0..slots)
                .map(|i| {
                    let c = ClassId(i as u16);
                    if c.is_background() {
                        0.0
                    } else {
                        (p.class_area(c) as f64 - g.class_area(c) as f64) / area
                    }
                })
                .collect();
            (frame_coverage(g), frame_coverage(p), gap)
        })
        .collect();
    let mut class_gap = vec![0.0; slots];
    let (mut mean_gt, mut mean_pred) = (0.0, 0.0);
    for (g, p, gap) in &per_frame {
        mean_gt += g;
        mean_pred += p;
        for (acc, v) in class_gap.iter_mut().zip(gap) {
            *acc += v;
        }
    }
    class_gap.iter_mut().for_each(|v| *v /= n);
    Ok(CoverageStats {
        mean_gt: mean_gt / n,
        mean_pred: mean_pred / n,
        class_gap,
    })
}

/// Loss coefficient `1 - C` for class-matched pairs at or above the IoU
/// gate, `1` otherwise.
pub fn loss_weight(
    confidence: f64,
    pair_iou: f64,
    class_match: bool,
    iou_threshold: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&confidence) {
        return Err(Error::param(
            "confidence",
            format!("must lie in [0, 1], got {confidence}"),
        ));
    }
    Ok(if class_match && pair_iou >= iou_threshold {
        1.0 - confidence
    } else {
        1.0
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub class: String,
    /// Mean best-pair IoU over frames where either side shows the class.
    pub iou: Option<f64>,
    pub count_accuracy: Option<f64>,
    pub precision: f64,
    pub recall: f64,
    pub gt_instances: u64,
    pub pred_instances: u64,
    pub coverage_gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsReport {
    pub frames: usize,
    pub iou_threshold: f64,
    pub classes: Vec<ClassMetrics>,
    pub median_iou: Option<f64>,
    pub median_count_accuracy: Option<f64>,
    pub median_precision: Option<f64>,
    pub median_recall: Option<f64>,
    pub accuracy: f64,
    pub off_diagonal_fraction: f64,
    pub coverage: CoverageStats,
    /// Pairs passing the loss gate, and their mean coefficient.
    pub gated_pairs: u64,
    pub mean_gated_weight: Option<f64>,
    pub confusion: ConfusionMatrix,
    pub count_rule: &'static str,
}

#[derive(Clone)]
struct FrameTally {
    confusion: ConfusionMatrix,
    iou_sum: Vec<f64>,
    iou_n: Vec<u64>,
    count_sum: Vec<f64>,
    count_n: Vec<u64>,
    gt_instances: Vec<u64>,
    pred_instances: Vec<u64>,
    gated: u64,
    gated_weight: f64,
}

impl FrameTally {
    fn new(slots: usize) -> Self {
        FrameTally {
            confusion: ConfusionMatrix::new(slots),
            iou_sum: vec![0.0; slots],
            iou_n: vec![0; slots],
            count_sum: vec![0.0; slots],
            count_n: vec![0; slots],
            gt_instances: vec![0; slots],
            pred_instances: vec![0; slots],
            gated: 0,
            gated_weight: 0.0,
        }
    }

    fn merge(self, o: FrameTally) -> Self {
        fn add<T: Copy + std::ops::Add<Output = T>>(mut a: Vec<T>, b: &[T]) -> Vec<T> {
            for (x, &y) in a.iter_mut().zip(b) {
                *x = *x + y;
            }
            a
        }
        FrameTally {
            confusion: self.confusion.merge(&o.confusion),
            iou_sum: add(self.iou_sum, &o.iou_sum),
            iou_n: add(self.iou_n, &o.iou_n),
            count_sum: add(self.count_sum, &o.count_sum),
            count_n: add(self.count_n, &o.count_n),
            gt_instances: add(self.gt_instances, &o.gt_instances),
            pred_instances: add(self.pred_instances, &o.pred_instances),
            gated: self.gated + o.gated,
            gated_weight: self.gated_weight + o.gated_weight,
        }
    }
}

fn tally_frame(
    gt: &FrameSegmentation,
    pred: &FrameSegmentation,
    slots: usize,
    iou_threshold: f64,
) -> Result<FrameTally> {
    let mut t = FrameTally::new(slots);
    let pairing = pair_masks(gt, pred)?;
    t.confusion = confusion_from_pairing(&pairing, slots);
    for i in 1..slots {
        let c = ClassId(i as u16);
        let ng = gt.masks_of(c).count();
        let np = pred.masks_of(c).count();
        t.gt_instances[i] = ng as u64;
        t.pred_instances[i] = np as u64;
        if let Some(score) = count_agreement(ng, np) {
            t.count_sum[i] += score;
            t.count_n[i] += 1;
            t.iou_sum[i] += per_class_iou(gt, pred, c)?;
            t.iou_n[i] += 1;
        }
    }
    for p in &pairing.pred_to_gt {
        if let Some((_, gc)) = p.partner {
            let conf = pred
                .masks
                .iter()
                .find(|m| m.instance_id == p.instance_id)
                .map_or(1.0, |m| m.confidence);
            let class_match = gc == p.class_id;
            if class_match && p.iou >= iou_threshold {
                t.gated += 1;
                t.gated_weight += loss_weight(conf, p.iou, class_match, iou_threshold)?;
            }
        }
    }
    Ok(t)
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Full metric set for two aligned corpora sharing a taxonomy.
pub fn evaluate(
    gt: &SegmentationCorpus,
    pred: &SegmentationCorpus,
    iou_threshold: f64,
) -> Result<MetricsReport> {
    if gt.taxonomy != pred.taxonomy {
        return Err(Error::Validation(
            "ground-truth and predicted taxonomies differ".into(),
        ));
    }
    if gt.camera.dims() != pred.camera.dims() {
        return Err(Error::DimensionMismatch {
            expected: gt.camera.dims(),
            found: pred.camera.dims(),
        });
    }
    if !(0.0..=1.0).contains(&iou_threshold) {
        return Err(Error::param("iou_threshold", "must lie in [0, 1]"));
    }
    let tax: &ClassTaxonomy = &gt.taxonomy;
    let slots = tax.slots();
    let pairs = aligned(gt.frames(), pred.frames())?;
    // fixed chunks folded in order keep float sums independent of threading
    let partial = pairs
        .par_chunks(256)
        .map(|chunk| {
            chunk
                .iter()
                .try_fold(FrameTally::new(slots), |acc, (g, p)| {
                    Ok::<_, Error>(acc.merge(tally_frame(g, p, slots, iou_threshold)?))
                })
        })
        .collect::<Result<Vec<_>>>()?;
    let tally = partial
        .into_iter()
        .fold(FrameTally::new(slots), FrameTally::merge);
    let coverage = coverage_gap(gt.frames(), pred.frames(), slots)?;
    let rates = rates_from_confusion(&tally.confusion);
    let mean = |s: f64, n: u64| (n > 0).then(|| s / n as f64);

    let classes: Vec<ClassMetrics> = tax
        .class_ids()
        .map(|c| {
            let i = c.index();
            ClassMetrics {
                class: tax.name(c).to_string(),
                iou: mean(tally.iou_sum[i], tally.iou_n[i]),
                count_accuracy: mean(tally.count_sum[i], tally.count_n[i]),
                precision: rates.precision[i],
                recall: rates.recall[i],
                gt_instances: tally.gt_instances[i],
                pred_instances: tally.pred_instances[i],
                coverage_gap: coverage.class_gap[i],
            }
        })
        .collect();
    let present: Vec<&ClassMetrics> = classes
        .iter()
        .filter(|c| c.gt_instances + c.pred_instances > 0)
        .collect();
    Ok(MetricsReport {
        frames: pairs.len(),
        iou_threshold,
        median_iou: median(present.iter().filter_map(|c| c.iou).collect()),
        median_count_accuracy: median(present.iter().filter_map(|c| c.count_accuracy).collect()),
        median_precision: median(present.iter().map(|c| c.precision).collect()),
        median_recall: median(present.iter().map(|c| c.recall).collect()),
        classes,
        accuracy: rates.accuracy,
        off_diagonal_fraction: tally.confusion.off_diagonal_fraction(),
        coverage,
        gated_pairs: tally.gated,
        mean_gated_weight: mean(tally.gated_weight, tally.gated),
        confusion: tally.confusion,
        count_rule: "min/max instance count ratio per frame",
    })
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{:.1}", 100.0 * x))
}

impl MetricsReport {
    /// Aligned text table, one row per class plus a median row.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<18} {:>7} {:>9} {:>9} {:>7} {:>6} {:>6} {:>8}",
            "class", "IoU%", "count%", "prec%", "rec%", "gt", "pred", "gap_pp"
        );
        for c in &self.classes {
            let _ = writeln!(
                s,
                "{:<18} {:>7} {:>9} {:>9} {:>7} {:>6} {:>6} {:>8.2}",
                c.class,
                pct(c.iou),
                pct(c.count_accuracy),
                pct(Some(c.precision)),
                pct(Some(c.recall)),
                c.gt_instances,
                c.pred_instances,
                100.0 * c.coverage_gap
            );
        }
        let _ = writeln!(
            s,
            "{:<18} {:>7} {:>9} {:>9} {:>7}",
            "median",
            pct(self.median_iou),
            pct(self.median_count_accuracy),
            pct(self.median_precision),
            pct(self.median_recall)
        );
        let _ = writeln!(
            s,
            "frames {}  mask accuracy {}%",
            self.frames,
            pct(Some(self.accuracy))
        );
        let _ = writeln!(
            s,
            "coverage gt {}%  pred {}%  off-diagonal {}%",
            pct(Some(self.coverage.mean_gt)),
            pct(Some(self.coverage.mean_pred)),
            pct(Some(self.off_diagonal_fraction))
        );
        let _ = writeln!(s, "count accuracy rule: {}", self.count_rule);
        s
    }
}
