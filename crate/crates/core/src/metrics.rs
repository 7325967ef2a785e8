//! Classification metrics: accuracy, confusion matrices, ROC/AUC
//! (per-class, per class pair, and micro-averaged), and DeepROC interval
//! analysis over fixed FPR groups.

use serde::Serialize;

use crate::error::{Error, Result};

/// Raw confusion counts, rows indexed by true class.
pub type ConfusionCounts = Vec<Vec<u64>>;
/// Row-normalized confusion matrix.
pub type ConfusionRates = Vec<Vec<f64>>;

/// One scored subject: ground truth plus the predicted distribution.
#[derive(Debug, Clone, Serialize)]
pub struct ScoredPrediction {
    pub subject_id: String,
    pub true_class: usize,
    pub probabilities: Vec<f64>,
}

/// Empirical ROC polyline. Points run from (0,0) to (1,1) with
/// nondecreasing fpr and tpr; samples with equal scores cross the
/// threshold simultaneously (diagonal segment). `thresholds[i]` is the
/// score cut producing `points[i]` (infinity for the origin).
#[derive(Debug, Clone, Serialize)]
pub struct RocCurve {
    pub points: Vec<(f64, f64)>,
    pub thresholds: Vec<f64>,
}

/// DeepROC row for one FPR group.
#[derive(Debug, Clone, Serialize)]
pub struct DeepRocGroup {
    pub fpr_lo: f64,
    pub fpr_hi: f64,
    /// Partial AUC standardized to `[0,1]` (0.5 = chance over the group);
    /// equals the plain AUC on the full range.
    pub auc_restricted: f64,
    pub mean_sensitivity: f64,
    pub mean_specificity: f64,
    pub auc_ni: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DeepRocTable {
    pub groups: Vec<DeepRocGroup>,
}

/// FPR groups: full range plus the three DeepROC sub-ranges.
pub const DEEPROC_GROUPS: [(f64, f64); 4] = [(0.0, 1.0), (0.0, 0.33), (0.33, 0.67), (0.67, 1.0)];

/// Argmax with ties broken by the lowest class index.
pub fn argmax_class(probabilities: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in probabilities.iter().enumerate().skip(1) {
        if p > probabilities[best] {
            best = i;
        }
    }
    best
}

pub fn accuracy(predictions: &[ScoredPrediction]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::Domain("accuracy of empty prediction set".into()));
    }
    let correct = predictions
        .iter()
        .filter(|p| argmax_class(&p.probabilities) == p.true_class)
        .count();
    Ok(correct as f64 / predictions.len() as f64)
}

/// Rows = true class, columns = predicted class. Returns raw counts and
/// the row-normalized matrix (all-zero rows stay zero).
pub fn confusion_matrix(
    predictions: &[ScoredPrediction],
    num_classes: usize,
) -> Result<(ConfusionCounts, ConfusionRates)> {
    if predictions.is_empty() {
        return Err(Error::Domain("confusion matrix of empty set".into()));
    }
    let mut counts = vec![vec![0u64; num_classes]; num_classes];
    for p in predictions {
        counts[p.true_class][argmax_class(&p.probabilities)] += 1;
    }
    let normalized = counts
        .iter()
        .map(|row| {
            let total: u64 = row.iter().sum();
            row.iter()
                .map(|&c| {
                    if total == 0 {
                        0.0
                    } else {
                        c as f64 / total as f64
                    }
                })
                .collect()
        })
        .collect();
    Ok((counts, normalized))
}

/// ROC curve and trapezoidal AUC over a binary problem. Equal scores are
/// grouped so positives and negatives cross the threshold together, which
/// makes the AUC equal to the Mann-Whitney statistic with ties counted
/// one half.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<(RocCurve, f64)> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedAuc(format!(
            "need both classes, got {n_pos} positives / {n_neg} negatives"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![(0.0, 0.0)];
    let mut thresholds = vec![f64::INFINITY];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let score = scores[order[i]];
        let mut j = i;
        while j < order.len() && scores[order[j]] == score {
            if labels[order[j]] {
                tp += 1;
            } else {
                fp += 1;
            }
            j += 1;
        }
        points.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
        thresholds.push(score);
        i = j;
    }

    let mut auc = 0.0;
    for w in points.windows(2) {
        let (x1, y1) = w[0];
        let (x2, y2) = w[1];
        auc += (x2 - x1) * (y1 + y2) / 2.0;
    }
    Ok((RocCurve { points, thresholds }, auc))
}

/// Pooled one-vs-rest ROC: every (sample, class) pair contributes the
/// predicted probability with a binary hit label, and one AUC is computed
/// over the pool.
pub fn micro_auc(predictions: &[ScoredPrediction], num_classes: usize) -> Result<(RocCurve, f64)> {
    if num_classes < 2 {
        return Err(Error::Domain("micro AUC needs at least 2 classes".into()));
    }
    let mut scores = Vec::with_capacity(predictions.len() * num_classes);
    let mut labels = Vec::with_capacity(predictions.len() * num_classes);
    for p in predictions {
        for c in 0..num_classes {
            scores.push(p.probabilities[c]);
            labels.push(p.true_class == c);
        }
    }
    roc_auc(&scores, &labels)
}

/// Curve value entering the group at `x`: the first tpr the polyline
/// attains at fpr >= x (bottom of a vertical segment sitting exactly
/// at x).
fn tpr_entering(points: &[(f64, f64)], x: f64) -> f64 {
    for (idx, &(fpr, tpr)) in points.iter().enumerate() {
        if fpr >= x {
            if fpr == x || idx == 0 {
                return tpr;
            }
            let (x0, y0) = points[idx - 1];
            return y0 + (tpr - y0) * (x - x0) / (fpr - x0);
        }
    }
    points.last().map_or(0.0, |p| p.1)
}

/// Curve value leaving the group at `x`: the last tpr attained at
/// fpr <= x (top of a vertical segment sitting exactly at x).
fn tpr_leaving(points: &[(f64, f64)], x: f64) -> f64 {
    let mut result = 0.0;
    for (idx, &(fpr, tpr)) in points.iter().enumerate() {
        if fpr <= x {
            result = tpr;
        } else {
            if points[idx - 1].0 < x {
                let (x0, y0) = points[idx - 1];
                result = y0 + (tpr - y0) * (x - x0) / (fpr - x0);
            }
            break;
        }
    }
    result
}

/// Integral of the polyline tpr over fpr in [x1, x2].
fn integrate_tpr(points: &[(f64, f64)], x1: f64, x2: f64) -> f64 {
    let mut total = 0.0;
    for w in points.windows(2) {
        let (xa, ya) = w[0];
        let (xb, yb) = w[1];
        if xb <= xa {
            continue;
        }
        let lo = xa.max(x1);
        let hi = xb.min(x2);
        if hi <= lo {
            continue;
        }
        let y_lo = ya + (yb - ya) * (lo - xa) / (xb - xa);
        let y_hi = ya + (yb - ya) * (hi - xa) / (xb - xa);
        total += (y_lo + y_hi) / 2.0 * (hi - lo);
    }
    total
}

/// Path integral of fpr over tpr in [y1, y2] (the inverse-curve integral;
/// horizontal segments carry no tpr measure).
fn integrate_fpr_over_tpr(points: &[(f64, f64)], y1: f64, y2: f64) -> f64 {
    let mut total = 0.0;
    for w in points.windows(2) {
        let (xa, ya) = w[0];
        let (xb, yb) = w[1];
        if yb <= ya {
            continue;
        }
        let lo = ya.max(y1);
        let hi = yb.min(y2);
        if hi <= lo {
            continue;
        }
        let x_lo = xa + (xb - xa) * (lo - ya) / (yb - ya);
        let x_hi = xa + (xb - xa) * (hi - ya) / (yb - ya);
        total += (x_lo + x_hi) / 2.0 * (hi - lo);
    }
    total
}

/// Smallest fpr at which the polyline reaches tpr >= y.
fn fpr_reaching(points: &[(f64, f64)], y: f64) -> f64 {
    for (idx, &(fpr, tpr)) in points.iter().enumerate() {
        if tpr >= y {
            if tpr == y || idx == 0 {
                return fpr;
            }
            let (x0, y0) = points[idx - 1];
            if tpr == y0 {
                return x0;
            }
            return x0 + (fpr - x0) * (y - y0) / (tpr - y0);
        }
    }
    points.last().map_or(1.0, |p| p.0)
}

/// DeepROC interval table over the fixed FPR groups.
pub fn deeproc_table(curve: &RocCurve) -> DeepRocTable {
    let points = &curve.points;
    let groups = DEEPROC_GROUPS
        .iter()
        .map(|&(x1, x2)| {
            let dx = x2 - x1;
            let pauc = integrate_tpr(points, x1, x2);
            let mean_sensitivity = pauc / dx;

            let y1 = tpr_entering(points, x1);
            let y2 = tpr_leaving(points, x2);
            let dy = y2 - y1;
            let mean_specificity = if dy > 0.0 {
                (dy - integrate_fpr_over_tpr(points, y1, y2)) / dy
            } else if y1 >= 1.0 {
                // Saturated region: specificity exhausted.
                0.0
            } else {
                1.0 - fpr_reaching(points, y1)
            };

            let auc_ni = if dx + dy > 0.0 {
                (dx * mean_sensitivity + dy * mean_specificity) / (dx + dy)
            } else {
                mean_sensitivity
            };

            // McClish standardization of the partial AUC: 0.5 at chance,
            // 1 at the group ceiling.
            let a_min = dx * (x1 + x2) / 2.0;
            let a_max = dx;
            let auc_restricted = (0.5 * (1.0 + (pauc - a_min) / (a_max - a_min))).clamp(0.0, 1.0);

            DeepRocGroup {
                fpr_lo: x1,
                fpr_hi: x2,
                auc_restricted,
                mean_sensitivity,
                mean_specificity,
                auc_ni,
            }
        })
        .collect();
    DeepRocTable { groups }
}

/// DeepROC table for one class pair plus its curve.
#[derive(Debug, Clone, Serialize)]
pub struct PairAnalysis {
    pub task: String,
    pub auc: f64,
    pub table: DeepRocTable,
    #[serde(skip)]
    pub curve: RocCurve,
}

/// Full metrics report for one evaluated prediction set.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub n_samples: usize,
    pub class_names: Vec<String>,
    pub accuracy: f64,
    pub confusion_counts: ConfusionCounts,
    pub confusion_normalized: ConfusionRates,
    /// One-vs-rest AUC per class, ordered like `class_names`.
    pub per_class_auc: Vec<f64>,
    pub micro_auc: f64,
    /// DeepROC analysis per binary task (class pair).
    pub deeproc: Vec<PairAnalysis>,
    #[serde(skip)]
    pub micro_curve: RocCurve,
    #[serde(skip)]
    pub class_curves: Vec<RocCurve>,
}

pub fn report(predictions: &[ScoredPrediction], class_names: &[String]) -> Result<MetricsReport> {
    let c = class_names.len();
    if predictions.iter().any(|p| p.probabilities.len() != c) {
        return Err(Error::Shape("prediction width vs class count".into()));
    }
    let accuracy = accuracy(predictions)?;
    let (confusion_counts, confusion_normalized) = confusion_matrix(predictions, c)?;
    let (micro_curve, micro) = micro_auc(predictions, c)?;

    let mut per_class_auc = Vec::with_capacity(c);
    let mut class_curves = Vec::with_capacity(c);
    for class in 0..c {
        let scores: Vec<f64> = predictions.iter().map(|p| p.probabilities[class]).collect();
        let labels: Vec<bool> = predictions.iter().map(|p| p.true_class == class).collect();
        let (curve, auc) = roc_auc(&scores, &labels)?;
        per_class_auc.push(auc);
        class_curves.push(curve);
    }

    let mut deeproc = Vec::new();
    for i in 0..c {
        for j in (i + 1)..c {
            // Restrict to the two classes; score the later class by its
            // renormalized probability.
            let mut scores = Vec::new();
            let mut labels = Vec::new();
            for p in predictions {
                if p.true_class == i || p.true_class == j {
                    let pi = p.probabilities[i];
                    let pj = p.probabilities[j];
                    let denom = pi + pj;
                    scores.push(if denom > 0.0 { pj / denom } else { 0.5 });
                    labels.push(p.true_class == j);
                }
            }
            let (curve, auc) = roc_auc(&scores, &labels)?;
            deeproc.push(PairAnalysis {
                task: format!("{}_vs_{}", class_names[i], class_names[j]),
                auc,
                table: deeproc_table(&curve),
                curve,
            });
        }
    }

    Ok(MetricsReport {
        n_samples: predictions.len(),
        class_names: class_names.to_vec(),
        accuracy,
        confusion_counts,
        confusion_normalized,
        per_class_auc,
        micro_auc: micro,
        deeproc,
        micro_curve,
        class_curves,
    })
}

/// ROC points as CSV: `fpr,tpr,threshold` per line.
pub fn write_roc_csv(curve: &RocCurve, out: &mut impl std::io::Write) -> std::io::Result<()> {
    writeln!(out, "fpr,tpr,threshold")?;
    for (point, threshold) in curve.points.iter().zip(&curve.thresholds) {
        writeln!(out, "{},{},{}", point.0, point.1, threshold)?;
    }
    Ok(())
}
