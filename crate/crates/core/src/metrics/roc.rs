use std::io::Write;

use serde::{Deserialize, Serialize};

use super::MetricError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub tpr: f64,
    pub fpr: f64,
}

/// Pooled threshold sweep over all (score, label) pairs, from the strictest
/// threshold down. Tied scores move in one step.
pub fn roc_micro(scores: &[f64], labels: &[bool]) -> Result<Vec<RocPoint>, MetricError> {
    if scores.len() != labels.len() {
        return Err(MetricError::Input(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(MetricError::Input("non-finite score".into()));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(MetricError::Undefined(format!("{pos} positive and {neg} negative labels")));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![RocPoint { threshold: f64::INFINITY, tpr: 0.0, fpr: 0.0 }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint { threshold: s, tpr: tp as f64 / pos as f64, fpr: fp as f64 / neg as f64 });
    }
    Ok(points)
}

/// Trapezoidal area under the curve.
pub fn auc(points: &[RocPoint]) -> Result<f64, MetricError> {
    if points.len() < 2 {
        return Err(MetricError::Input("AUC needs at least two points".into()));
    }
    Ok(points.windows(2).map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0).sum())
}

/// Mann–Whitney rank statistic with mid-ranks for ties.
pub fn auc_rank(scores: &[f64], labels: &[bool]) -> Result<f64, MetricError> {
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(MetricError::Undefined(format!("{pos} positive and {neg} negative labels")));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = mid;
        }
        i = j + 1;
    }
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l).map(|(r, _)| r).sum();
    let p = pos as f64;
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * neg as f64))
}

pub fn write_roc_csv(mut w: impl Write, points: &[RocPoint]) -> std::io::Result<()> {
    writeln!(w, "threshold,fpr,tpr")?;
    for p in points {
        writeln!(w, "{},{},{}", p.threshold, p.fpr, p.tpr)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_sample_case() {
        let s = [0.9, 0.8, 0.3, 0.1];
        let l = [true, false, true, false];
        let pts = roc_micro(&s, &l).unwrap();
        assert!((auc(&pts).unwrap() - 0.75).abs() < 1e-15);
        assert!((auc_rank(&s, &l).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn perfect_and_degenerate() {
        let pts = roc_micro(&[0.9, 0.8, 0.2], &[true, true, false]).unwrap();
        assert!(pts.iter().any(|p| p.fpr == 0.0 && p.tpr == 1.0));
        assert_eq!(auc(&pts).unwrap(), 1.0);
        assert!(matches!(roc_micro(&[0.1, 0.2], &[true, true]), Err(MetricError::Undefined(_))));
        assert!(auc(&pts[..1]).is_err());
    }

    #[test]
    fn ties_give_diagonal() {
        let pts = roc_micro(&[0.5; 4], &[true, false, true, false]).unwrap();
        assert_eq!(auc(&pts).unwrap(), 0.5);
    }
}
