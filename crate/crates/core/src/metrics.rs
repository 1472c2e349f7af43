//! Utility and fairness metrics.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::assignment::solve_integer;
use crate::error::{Error, Result};

/// Evaluation summary; each field is present only when the inputs it needs were.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub task_accuracy: Option<f64>,
    pub f1_macro: Option<f64>,
    pub tpr_gap_rms: Option<f64>,
    pub mae: Option<f64>,
    pub mae_gap: Option<f64>,
    /// Agreement of a recovered assignment with a known one.
    pub alignment_accuracy: Option<f64>,
    /// Held-out accuracy of a linear probe predicting the guarded group.
    pub guarded_accuracy: Option<f64>,
}

impl EvalReport {
    /// Populated fields in a fixed order, keyed by field name.
    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        [
            ("task_accuracy", self.task_accuracy),
            ("f1_macro", self.f1_macro),
            ("tpr_gap_rms", self.tpr_gap_rms),
            ("mae", self.mae),
            ("mae_gap", self.mae_gap),
            ("alignment_accuracy", self.alignment_accuracy),
            ("guarded_accuracy", self.guarded_accuracy),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.map(|v| (k, v)))
        .collect()
    }
}

fn same_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::invalid(format!("length mismatch: {a} vs {b}")));
    }
    if a == 0 {
        return Err(Error::invalid("no samples"));
    }
    Ok(())
}

pub fn accuracy(y_true: &[usize], y_pred: &[usize]) -> Result<f64> {
    same_len(y_true.len(), y_pred.len())?;
    let hits = y_true.iter().zip(y_pred).filter(|(t, p)| t == p).count();
    Ok(hits as f64 / y_true.len() as f64)
}

/// Unweighted mean of per-class F1. Classes absent from both gold and
/// predictions do not enter the mean.
pub fn f1_macro(y_true: &[usize], y_pred: &[usize]) -> Result<f64> {
    same_len(y_true.len(), y_pred.len())?;
    let k = y_true.iter().chain(y_pred).max().map_or(0, |&c| c + 1);
    let (mut tp, mut fp, mut fneg) = (vec![0usize; k], vec![0usize; k], vec![0usize; k]);
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t == p {
            tp[t] += 1;
        } else {
            fp[p] += 1;
            fneg[t] += 1;
        }
    }
    let scores: Vec<f64> = (0..k)
        .filter(|&c| tp[c] + fp[c] + fneg[c] > 0)
        .map(|c| 2.0 * tp[c] as f64 / (2 * tp[c] + fp[c] + fneg[c]) as f64)
        .collect();
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

pub fn mae(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    same_len(y_true.len(), y_pred.len())?;
    Ok(y_true.iter().zip(y_pred).map(|(t, p)| libm::fabs(t - p)).sum::<f64>() / y_true.len() as f64)
}

/// Per-class `TPR(c | z=1) − TPR(c | z=0)` for every class with gold
/// positives. A group without positives of the class counts as TPR 0.
pub fn tpr_gaps(y_true: &[usize], y_pred: &[usize], z: &[usize]) -> Result<Vec<f64>> {
    same_len(y_true.len(), y_pred.len())?;
    same_len(y_true.len(), z.len())?;
    if let Some(&g) = z.iter().find(|&&g| g > 1) {
        return Err(Error::invalid(format!("group id {g} is not binary")));
    }
    let k = y_true.iter().max().map_or(0, |&c| c + 1);
    let mut pos = vec![[0usize; 2]; k];
    let mut hit = vec![[0usize; 2]; k];
    for ((&t, &p), &g) in y_true.iter().zip(y_pred).zip(z) {
        pos[t][g] += 1;
        if t == p {
            hit[t][g] += 1;
        }
    }
    let tpr = |c: usize, g: usize| {
        if pos[c][g] == 0 {
            0.0
        } else {
            hit[c][g] as f64 / pos[c][g] as f64
        }
    };
    Ok((0..k).filter(|&c| pos[c][0] + pos[c][1] > 0).map(|c| tpr(c, 1) - tpr(c, 0)).collect())
}

/// Root mean square of [`tpr_gaps`].
pub fn tpr_gap_rms(y_true: &[usize], y_pred: &[usize], z: &[usize]) -> Result<f64> {
    let gaps = tpr_gaps(y_true, y_pred, z)?;
    if gaps.is_empty() {
        return Ok(0.0);
    }
    Ok(libm::sqrt(gaps.iter().map(|g| g * g).sum::<f64>() / gaps.len() as f64))
}

/// `MAD_j = mean_i |η_ij − μ_j|` per group, where `μ_j` is the group's mean
/// absolute error and `η_ij = |μ_j − e_i|`.
pub fn group_mads(abs_errors: &[f64], z: &[usize]) -> Result<Vec<f64>> {
    same_len(abs_errors.len(), z.len())?;
    let m = z.iter().max().map_or(0, |&g| g + 1);
    let mut members: Vec<Vec<f64>> = vec![Vec::new(); m];
    for (&e, &g) in abs_errors.iter().zip(z) {
        members[g].push(e);
    }
    members
        .iter()
        .enumerate()
        .map(|(j, errs)| {
            if errs.is_empty() {
                return Err(Error::invalid(format!("group {j} has no samples")));
            }
            let l = errs.len() as f64;
            let mu = errs.iter().sum::<f64>() / l;
            Ok(errs.iter().map(|&e| libm::fabs(libm::fabs(mu - e) - mu)).sum::<f64>() / l)
        })
        .collect()
}

/// Population standard deviation of the group MADs.
pub fn mae_gap(abs_errors: &[f64], z: &[usize]) -> Result<f64> {
    Ok(population_std(&group_mads(abs_errors, z)?))
}

pub fn population_std(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    libm::sqrt(v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n)
}

/// Accuracy after the best one-to-one relabeling of predicted ids onto gold ids.
pub fn matched_accuracy(y_true: &[usize], y_pred: &[usize]) -> Result<f64> {
    same_len(y_true.len(), y_pred.len())?;
    let k = y_true.iter().chain(y_pred).max().map_or(0, |&c| c + 1);
    let mut confusion = vec![0i64; k * k];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        confusion[p * k + t] += 1;
    }
    let ones = vec![1; k];
    let relabel = solve_integer(k, k, &confusion, &ones, &ones).ok_or_else(|| Error::invalid("relabeling failed"))?;
    let hits: i64 = relabel.iter().enumerate().map(|(p, &t)| confusion[p * k + t]).sum();
    Ok(hits as f64 / y_true.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_and_all_wrong() {
        let y = [0, 1, 2, 1];
        assert_eq!(accuracy(&y, &y).unwrap(), 1.0);
        assert_eq!(f1_macro(&y, &y).unwrap(), 1.0);
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(accuracy(&[0, 1, 0], &[1, 0, 1]).unwrap(), 0.0);
    }

    #[test]
    fn f1_against_confusion_oracle() {
        let t = [0, 0, 0, 1, 1, 2, 2, 2, 2];
        let p = [0, 1, 0, 1, 2, 2, 2, 0, 2];
        let mut conf = [[0.0f64; 3]; 3];
        for (&a, &b) in t.iter().zip(&p) {
            conf[a][b] += 1.0;
        }
        let mut total = 0.0;
        for (c, row) in conf.iter().enumerate() {
            let tp = row[c];
            let precision = tp / conf.iter().map(|r| r[c]).sum::<f64>();
            let recall = tp / row.iter().sum::<f64>();
            total += 2.0 * precision * recall / (precision + recall);
        }
        assert!((f1_macro(&t, &p).unwrap() - total / 3.0).abs() < 1e-12);
    }

    #[test]
    fn length_mismatch() {
        assert!(accuracy(&[0], &[0, 1]).is_err());
        assert!(mae(&[], &[]).is_err());
    }

    #[test]
    fn tpr_gap_hand_cases() {
        let y = [0, 0, 0, 0];
        assert_eq!(tpr_gap_rms(&y, &y, &[0, 0, 1, 1]).unwrap(), 0.0);
        let pred = [0, 0, 0, 1];
        assert!((tpr_gap_rms(&y, &pred, &[1, 1, 0, 0]).unwrap() - 0.5).abs() < 1e-12);
        assert!(tpr_gap_rms(&y, &y, &[0, 2, 1, 1]).is_err());
    }

    fn two_class_gaps() -> (Vec<usize>, Vec<usize>, Vec<usize>) {
        let (mut t, mut p, mut z) = (Vec::new(), Vec::new(), Vec::new());
        let mut add = |class: usize, group: usize, total: usize, correct: usize| {
            for k in 0..total {
                t.push(class);
                p.push(if k < correct { class } else { 1 - class });
                z.push(group);
            }
        };
        add(0, 1, 5, 4);
        add(0, 0, 10, 5);
        add(1, 1, 2, 1);
        add(1, 0, 5, 3);
        (t, p, z)
    }

    #[test]
    fn tpr_gap_rms_two_classes() {
        let (t, p, z) = two_class_gaps();
        let gaps = tpr_gaps(&t, &p, &z).unwrap();
        assert!((gaps[0] - 0.3).abs() < 1e-12 && (gaps[1] + 0.1).abs() < 1e-12);
        assert!((tpr_gap_rms(&t, &p, &z).unwrap() - libm::sqrt(0.05)).abs() < 1e-12);
        let flipped: Vec<usize> = z.iter().map(|g| 1 - g).collect();
        assert!((tpr_gap_rms(&t, &p, &flipped).unwrap() - libm::sqrt(0.05)).abs() < 1e-12);
    }

    #[test]
    fn mae_gap_hand_cases() {
        let errs = [0.1, 0.1, 0.3, 0.3, 0.3];
        let z = [0, 0, 1, 1, 1];
        assert!((mae_gap(&errs, &z).unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(mae_gap(&[0.2, 0.7, 0.1], &[0, 0, 0]).unwrap(), 0.0);
        let same = [0.1, 0.5, 0.1, 0.5];
        assert_eq!(mae_gap(&same, &[0, 0, 1, 1]).unwrap(), 0.0);
        assert!(mae_gap(&[0.1, 0.2], &[0, 2]).is_err());
    }

    #[test]
    fn mae_gap_is_std_of_mads() {
        let errs = [0.3, 1.2, 0.0, 0.4, 2.5, 0.9, 0.1];
        let z = [0, 1, 2, 0, 1, 2, 2];
        let mads = group_mads(&errs, &z).unwrap();
        assert_eq!(mae_gap(&errs, &z).unwrap(), population_std(&mads));
    }

    #[test]
    fn matched_accuracy_ignores_label_names() {
        assert_eq!(matched_accuracy(&[0, 0, 1, 1, 2], &[2, 2, 0, 0, 1]).unwrap(), 1.0);
        assert_eq!(matched_accuracy(&[0, 0, 1, 1], &[1, 1, 1, 0]).unwrap(), 0.75);
    }

    #[test]
    fn report_entries_skip_missing() {
        let r = EvalReport { mae: Some(0.5), alignment_accuracy: Some(1.0), ..EvalReport::default() };
        assert_eq!(r.entries(), vec![("mae", 0.5), ("alignment_accuracy", 1.0)]);
    }
}
