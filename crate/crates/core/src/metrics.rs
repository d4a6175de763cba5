//! Set-based detection metrics.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::suspect::SuspectSets;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Harmonic mean, zero when both are zero.
pub fn harmonic(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

/// Precision, recall and F1 of `predicted` against `truth`.
///
/// Empty sets: both empty scores `(1, 1, 1)`; an empty prediction scores `(1, 0, 0)`;
/// a nonempty prediction with no attackers scores `(0, 1, 0)`.
pub fn precision_recall_f1(predicted: &BTreeSet<usize>, truth: &BTreeSet<usize>) -> Prf {
    let hit = predicted.intersection(truth).count() as f64;
    match (predicted.is_empty(), truth.is_empty()) {
        (true, true) => Prf {
            precision: 1.0,
            recall: 1.0,
            f1: 1.0,
        },
        (true, false) => Prf {
            precision: 1.0,
            recall: 0.0,
            f1: 0.0,
        },
        (false, true) => Prf {
            precision: 0.0,
            recall: 1.0,
            f1: 0.0,
        },
        (false, false) => {
            let precision = hit / predicted.len() as f64;
            let recall = hit / truth.len() as f64;
            Prf {
                precision,
                recall,
                f1: harmonic(precision, recall),
            }
        }
    }
}

/// `|suspected| / N`.
pub fn malicious_ratio(initial: &SuspectSets) -> f64 {
    match initial.n() {
        0 => 0.0,
        n => initial.suspected.len() as f64 / n as f64,
    }
}

/// Mean and sample standard deviation; the deviation is zero for fewer than two samples.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Pearson correlation; `None` when either side is constant.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let (mx, _) = mean_std(xs);
    let (my, _) = mean_std(ys);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

/// Least-squares slope of `ys` on `xs`.
pub fn slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let (mx, _) = mean_std(xs);
    let (my, _) = mean_std(ys);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    (sxx > 0.0).then(|| xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / sxx)
}
