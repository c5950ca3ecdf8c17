use crate::error::{Error, Result};
use crate::phasefield::CoefficientMatrix;

/// Frobenius norm of `est - truth`.
pub fn parameter_error(est: &CoefficientMatrix, truth: &CoefficientMatrix) -> Result<f64> {
    if est.rows() != truth.rows() || est.cols() != truth.cols() {
        return Err(Error::Dimension(format!(
            "coefficient shapes {}x{} and {}x{}",
            est.rows(),
            est.cols(),
            truth.rows(),
            truth.cols()
        )));
    }
    Ok(est.values().iter().zip(truth.values()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
}

/// `|recon|_1 / |reference|_1`, or `None` when the reference is zero.
pub fn sparsity_ratio(recon: &CoefficientMatrix, reference: &CoefficientMatrix) -> Option<f64> {
    let denom = reference.l1_norm();
    (denom > 0.0).then(|| recon.l1_norm() / denom)
}

/// Mean and population standard deviation; `(NaN, NaN)` for no values.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Clone, Debug, PartialEq)]
pub struct F1Scores {
    /// `(class, f1)`, ascending by class.
    pub per_class: Vec<(i32, f64)>,
    pub macro_f1: f64,
    /// Population standard deviation across classes.
    pub std: f64,
}

/// Per-class and macro F1 over every class seen in `labels` or
/// `predictions`.
pub fn f1_macro(predictions: &[i32], labels: &[i32]) -> Result<F1Scores> {
    if predictions.len() != labels.len() {
        return Err(Error::Dimension(format!("{} predictions for {} labels", predictions.len(), labels.len())));
    }
    let mut classes: Vec<i32> = labels.iter().chain(predictions).copied().collect();
    classes.sort_unstable();
    classes.dedup();
    let per_class: Vec<(i32, f64)> = classes
        .iter()
        .map(|&c| {
            let mut tp = 0usize;
            let mut fp = 0usize;
            let mut fn_ = 0usize;
            for (&p, &l) in predictions.iter().zip(labels) {
                match (p == c, l == c) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fn_ += 1,
                    _ => {}
                }
            }
            let precision = if tp + fp > 0 { tp as f64 / (tp + fp) as f64 } else { 0.0 };
            let recall = if tp + fn_ > 0 { tp as f64 / (tp + fn_) as f64 } else { 0.0 };
            let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
            (c, f1)
        })
        .collect();
    let scores: Vec<f64> = per_class.iter().map(|&(_, f)| f).collect();
    let (macro_f1, std) = if scores.is_empty() { (0.0, 0.0) } else { mean_std(&scores) };
    Ok(F1Scores { per_class, macro_f1, std })
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Dimension(format!("spearman needs two equal series of length >= 2, got {} and {}", x.len(), y.len())));
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let (mx, _) = mean_std(&rx);
    let (my, _) = mean_std(&ry);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(0.0);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_four_five() {
        let a = CoefficientMatrix::new(2, 2, vec![3.0, 4.0, 0.0, 0.0]).unwrap();
        let z = CoefficientMatrix::zeros(2, 2);
        assert_eq!(parameter_error(&a, &z).unwrap(), 5.0);
        assert_eq!(parameter_error(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn sparsity_ratio_cases() {
        let a = CoefficientMatrix::new(1, 2, vec![1.0, -2.0]).unwrap();
        let half = CoefficientMatrix::new(1, 2, vec![0.5, -1.0]).unwrap();
        assert_eq!(sparsity_ratio(&a, &a), Some(1.0));
        assert_eq!(sparsity_ratio(&half, &a), Some(0.5));
        assert_eq!(sparsity_ratio(&CoefficientMatrix::zeros(1, 2), &a), Some(0.0));
        assert_eq!(sparsity_ratio(&a, &CoefficientMatrix::zeros(1, 2)), None);
    }

    #[test]
    fn f1_all_one_class() {
        let labels = [0, 0, 1, 1];
        let s = f1_macro(&[0, 0, 0, 0], &labels).unwrap();
        assert!((s.per_class[0].1 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.per_class[1].1, 0.0);
        assert!((s.macro_f1 - 1.0 / 3.0).abs() < 1e-15);
        let perfect = f1_macro(&labels, &labels).unwrap();
        assert_eq!((perfect.macro_f1, perfect.std), (1.0, 0.0));
    }

    #[test]
    fn spearman_of_monotone_series() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((spearman(&x, &[10.0, 20.0, 25.0, 100.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((spearman(&x, &[4.0, 3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
    }
}
