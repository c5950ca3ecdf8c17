use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::evaluate::metrics::{f1_macro, F1Scores};
use crate::exec::Exec;

const GRAD_TOL: f64 = 1e-6;
const MAX_NEWTON: usize = 200;
/// Cross-validation switches from leave-one-out to k-fold above this size.
const LOO_LIMIT: usize = 200;
const FOLDS: usize = 5;
pub const TEST_FRACTION: f64 = 0.2;
pub const VALIDATION_FRACTION: f64 = 0.2;

/// The 11 penalties `1e-5, 1e-4, ..., 1e5`.
pub fn lambda_grid() -> Vec<f64> {
    (-5..=5).map(|e| 10f64.powi(e)).collect()
}

/// One-vs-rest L2-penalised logistic regression on standardised features.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierModel {
    pub classes: Vec<i32>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub lambda: f64,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    /// Whether every binary problem reached the gradient tolerance.
    pub converged: bool,
}

impl ClassifierModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.scale).map(|((v, m), s)| (v - m) / s).collect()
    }

    /// Score per class, in `classes` order.
    pub fn decision(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::Dimension(format!("feature of length {}, expected {}", x.len(), self.dim())));
        }
        let z = self.standardize(x);
        Ok(self
            .weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w.iter().zip(&z).map(|(a, c)| a * c).sum::<f64>() + b)
            .collect())
    }

    /// Class with the largest score; the first such class on ties.
    pub fn predict(&self, x: &[f64]) -> Result<i32> {
        let d = self.decision(x)?;
        let mut best = 0;
        for (k, v) in d.iter().enumerate() {
            if *v > d[best] {
                best = k;
            }
        }
        Ok(self.classes[best])
    }

    /// Sigmoid of each one-vs-rest score.
    pub fn probabilities(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.decision(x)?.into_iter().map(sigmoid).collect())
    }
}

fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Design matrix with a trailing column of ones.
fn augmented(x: &[Vec<f64>]) -> DMatrix<f64> {
    let d = x.first().map_or(0, Vec::len);
    DMatrix::from_fn(x.len(), d + 1, |i, j| if j < d { x[i][j] } else { 1.0 })
}

fn binary_objective(a: &DMatrix<f64>, y: &[f64], theta: &DVector<f64>, lambda: f64) -> f64 {
    let s = a * theta;
    let d = theta.len() - 1;
    let data: f64 = s.iter().zip(y).map(|(s, y)| softplus(-y * s)).sum::<f64>() / y.len() as f64;
    data + 0.5 * lambda * theta.rows(0, d).norm_squared()
}

/// Newton's method with backtracking on the mean logistic loss plus
/// `lambda / 2 |w|^2` (bias unpenalised). Returns `(theta, converged)`.
fn fit_binary(a: &DMatrix<f64>, y: &[f64], lambda: f64) -> (DVector<f64>, bool) {
    let (n, k) = (a.nrows(), a.ncols());
    let d = k - 1;
    let mut theta = DVector::zeros(k);
    let mut f = binary_objective(a, y, &theta, lambda);
    for _ in 0..MAX_NEWTON {
        let s = a * &theta;
        let mut r = DVector::zeros(n);
        let mut wts = DVector::zeros(n);
        for i in 0..n {
            let p = sigmoid(-y[i] * s[i]);
            r[i] = -y[i] * p / n as f64;
            wts[i] = (p * (1.0 - p) / n as f64).sqrt();
        }
        let mut grad = a.tr_mul(&r);
        for j in 0..d {
            grad[j] += lambda * theta[j];
        }
        if grad.norm() < GRAD_TOL {
            return (theta, true);
        }
        let weighted = DMatrix::from_fn(n, k, |i, j| a[(i, j)] * wts[i]);
        let mut h = weighted.tr_mul(&weighted);
        for j in 0..d {
            h[(j, j)] += lambda;
        }
        let mut jitter = 0.0;
        let step = loop {
            let mut hj = h.clone();
            for j in 0..k {
                hj[(j, j)] += jitter;
            }
            if let Some(ch) = hj.cholesky() {
                break ch.solve(&grad);
            }
            jitter = if jitter == 0.0 { 1e-12 } else { jitter * 10.0 };
        };
        let slope = grad.dot(&step);
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-12 {
            let cand = &theta - &step * t;
            let fc = binary_objective(a, y, &cand, lambda);
            if fc <= f - 1e-4 * t * slope {
                theta = cand;
                f = fc;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // No further decrease representable in floating point.
            return (theta, false);
        }
    }
    (theta, false)
}

fn standardization(x: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let d = x[0].len();
    let n = x.len() as f64;
    let mut mean = vec![0.0; d];
    for row in x {
        mean.iter_mut().zip(row).for_each(|(m, v)| *m += v / n);
    }
    let mut scale = vec![0.0; d];
    for row in x {
        scale.iter_mut().zip(row).zip(&mean).for_each(|((s, v), m)| *s += (v - m) * (v - m) / n);
    }
    let scale = scale.into_iter().map(|v| if v > 0.0 { v.sqrt() } else { 1.0 }).collect();
    (mean, scale)
}

fn sorted_classes(labels: &[i32]) -> Vec<i32> {
    let mut c = labels.to_vec();
    c.sort_unstable();
    c.dedup();
    c
}

/// One-vs-rest fit at a fixed penalty.
pub fn fit_ovr(features: &[Vec<f64>], labels: &[i32], lambda: f64) -> Result<ClassifierModel> {
    if features.len() != labels.len() || features.is_empty() {
        return Err(Error::Dimension(format!("{} feature rows for {} labels", features.len(), labels.len())));
    }
    let d = features[0].len();
    if features.iter().any(|f| f.len() != d) {
        return Err(Error::Dimension("feature rows differ in length".into()));
    }
    let classes = sorted_classes(labels);
    if classes.len() < 2 {
        return Err(Error::Config("classifier needs at least two classes".into()));
    }
    let (mean, scale) = standardization(features);
    let z: Vec<Vec<f64>> = features
        .iter()
        .map(|x| x.iter().zip(&mean).zip(&scale).map(|((v, m), s)| (v - m) / s).collect())
        .collect();
    let a = augmented(&z);
    let mut weights = Vec::with_capacity(classes.len());
    let mut biases = Vec::with_capacity(classes.len());
    let mut converged = true;
    for &c in &classes {
        let y: Vec<f64> = labels.iter().map(|&l| if l == c { 1.0 } else { -1.0 }).collect();
        let (theta, ok) = fit_binary(&a, &y, lambda);
        converged &= ok;
        weights.push(theta.rows(0, d).iter().copied().collect());
        biases.push(theta[d]);
    }
    Ok(ClassifierModel { classes, weights, biases, lambda, mean, scale, converged })
}

/// Indices split per class: the first `round(fraction * n_c)` of each
/// shuffled class go to the second set.
pub fn stratified_split(labels: &[i32], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = Vec::new();
    let mut held = Vec::new();
    for c in sorted_classes(labels) {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        idx.shuffle(&mut rng);
        let n_held = (fraction * idx.len() as f64).round() as usize;
        held.extend_from_slice(&idx[..n_held]);
        keep.extend_from_slice(&idx[n_held..]);
    }
    keep.sort_unstable();
    held.sort_unstable();
    (keep, held)
}

/// Fold id per sample: leave-one-out up to [`LOO_LIMIT`] samples, otherwise
/// [`FOLDS`] folds dealt round-robin within each class.
fn fold_assignment(labels: &[i32]) -> (Vec<usize>, usize) {
    if labels.len() <= LOO_LIMIT {
        return ((0..labels.len()).collect(), labels.len());
    }
    let mut fold = vec![0; labels.len()];
    for c in sorted_classes(labels) {
        for (k, i) in (0..labels.len()).filter(|&i| labels[i] == c).enumerate() {
            fold[i] = k % FOLDS;
        }
    }
    (fold, FOLDS)
}

/// Macro F1 of pooled out-of-fold predictions for each penalty; the best
/// penalty wins, larger on ties.
pub fn select_lambda(
    features: &[Vec<f64>],
    labels: &[i32],
    lambdas: &[f64],
    exec: Exec,
) -> Result<(f64, Vec<(f64, f64)>)> {
    if lambdas.is_empty() {
        return Err(Error::Config("empty penalty grid".into()));
    }
    let (fold, k) = fold_assignment(labels);
    let mut scores = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let preds = exec.try_map(k, |f| {
            let train: Vec<usize> = (0..labels.len()).filter(|&i| fold[i] != f).collect();
            let test: Vec<usize> = (0..labels.len()).filter(|&i| fold[i] == f).collect();
            let x: Vec<Vec<f64>> = train.iter().map(|&i| features[i].clone()).collect();
            let y: Vec<i32> = train.iter().map(|&i| labels[i]).collect();
            let out: Vec<(usize, i32)> = if sorted_classes(&y).len() < 2 {
                test.iter().map(|&i| (i, y[0])).collect()
            } else {
                let m = fit_ovr(&x, &y, lambda)?;
                test.iter().map(|&i| Ok((i, m.predict(&features[i])?))).collect::<Result<_>>()?
            };
            Ok::<_, Error>(out)
        })?;
        let mut pred = vec![0; labels.len()];
        for (i, p) in preds.into_iter().flatten() {
            pred[i] = p;
        }
        scores.push((lambda, f1_macro(&pred, labels)?.macro_f1));
    }
    let mut best = scores[0];
    for &s in &scores[1..] {
        if s.1 > best.1 || (s.1 == best.1 && s.0 > best.0) {
            best = s;
        }
    }
    Ok((best.0, scores))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierReport {
    pub model: ClassifierModel,
    /// Cross-validated macro F1 per penalty.
    pub lambda_scores: Vec<(f64, f64)>,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub test_predictions: Vec<i32>,
    pub train_f1: F1Scores,
    pub test_f1: F1Scores,
}

/// Stratified 80/20 split, penalty chosen by cross-validation on a
/// stratified 20% validation subset of the training part, final fit on the
/// whole training part, scored on the test part.
pub fn fit_classifier(
    features: &[Vec<f64>],
    labels: &[i32],
    lambdas: &[f64],
    seed: u64,
    exec: Exec,
) -> Result<ClassifierReport> {
    if features.len() != labels.len() {
        return Err(Error::Dimension(format!("{} feature rows for {} labels", features.len(), labels.len())));
    }
    if sorted_classes(labels).len() < 2 {
        return Err(Error::Config("classifier needs at least two classes".into()));
    }
    let (train_idx, test_idx) = stratified_split(labels, TEST_FRACTION, seed);
    let train_labels: Vec<i32> = train_idx.iter().map(|&i| labels[i]).collect();
    let (_, val_local) = stratified_split(&train_labels, VALIDATION_FRACTION, seed.wrapping_add(1));
    let val_x: Vec<Vec<f64>> = val_local.iter().map(|&k| features[train_idx[k]].clone()).collect();
    let val_y: Vec<i32> = val_local.iter().map(|&k| train_labels[k]).collect();
    let (lambda, lambda_scores) = if sorted_classes(&val_y).len() >= 2 {
        select_lambda(&val_x, &val_y, lambdas, exec)?
    } else {
        let l = lambdas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (l, Vec::new())
    };
    let train_x: Vec<Vec<f64>> = train_idx.iter().map(|&i| features[i].clone()).collect();
    let model = fit_ovr(&train_x, &train_labels, lambda)?;
    let train_pred = train_x.iter().map(|x| model.predict(x)).collect::<Result<Vec<_>>>()?;
    let test_predictions = test_idx.iter().map(|&i| model.predict(&features[i])).collect::<Result<Vec<_>>>()?;
    let test_labels: Vec<i32> = test_idx.iter().map(|&i| labels[i]).collect();
    Ok(ClassifierReport {
        train_f1: f1_macro(&train_pred, &train_labels)?,
        test_f1: f1_macro(&test_predictions, &test_labels)?,
        model,
        lambda_scores,
        train_indices: train_idx,
        test_indices: test_idx,
        test_predictions,
    })
}
