//! Linear probes used to measure and remove linearly decodable information:
//! logistic regression trained by full-batch gradient descent, and ordinary
//! least squares.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{center_columns, dot, svd, Matrix, RANK_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeConfig {
    pub epochs: usize,
    /// Initial step; epoch `t` uses `step / (1 + t / epochs)`.
    pub step: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig { epochs: 500, step: 0.1 }
    }
}

/// Binary logistic regression, or one-vs-rest for more than two classes.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticProbe {
    classes: usize,
    means: Vec<f64>,
    scale: f64,
    /// One row per trained separator (one for binary problems).
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

/// Number of classes implied by the labels (`max + 1`).
pub fn class_count(labels: &[usize]) -> usize {
    labels.iter().max().map_or(0, |&c| c + 1)
}

/// Fraction of the most frequent label.
pub fn majority_rate(labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let mut counts = vec![0usize; class_count(labels)];
    for &c in labels {
        counts[c] += 1;
    }
    *counts.iter().max().expect("non-empty") as f64 / labels.len() as f64
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + libm::exp(-t))
    } else {
        let e = libm::exp(t);
        e / (1.0 + e)
    }
}

fn check_labels(x: &Matrix, labels: &[usize]) -> Result<()> {
    if labels.len() != x.rows() {
        return Err(Error::invalid(format!("{} labels for {} rows", labels.len(), x.rows())));
    }
    Ok(())
}

impl LogisticProbe {
    pub fn fit(x: &Matrix, labels: &[usize], cfg: &ProbeConfig) -> Result<Self> {
        check_labels(x, labels)?;
        let classes = class_count(labels);
        let distinct = {
            let mut seen = vec![false; classes];
            labels.iter().for_each(|&c| seen[c] = true);
            seen.iter().filter(|&&s| s).count()
        };
        if distinct < 2 {
            return Err(Error::invalid("probe needs at least two classes present"));
        }
        let (xc, means) = center_columns(x);
        let n = xc.rows() as f64;
        let rms = libm::sqrt(xc.as_slice().iter().map(|v| v * v).sum::<f64>() / n);
        let scale = if rms > 0.0 { rms } else { 1.0 };
        let xs = xc.scale(1.0 / scale);
        let targets: Vec<usize> = if classes == 2 { vec![1] } else { (0..classes).collect() };
        let mut weights = Vec::with_capacity(targets.len());
        let mut bias = Vec::with_capacity(targets.len());
        for &positive in &targets {
            let y: Vec<f64> = labels.iter().map(|&c| if c == positive { 1.0 } else { 0.0 }).collect();
            let (w, b) = gradient_descent(&xs, &y, cfg);
            weights.push(w);
            bias.push(b);
        }
        Ok(LogisticProbe { classes, means, scale, weights, bias })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    /// Separator normals in the original input space (unnormalized).
    pub fn directions(&self) -> &[Vec<f64>] {
        &self.weights
    }

    fn margins(&self, row: &[f64]) -> Vec<f64> {
        let z: Vec<f64> = row.iter().zip(&self.means).map(|(v, m)| (v - m) / self.scale).collect();
        self.weights.iter().zip(&self.bias).map(|(w, b)| dot(w, &z) + b).collect()
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        if x.cols() != self.means.len() {
            return Err(Error::invalid(format!("probe expects {} columns, got {}", self.means.len(), x.cols())));
        }
        Ok(x.iter_rows()
            .map(|row| {
                let s = self.margins(row);
                if self.classes == 2 {
                    usize::from(s[0] > 0.0)
                } else {
                    let mut best = 0;
                    for (c, &v) in s.iter().enumerate() {
                        if v > s[best] {
                            best = c;
                        }
                    }
                    best
                }
            })
            .collect())
    }

    pub fn accuracy(&self, x: &Matrix, labels: &[usize]) -> Result<f64> {
        check_labels(x, labels)?;
        let pred = self.predict(x)?;
        let hits = pred.iter().zip(labels).filter(|(p, t)| p == t).count();
        Ok(hits as f64 / labels.len() as f64)
    }
}

fn gradient_descent(x: &Matrix, y: &[f64], cfg: &ProbeConfig) -> (Vec<f64>, f64) {
    let (n, d) = x.shape();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut grad = vec![0.0; d];
    for t in 0..cfg.epochs {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_b = 0.0;
        for (row, &target) in x.iter_rows().zip(y) {
            let err = sigmoid(dot(&w, row) + b) - target;
            for (g, v) in grad.iter_mut().zip(row) {
                *g += err * v;
            }
            grad_b += err;
        }
        let lr = cfg.step / (1.0 + t as f64 / cfg.epochs as f64) / n as f64;
        for (wi, g) in w.iter_mut().zip(&grad) {
            *wi -= lr * g;
        }
        b -= lr * grad_b;
    }
    (w, b)
}

/// Ordinary least squares with intercept, solved through the pseudo-inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRegression {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LinearRegression {
    pub fn fit(x: &Matrix, y: &[f64]) -> Result<Self> {
        if y.len() != x.rows() {
            return Err(Error::invalid(format!("{} targets for {} rows", y.len(), x.rows())));
        }
        let (xc, means) = center_columns(x);
        let y_mean = y.iter().sum::<f64>() / y.len() as f64;
        let f = svd(&xc)?;
        let cutoff = f.sigma.first().copied().unwrap_or(0.0) * RANK_TOLERANCE;
        let d = x.cols();
        let mut weights = vec![0.0; d];
        for (l, &s) in f.sigma.iter().enumerate() {
            if s <= cutoff || s == 0.0 {
                continue;
            }
            let proj: f64 = (0..xc.rows()).map(|i| f.u[(i, l)] * (y[i] - y_mean)).sum::<f64>() / s;
            for (j, w) in weights.iter_mut().enumerate() {
                *w += f.v[(j, l)] * proj;
            }
        }
        let intercept = y_mean - dot(&weights, &means);
        Ok(LinearRegression { weights, intercept })
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.weights.len() {
            return Err(Error::invalid(format!("model expects {} columns, got {}", self.weights.len(), x.cols())));
        }
        Ok(x.iter_rows().map(|r| dot(&self.weights, r) + self.intercept).collect())
    }
}
