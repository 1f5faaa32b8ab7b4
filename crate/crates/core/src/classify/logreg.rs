//! Multinomial logistic regression with an l2 penalty on the weights, fitted by L-BFGS.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_width, Error, Result};

pub const GRADIENT_TOLERANCE: f64 = 1e-6;
pub const MAX_ITERATIONS: usize = 1000;
const MEMORY: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct LogRegModel {
    /// c x d
    pub weights: DMatrix<f64>,
    pub biases: DVector<f64>,
    pub lambda: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl LogRegModel {
    pub fn classes(&self) -> usize {
        self.weights.nrows()
    }

    pub fn width(&self) -> usize {
        self.weights.ncols()
    }

    pub fn zeros(c: usize, d: usize) -> Self {
        LogRegModel {
            weights: DMatrix::zeros(c, d),
            biases: DVector::zeros(c),
            lambda: 1.0,
            converged: false,
            iterations: 0,
        }
    }
}

pub(crate) fn validate_training(x: &DMatrix<f64>, y: &[usize], c: usize) -> Result<()> {
    if x.nrows() == 0 {
        return Err(crate::error::config("no training rows"));
    }
    if x.nrows() != y.len() {
        return Err(Error::Shape {
            expected: x.nrows(),
            actual: y.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(crate::error::config("training features contain non-finite values"));
    }
    if c < 2 {
        return Err(crate::error::config("at least two classes are required"));
    }
    if let Some(bad) = y.iter().find(|&&v| v >= c) {
        return Err(crate::error::config(format!("label {bad} outside [0, {c})")));
    }
    Ok(())
}

/// The penalized objective: mean cross-entropy plus `lambda / (2 n) * |W|^2`.
/// Parameters are packed as W (column-major, c x d) followed by the biases.
pub struct Objective<'a> {
    x: &'a DMatrix<f64>,
    y: &'a [usize],
    c: usize,
    lambda: f64,
}

impl<'a> Objective<'a> {
    pub fn new(x: &'a DMatrix<f64>, y: &'a [usize], c: usize, lambda: f64) -> Self {
        Objective { x, y, c, lambda }
    }

    pub fn len(&self) -> usize {
        self.c * (self.x.ncols() + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn unpack(&self, theta: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
        let d = self.x.ncols();
        let w = DMatrix::from_column_slice(self.c, d, &theta[..self.c * d]);
        let b = DVector::from_column_slice(&theta[self.c * d..]);
        (w, b)
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        self.evaluate(theta, false).0
    }

    /// Value and gradient. The gradient of the class-0 bias is zeroed, which
    /// pins that bias at its starting value of 0 and removes the softmax gauge.
    pub fn evaluate(&self, theta: &[f64], want_grad: bool) -> (f64, Vec<f64>) {
        let n = self.x.nrows() as f64;
        let (w, b) = self.unpack(theta);
        let mut z = self.x * w.transpose();
        for mut row in z.row_iter_mut() {
            row += b.transpose();
        }
        let mut loss = 0.0;
        for (i, mut row) in z.row_iter_mut().enumerate() {
            let m = row.max();
            let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            loss += lse - row[self.y[i]];
            if want_grad {
                row.apply(|v| *v = (*v - lse).exp());
                row[self.y[i]] -= 1.0;
            }
        }
        let value = loss / n + 0.5 * self.lambda / n * w.norm_squared();
        if !want_grad {
            return (value, Vec::new());
        }
        let gw = z.transpose() * self.x / n + &w * (self.lambda / n);
        let mut gb: Vec<f64> = z.column_iter().map(|col| col.sum() / n).collect();
        gb[0] = 0.0;
        let mut grad = gw.as_slice().to_vec();
        grad.extend(gb);
        (value, grad)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Fit on rows of `x` with labels in `[0, c)`.
pub fn logreg_fit(x: &DMatrix<f64>, y: &[usize], lambda: f64, c: usize) -> Result<LogRegModel> {
    validate_training(x, y, c)?;
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(crate::error::config("lambda must be positive"));
    }
    let obj = Objective::new(x, y, c, lambda);
    let mut theta = vec![0.0; obj.len()];
    let (mut f, mut g) = obj.evaluate(&theta, true);
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(MEMORY);
    let mut iterations = 0;
    let mut converged = inf_norm(&g) < GRADIENT_TOLERANCE;

    while !converged && iterations < MAX_ITERATIONS {
        iterations += 1;
        // Two-loop recursion for the quasi-Newton direction.
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(memory.len());
        for (s, yv, rho) in memory.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(yv).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        let gamma = memory
            .back()
            .map_or(1.0 / inf_norm(&g).max(1.0), |(s, yv, _)| dot(s, yv) / dot(yv, yv));
        q.iter_mut().for_each(|v| *v *= gamma);
        for ((s, yv, rho), a) in memory.iter().zip(alphas.iter().rev()) {
            let beta = rho * dot(yv, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - beta) * si);
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&g, &dir);
        if slope >= 0.0 {
            memory.clear();
            dir = g.iter().map(|v| -v / inf_norm(&g).max(1.0)).collect();
            slope = dot(&g, &dir);
        }

        // Backtracking line search with the Armijo condition.
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = theta.iter().zip(&dir).map(|(t, d)| t + step * d).collect();
            let (ft, gt) = obj.evaluate(&trial, true);
            if ft.is_finite() && ft <= f + 1e-4 * step * slope {
                accepted = Some((trial, ft, gt));
                break;
            }
            step *= 0.5;
        }
        let Some((trial, ft, gt)) = accepted else {
            log::debug!("logreg line search stalled at iteration {iterations}");
            break;
        };
        let s: Vec<f64> = trial.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &yv);
        if sy > 1e-12 * dot(&yv, &yv).sqrt() * dot(&s, &s).sqrt() {
            if memory.len() == MEMORY {
                memory.pop_front();
            }
            memory.push_back((s, yv, 1.0 / sy));
        }
        let stalled = (f - ft).abs() <= f64::EPSILON * f.abs().max(1.0) && inf_norm(&gt) < 1e-3;
        theta = trial;
        f = ft;
        g = gt;
        converged = inf_norm(&g) < GRADIENT_TOLERANCE;
        if stalled && !converged {
            log::debug!("logreg reached floating-point precision at iteration {iterations}");
            break;
        }
    }
    let (weights, biases) = obj.unpack(&theta);
    Ok(LogRegModel {
        weights,
        biases,
        lambda,
        converged,
        iterations,
    })
}

/// Class probabilities (n x c); each row sums to 1.
pub fn logreg_probabilities(model: &LogRegModel, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_width(model.width(), x.ncols())?;
    let mut z = x * model.weights.transpose();
    for mut row in z.row_iter_mut() {
        row += model.biases.transpose();
        let m = row.max();
        row.apply(|v| *v = (*v - m).exp());
        let s = row.sum();
        row /= s;
    }
    Ok(z)
}

/// Argmax of the scores, ties to the lowest class index.
pub fn logreg_predict(model: &LogRegModel, x: &DMatrix<f64>) -> Result<Vec<usize>> {
    check_width(model.width(), x.ncols())?;
    let mut z = x * model.weights.transpose();
    for mut row in z.row_iter_mut() {
        row += model.biases.transpose();
    }
    Ok(z.row_iter().map(|row| argmax(row.iter().copied())).collect())
}

pub(crate) fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}
