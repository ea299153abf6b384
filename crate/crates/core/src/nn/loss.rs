//! Softmax cross-entropy and the softened-distribution KL term used for
//! distillation. Logits are `batch x classes`; losses are batch means.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{dims, Error, Result};

fn log_softmax(row: ArrayView1<'_, f64>, temperature: f64) -> Array1<f64> {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let shifted = row.mapv(|v| (v - max) / temperature);
    let lse = shifted.mapv(f64::exp).sum().ln();
    shifted.mapv(|v| v - lse)
}

pub fn softmax(logits: ArrayView2<'_, f64>, temperature: f64) -> Array2<f64> {
    let mut out = Array2::zeros(logits.raw_dim());
    for (row, mut o) in logits.axis_iter(Axis(0)).zip(out.axis_iter_mut(Axis(0))) {
        o.assign(&log_softmax(row, temperature).mapv(f64::exp));
    }
    out
}

/// Mean cross-entropy and its gradient with respect to the logits.
pub fn cross_entropy(logits: ArrayView2<'_, f64>, labels: &[usize]) -> Result<(f64, Array2<f64>)> {
    let (b, c) = logits.dim();
    if labels.len() != b {
        return Err(dims("cross entropy labels", b, labels.len()));
    }
    let mut grad = Array2::zeros((b, c));
    let mut loss = 0.0;
    for (i, (row, &label)) in logits.axis_iter(Axis(0)).zip(labels).enumerate() {
        if label >= c {
            return Err(Error::InvalidShape(format!("label {label} for {c} logits")));
        }
        let lp = log_softmax(row, 1.0);
        loss -= lp[label];
        for j in 0..c {
            grad[[i, j]] = (lp[j].exp() - if j == label { 1.0 } else { 0.0 }) / b as f64;
        }
    }
    Ok((loss / b as f64, grad))
}

/// `KL(s || t)` between the temperature-softened student and teacher
/// distributions, averaged over the batch, with its gradient with respect
/// to the student logits. The teacher is a constant.
pub fn kd_loss_grad(
    student: ArrayView2<'_, f64>,
    teacher: ArrayView2<'_, f64>,
    temperature: f64,
) -> Result<(f64, Array2<f64>)> {
    if student.dim() != teacher.dim() {
        return Err(dims("distillation logits", format!("{:?}", student.dim()), format!("{:?}", teacher.dim())));
    }
    if !(temperature > 0.0) {
        return Err(Error::Config(format!("temperature must be positive, got {temperature}")));
    }
    let (b, c) = student.dim();
    let mut grad = Array2::zeros((b, c));
    let mut total = 0.0;
    for (i, (s, t)) in student.axis_iter(Axis(0)).zip(teacher.axis_iter(Axis(0))).enumerate() {
        let ls = log_softmax(s, temperature);
        let lt = log_softmax(t, temperature);
        let ps = ls.mapv(f64::exp);
        let diff = &ls - &lt;
        let kl: f64 = ps.iter().zip(&diff).map(|(p, d)| p * d).sum();
        total += kl;
        for j in 0..c {
            grad[[i, j]] = ps[j] * (diff[j] - kl) / (temperature * b as f64);
        }
    }
    Ok((total / b as f64, grad))
}

pub fn kd_loss(student: ArrayView2<'_, f64>, teacher: ArrayView2<'_, f64>, temperature: f64) -> Result<f64> {
    kd_loss_grad(student, teacher, temperature).map(|(l, _)| l)
}

/// Row-wise argmax; ties go to the lowest index.
pub fn argmax_rows(logits: ArrayView2<'_, f64>) -> Vec<usize> {
    logits
        .axis_iter(Axis(0))
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}
