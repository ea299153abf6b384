//! Adam and SGD with momentum over complex parameters. Real and imaginary
//! parts are treated as independent real coordinates.

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::complex::C64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam { beta1: f64, beta2: f64, eps: f64 },
    Sgd { momentum: f64 },
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl std::str::FromStr for OptimizerKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "adam" => Ok(OptimizerKind::default()),
            "sgd" => Ok(OptimizerKind::Sgd { momentum: 0.9 }),
            other => Err(crate::Error::Config(format!("unknown optimizer '{other}' (adam|sgd)"))),
        }
    }
}

pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    step: i32,
    first: Vec<Array2<C64>>,
    second: Vec<Array2<C64>>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, shapes: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let first: Vec<_> = shapes.into_iter().map(Array2::zeros).collect();
        let second = first.clone();
        Optimizer {
            kind,
            lr,
            step: 0,
            first,
            second,
        }
    }

    /// Applies one update. `grads[i]` packs `dL/dRe + j dL/dIm` of
    /// `params[i]`.
    pub fn step(&mut self, params: &mut [&mut Array2<C64>], grads: &[Array2<C64>]) {
        self.step += 1;
        let lr = self.lr;
        match self.kind {
            OptimizerKind::Adam { beta1, beta2, eps } => {
                let c1 = 1.0 - beta1.powi(self.step);
                let c2 = 1.0 - beta2.powi(self.step);
                for ((p, g), (m, v)) in params
                    .iter_mut()
                    .zip(grads)
                    .zip(self.first.iter_mut().zip(self.second.iter_mut()))
                {
                    Zip::from(&mut **p).and(g).and(m).and(v).for_each(|p, g, m, v| {
                        *m = *m * beta1 + *g * (1.0 - beta1);
                        v.re = beta2 * v.re + (1.0 - beta2) * g.re * g.re;
                        v.im = beta2 * v.im + (1.0 - beta2) * g.im * g.im;
                        p.re -= lr * (m.re / c1) / ((v.re / c2).sqrt() + eps);
                        p.im -= lr * (m.im / c1) / ((v.im / c2).sqrt() + eps);
                    });
                }
            }
            OptimizerKind::Sgd { momentum } => {
                for ((p, g), m) in params.iter_mut().zip(grads).zip(self.first.iter_mut()) {
                    Zip::from(&mut **p).and(g).and(m).for_each(|p, g, m| {
                        *m = *m * momentum + *g;
                        *p -= *m * lr;
                    });
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_lr_is_a_no_op() {
        let mut p = Array2::from_elem((2, 2), C64::new(0.5, -1.0));
        let before = p.clone();
        let g = Array2::from_elem((2, 2), C64::new(3.0, 2.0));
        for kind in [OptimizerKind::default(), OptimizerKind::Sgd { momentum: 0.9 }] {
            let mut opt = Optimizer::new(kind, 0.0, [(2, 2)]);
            opt.step(&mut [&mut p], std::slice::from_ref(&g));
            assert_eq!(p, before);
        }
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut p = Array2::from_elem((1, 1), C64::new(0.0, 0.0));
        let g = Array2::from_elem((1, 1), C64::new(4.0, -0.5));
        let mut opt = Optimizer::new(OptimizerKind::default(), 0.01, [(1, 1)]);
        opt.step(&mut [&mut p], std::slice::from_ref(&g));
        assert!((p[[0, 0]].re + 0.01).abs() < 1e-9);
        assert!((p[[0, 0]].im - 0.01).abs() < 1e-9);
    }
}
