//! First-order optimizers over named flat parameter groups.

use alloc::string::ToString;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// One parameter group paired with its gradient.
pub struct Slot<'a> {
    pub name: &'a str,
    pub param: &'a mut [f64],
    pub grad: &'a [f64],
}

impl<'a> Slot<'a> {
    pub fn new(name: &'a str, param: &'a mut [f64], grad: &'a [f64]) -> Self {
        Self { name, param, grad }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerConfig {
    Adam {
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
    },
    Sgd {
        lr: f64,
    },
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self::adam(1e-3)
    }
}

impl OptimizerConfig {
    pub fn adam(lr: f64) -> Self {
        OptimizerConfig::Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn lr(&self) -> f64 {
        match *self {
            OptimizerConfig::Adam { lr, .. } | OptimizerConfig::Sgd { lr } => lr,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub t: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    config: OptimizerConfig,
    state: AdamState,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig) -> Self {
        Self {
            config,
            state: AdamState {
                t: 0,
                first: Vec::new(),
                second: Vec::new(),
            },
        }
    }

    pub fn config(&self) -> OptimizerConfig {
        self.config
    }

    pub fn steps(&self) -> u64 {
        self.state.t
    }

    /// Applies one descent step. Slots must be passed in the same order and
    /// with the same sizes on every call. Nothing is modified if any gradient
    /// is non-finite.
    pub fn step(&mut self, slots: &mut [Slot<'_>]) -> Result<()> {
        for s in slots.iter() {
            if s.param.len() != s.grad.len() {
                return Err(Error::Shape(alloc::format!(
                    "{}: {} parameters but {} gradients",
                    s.name,
                    s.param.len(),
                    s.grad.len()
                )));
            }
            if !crate::math::all_finite(s.grad) {
                return Err(Error::Numerics(s.name.to_string()));
            }
        }
        match self.config {
            OptimizerConfig::Sgd { lr } => {
                for s in slots.iter_mut() {
                    crate::math::axpy(-lr, s.grad, s.param);
                }
                self.state.t += 1;
            }
            OptimizerConfig::Adam {
                lr,
                beta1,
                beta2,
                eps,
            } => {
                let st = &mut self.state;
                while st.first.len() < slots.len() {
                    let n = slots[st.first.len()].param.len();
                    st.first.push(alloc::vec![0.0; n]);
                    st.second.push(alloc::vec![0.0; n]);
                }
                for (i, s) in slots.iter().enumerate() {
                    if st.first[i].len() != s.param.len() {
                        return Err(Error::Shape(alloc::format!("{}: slot size changed between steps", s.name)));
                    }
                }
                st.t += 1;
                let t = st.t as i32;
                let c1 = 1.0 - libm::pow(beta1, f64::from(t));
                let c2 = 1.0 - libm::pow(beta2, f64::from(t));
                for (i, s) in slots.iter_mut().enumerate() {
                    let (m, v) = (&mut st.first[i], &mut st.second[i]);
                    for j in 0..s.param.len() {
                        let g = s.grad[j];
                        m[j] = beta1 * m[j] + (1.0 - beta1) * g;
                        v[j] = beta2 * v[j] + (1.0 - beta2) * g * g;
                        let mhat = m[j] / c1;
                        let vhat = v[j] / c2;
                        s.param[j] -= lr * mhat / (libm::sqrt(vhat) + eps);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = vec![0.5, -1.0];
        let g = vec![0.0, 0.0];
        let mut opt = Optimizer::new(OptimizerConfig::default());
        opt.step(&mut [Slot::new("p", &mut p, &g)]).unwrap();
        assert_eq!(p, vec![0.5, -1.0]);
    }

    #[test]
    fn first_adam_step_moves_by_lr() {
        // m_hat = g, v_hat = g^2 at t = 1, so the step is lr * g / (|g| + eps).
        let lr = 1e-3;
        let mut p = vec![1.0, 1.0, 1.0];
        let g = vec![0.3, -2.0, 50.0];
        let mut opt = Optimizer::new(OptimizerConfig::adam(lr));
        opt.step(&mut [Slot::new("p", &mut p, &g)]).unwrap();
        for (x, gi) in p.iter().zip(&g) {
            let expected = 1.0 - lr * gi / (gi.abs() + 1e-8);
            assert!((x - expected).abs() < 1e-15);
            assert!(((1.0 - x).abs() - lr).abs() < 1e-9);
        }
    }

    #[test]
    fn non_finite_gradient_aborts_step() {
        let mut a = vec![1.0];
        let mut b = vec![2.0];
        let ga = vec![0.1];
        let gb = vec![f64::NAN];
        let mut opt = Optimizer::new(OptimizerConfig::default());
        let err = opt
            .step(&mut [Slot::new("a", &mut a, &ga), Slot::new("b", &mut b, &gb)])
            .unwrap_err();
        assert_eq!(err, Error::Numerics("b".into()));
        assert_eq!((a[0], b[0]), (1.0, 2.0));
        assert_eq!(opt.steps(), 0);
    }

    #[test]
    fn adam_is_bitwise_reproducible() {
        let run = || {
            let mut p = vec![0.1, 0.2, 0.3];
            let mut opt = Optimizer::new(OptimizerConfig::default());
            for k in 0..10 {
                let g: Vec<f64> = p.iter().map(|x| x * x - 0.01 * k as f64).collect();
                opt.step(&mut [Slot::new("p", &mut p, &g)]).unwrap();
            }
            p
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn sgd_step() {
        let mut p = vec![1.0];
        let mut opt = Optimizer::new(OptimizerConfig::Sgd { lr: 0.5 });
        opt.step(&mut [Slot::new("p", &mut p, &[2.0])]).unwrap();
        assert_eq!(p, vec![0.0]);
    }
}
