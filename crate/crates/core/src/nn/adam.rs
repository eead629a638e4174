use serde::{Deserialize, Serialize};

use super::layers::{LayerGrads, LayerParams};
use crate::error::{Error, Result};

/// ADAM with L2-coupled weight decay: the gradient fed to the moment
/// estimates is `g + weight_decay * θ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Updates every layer in place. Layers and gradients are matched by
    /// position; moment buffers are allocated on the first call.
    pub fn step(&mut self, params: &mut [&mut LayerParams], grads: &[LayerGrads]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::ShapeMismatch {
                op: "adam",
                expected: format!("{} gradient sets", params.len()),
                found: format!("{}", grads.len()),
            });
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.weight.shape() != g.weight.shape() || p.bias.len() != g.bias.len() {
                return Err(Error::ShapeMismatch {
                    op: "adam",
                    expected: format!("layer {i} gradients shaped {:?}", p.weight.shape()),
                    found: format!("{:?}", g.weight.shape()),
                });
            }
            if !g.is_finite() {
                return Err(Error::NonFinite(format!("gradient of layer {i}")));
            }
        }
        if self.first.is_empty() {
            for p in params.iter() {
                for len in [p.weight.data().len(), p.bias.len()] {
                    self.first.push(vec![0.0; len]);
                    self.second.push(vec![0.0; len]);
                }
            }
        } else if self.first.len() != 2 * params.len() {
            return Err(Error::ShapeMismatch {
                op: "adam",
                expected: format!("{} layers", self.first.len() / 2),
                found: format!("{}", params.len()),
            });
        }

        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let mut slot = 0;
        for (p, g) in params.iter_mut().zip(grads) {
            for (theta, grad) in [
                (p.weight.data_mut(), g.weight.data()),
                (p.bias.as_mut_slice(), g.bias.as_slice()),
            ] {
                let (m, v) = (&mut self.first[slot], &mut self.second[slot]);
                if m.len() != theta.len() {
                    return Err(Error::ShapeMismatch {
                        op: "adam",
                        expected: format!("{} moments", m.len()),
                        found: format!("{}", theta.len()),
                    });
                }
                for i in 0..theta.len() {
                    let gi = grad[i] + self.weight_decay * theta[i];
                    m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * gi;
                    v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * gi * gi;
                    let m_hat = m[i] / c1;
                    let v_hat = v[i] / c2;
                    theta[i] -= self.lr * m_hat / (v_hat.sqrt() + self.epsilon);
                }
                slot += 1;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, DenseMatrix};

    fn scalar(theta: f64) -> LayerParams {
        LayerParams {
            weight: DenseMatrix::from_vec(1, 1, vec![theta]).unwrap(),
            bias: vec![0.0],
            activation: Activation::Identity,
        }
    }

    fn grad(g: f64) -> LayerGrads {
        LayerGrads {
            weight: DenseMatrix::from_vec(1, 1, vec![g]).unwrap(),
            bias: vec![0.0],
        }
    }

    #[test]
    fn first_step_by_hand() {
        // m = 0.1, v = 0.001; m̂ = 1, v̂ = 1; θ' = 1 - 0.1 · 1 / (1 + 1e-8)
        let mut p = scalar(1.0);
        let mut adam = Adam::new(0.1, 0.0);
        adam.step(&mut [&mut p], &[grad(1.0)]).unwrap();
        let expected = 1.0 - 0.1 / (1.0 + 1e-8);
        assert!((p.weight.get(0, 0) - expected).abs() < 1e-15);
        assert_eq!(adam.steps(), 1);
    }

    #[test]
    fn zero_gradient_no_decay_is_a_fixed_point() {
        let mut p = LayerParams::glorot(3, 2, Activation::Elu, 1, 0);
        let before = p.clone();
        let mut adam = Adam::new(0.01, 0.0);
        let zero = LayerGrads::zeros_like(&p);
        for _ in 0..3 {
            adam.step(&mut [&mut p], std::slice::from_ref(&zero))
                .unwrap();
        }
        assert_eq!(p, before);
    }

    #[test]
    fn weight_decay_enters_the_gradient() {
        // with g = 0 and wd = 1 the effective gradient is θ itself
        let mut a = scalar(2.0);
        let mut b = scalar(2.0);
        Adam::new(0.1, 1.0)
            .step(&mut [&mut a], &[grad(0.0)])
            .unwrap();
        Adam::new(0.1, 0.0)
            .step(&mut [&mut b], &[grad(2.0)])
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn identical_inputs_identical_updates() {
        let mut a = LayerParams::glorot(4, 3, Activation::Sigmoid, 9, 2);
        let mut b = a.clone();
        let g = LayerGrads {
            weight: a.weight.map(|x| x.sin()),
            bias: vec![0.1, -0.2, 0.3],
        };
        let mut oa = Adam::new(0.01, 5e-4);
        let mut ob = oa.clone();
        for _ in 0..5 {
            oa.step(&mut [&mut a], std::slice::from_ref(&g)).unwrap();
            ob.step(&mut [&mut b], std::slice::from_ref(&g)).unwrap();
        }
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_gradients() {
        let mut p = scalar(1.0);
        let mut adam = Adam::new(0.1, 0.0);
        assert!(adam.step(&mut [&mut p], &[grad(f64::NAN)]).is_err());
        assert!(adam.step(&mut [&mut p], &[]).is_err());
        let wide = LayerGrads {
            weight: DenseMatrix::zeros(1, 2),
            bias: vec![0.0],
        };
        assert!(adam.step(&mut [&mut p], &[wide]).is_err());
        assert_eq!(adam.steps(), 0);
    }
}
