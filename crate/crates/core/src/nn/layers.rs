use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::matrix::{DenseMatrix, SparseMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    /// Exponential linear unit with `alpha = 1`.
    Elu,
    Identity,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Elu => {
                if z >= 0.0 {
                    z
                } else {
                    z.exp_m1()
                }
            }
            Activation::Identity => z,
        }
    }

    /// Derivative at pre-activation `z` given the output `h = apply(z)`.
    pub fn derivative(self, z: f64, h: f64) -> f64 {
        match self {
            Activation::Sigmoid => h * (1.0 - h),
            Activation::Elu => {
                if z >= 0.0 {
                    1.0
                } else {
                    h + 1.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Weight (`in_dim x out_dim`), bias and activation of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub weight: DenseMatrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl LayerParams {
    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            weight: DenseMatrix::zeros(in_dim, out_dim),
            bias: vec![0.0; out_dim],
            activation,
        }
    }

    /// Glorot-uniform weights in `±sqrt(6 / (in + out))` and zero bias.
    /// `stream` separates layers initialized from the same seed.
    pub fn glorot(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        seed: u64,
        stream: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let bound = (6.0 / (in_dim + out_dim).max(1) as f64).sqrt();
        let data = (0..in_dim * out_dim)
            .map(|_| bound * (2.0 * rng.random::<f64>() - 1.0))
            .collect();
        Self {
            weight: DenseMatrix::from_vec(in_dim, out_dim, data).expect("sized above"),
            bias: vec![0.0; out_dim],
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn parameter_count(&self) -> usize {
        self.weight.data().len() + self.bias.len()
    }

    pub fn is_finite(&self) -> bool {
        self.weight.is_finite() && self.bias.iter().all(|b| b.is_finite())
    }
}

/// Gradients shaped like a [`LayerParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub weight: DenseMatrix,
    pub bias: Vec<f64>,
}

impl LayerGrads {
    pub fn zeros_like(p: &LayerParams) -> Self {
        Self {
            weight: DenseMatrix::zeros(p.in_dim(), p.out_dim()),
            bias: vec![0.0; p.out_dim()],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weight.is_finite() && self.bias.iter().all(|b| b.is_finite())
    }
}

/// Layer input: explicit features, or the identity (one-hot node ids).
#[derive(Debug, Clone, Copy)]
pub enum Features<'a> {
    OneHot,
    Dense(&'a DenseMatrix),
}

/// Values recorded by a forward pass for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerCache {
    pub pre_activation: DenseMatrix,
    pub output: DenseMatrix,
}

fn check_input(op: &'static str, rows: usize, x: Features<'_>, p: &LayerParams) -> Result<()> {
    let (x_rows, x_cols) = match x {
        Features::OneHot => (rows, rows),
        Features::Dense(x) => x.shape(),
    };
    if x_rows != rows || x_cols != p.in_dim() {
        return Err(Error::ShapeMismatch {
            op,
            expected: format!("{rows}x{}", p.in_dim()),
            found: format!("{x_rows}x{x_cols}"),
        });
    }
    Ok(())
}

fn activate(mut z: DenseMatrix, p: &LayerParams, op: &'static str) -> Result<LayerCache> {
    z.add_row_vector(&p.bias)?;
    if !z.is_finite() {
        return Err(Error::NonFinite(op.into()));
    }
    let output = z.map(|v| p.activation.apply(v));
    Ok(LayerCache {
        pre_activation: z,
        output,
    })
}

fn input_times_weight(x: Features<'_>, w: &DenseMatrix) -> Result<DenseMatrix> {
    match x {
        Features::OneHot => Ok(w.clone()),
        Features::Dense(x) => x.matmul(w),
    }
}

/// `act(Â X W + b)`.
pub fn conv_forward(a: &SparseMatrix, x: Features<'_>, p: &LayerParams) -> Result<LayerCache> {
    if a.rows() != a.cols() {
        return Err(Error::ShapeMismatch {
            op: "graph conv",
            expected: "square propagation matrix".into(),
            found: format!("{}x{}", a.rows(), a.cols()),
        });
    }
    check_input("graph conv", a.rows(), x, p)?;
    let z = a.matmul(&input_times_weight(x, &p.weight)?)?;
    activate(z, p, "graph conv")
}

/// `act(X W + b)`.
pub fn linear_forward(x: Features<'_>, rows: usize, p: &LayerParams) -> Result<LayerCache> {
    check_input("linear", rows, x, p)?;
    activate(input_times_weight(x, &p.weight)?, p, "linear")
}

fn pre_activation_grad(
    cache: &LayerCache,
    d_out: &DenseMatrix,
    p: &LayerParams,
) -> Result<DenseMatrix> {
    if d_out.shape() != cache.output.shape() {
        return Err(Error::ShapeMismatch {
            op: "backward",
            expected: format!("{:?}", cache.output.shape()),
            found: format!("{:?}", d_out.shape()),
        });
    }
    let mut dz = d_out.clone();
    for ((g, &z), &h) in dz
        .data_mut()
        .iter_mut()
        .zip(cache.pre_activation.data())
        .zip(cache.output.data())
    {
        *g *= p.activation.derivative(z, h);
    }
    Ok(dz)
}

fn weight_grads(
    x: Features<'_>,
    g: DenseMatrix,
    dz: &DenseMatrix,
    p: &LayerParams,
    input_grad: bool,
) -> Result<(LayerGrads, Option<DenseMatrix>)> {
    let weight = match x {
        Features::OneHot => g.clone(),
        Features::Dense(x) => x.t_matmul(&g)?,
    };
    let d_input = if input_grad {
        Some(g.matmul_t(&p.weight)?)
    } else {
        None
    };
    Ok((
        LayerGrads {
            weight,
            bias: dz.column_sums(),
        },
        d_input,
    ))
}

/// Gradients of a graph convolution given `d_out = dL/dH`. Returns the
/// parameter gradients and, if requested, `dL/dX`.
pub fn conv_backward(
    a: &SparseMatrix,
    x: Features<'_>,
    p: &LayerParams,
    cache: &LayerCache,
    d_out: &DenseMatrix,
    input_grad: bool,
) -> Result<(LayerGrads, Option<DenseMatrix>)> {
    let dz = pre_activation_grad(cache, d_out, p)?;
    let g = a.t_matmul(&dz)?;
    weight_grads(x, g, &dz, p, input_grad)
}

pub fn linear_backward(
    x: Features<'_>,
    p: &LayerParams,
    cache: &LayerCache,
    d_out: &DenseMatrix,
    input_grad: bool,
) -> Result<(LayerGrads, Option<DenseMatrix>)> {
    let dz = pre_activation_grad(cache, d_out, p)?;
    weight_grads(x, dz.clone(), &dz, p, input_grad)
}

/// Dense graph convolution `act(Â X W + b)`.
pub fn graph_conv_forward(
    a: &DenseMatrix,
    x: &DenseMatrix,
    p: &LayerParams,
) -> Result<DenseMatrix> {
    conv_forward(&SparseMatrix::from_dense(a), Features::Dense(x), p).map(|c| c.output)
}

/// Mean squared error over the rows selected by `mask` and its gradient
/// with respect to `pred` (zero outside the mask).
pub fn masked_mse(pred: &[f64], target: &[f64], mask: &[bool]) -> Result<(f64, Vec<f64>)> {
    if pred.len() != target.len() || pred.len() != mask.len() {
        return Err(Error::ShapeMismatch {
            op: "masked_mse",
            expected: format!("{} predictions, targets and mask entries", pred.len()),
            found: format!("{} targets, {} mask entries", target.len(), mask.len()),
        });
    }
    let count = mask.iter().filter(|&&m| m).count();
    if count == 0 {
        return Err(Error::InvalidArgument("loss mask selects no nodes".into()));
    }
    let scale = 1.0 / count as f64;
    let mut loss = 0.0;
    let grad = pred
        .iter()
        .zip(target)
        .zip(mask)
        .map(|((&p, &t), &m)| {
            if m {
                let r = p - t;
                loss += r * r * scale;
                2.0 * r * scale
            } else {
                0.0
            }
        })
        .collect();
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn activation_values() {
        assert_eq!(Activation::Sigmoid.apply(0.0), 0.5);
        assert_eq!(Activation::Elu.apply(0.0), 0.0);
        assert_eq!(Activation::Elu.apply(2.5), 2.5);
        assert!((Activation::Elu.apply(-1.0) - (-1.0f64).exp_m1()).abs() < 1e-15);
        assert!(Activation::Elu.apply(-1e-9).abs() < 1e-8);
        assert_eq!(Activation::Elu.derivative(0.0, 0.0), 1.0);
        for z in [-3.0, -0.5, 0.0, 0.7, 4.0] {
            for act in [Activation::Sigmoid, Activation::Elu, Activation::Identity] {
                let h = 1e-6;
                let fd = (act.apply(z + h) - act.apply(z - h)) / (2.0 * h);
                assert!((act.derivative(z, act.apply(z)) - fd).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn glorot_bounds_and_determinism() {
        let p = LayerParams::glorot(10, 16, Activation::Sigmoid, 3, 0);
        let bound = (6.0f64 / 26.0).sqrt();
        assert!(p.weight.data().iter().all(|w| w.abs() <= bound));
        assert!(p.bias.iter().all(|&b| b == 0.0));
        assert_eq!(p, LayerParams::glorot(10, 16, Activation::Sigmoid, 3, 0));
        assert_ne!(p, LayerParams::glorot(10, 16, Activation::Sigmoid, 3, 1));
    }

    #[test]
    fn identity_convolution_returns_input() {
        let x = DenseMatrix::from_rows(&[vec![1.0, -2.0], vec![0.5, 3.0], vec![4.0, 0.0]]).unwrap();
        let p = LayerParams {
            weight: DenseMatrix::identity(2),
            bias: vec![0.0; 2],
            activation: Activation::Identity,
        };
        assert_eq!(
            graph_conv_forward(&DenseMatrix::identity(3), &x, &p).unwrap(),
            x
        );
    }

    #[test]
    fn zero_input_gives_activated_bias() {
        let p = LayerParams {
            weight: DenseMatrix::from_rows(&[vec![1.0, 2.0]]).unwrap(),
            bias: vec![0.3, -1.0],
            activation: Activation::Sigmoid,
        };
        let a = DenseMatrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let out = graph_conv_forward(&a, &DenseMatrix::zeros(2, 1), &p).unwrap();
        for i in 0..2 {
            assert_eq!(
                out.row(i),
                &[
                    Activation::Sigmoid.apply(0.3),
                    Activation::Sigmoid.apply(-1.0)
                ]
            );
        }
    }

    #[test]
    fn shape_errors() {
        let p = LayerParams::zeros(3, 2, Activation::Identity);
        let a = DenseMatrix::identity(2);
        assert!(graph_conv_forward(&a, &DenseMatrix::zeros(2, 2), &p).is_err());
        assert!(
            graph_conv_forward(&DenseMatrix::zeros(2, 3), &DenseMatrix::zeros(2, 3), &p).is_err()
        );
        assert!(masked_mse(&[1.0], &[1.0, 2.0], &[true]).is_err());
        assert!(masked_mse(&[1.0], &[1.0], &[false]).is_err());
    }

    #[test]
    fn single_sample_linear_gradient() {
        // y = x·w + b, L = (y - t)^2, dL/dw = 2 x (y - t)
        let x = DenseMatrix::from_rows(&[vec![1.5, -2.0, 0.25]]).unwrap();
        let p = LayerParams {
            weight: DenseMatrix::from_rows(&[vec![0.2], vec![0.1], vec![-0.4]]).unwrap(),
            bias: vec![0.05],
            activation: Activation::Identity,
        };
        let cache = linear_forward(Features::Dense(&x), 1, &p).unwrap();
        let y = cache.output.get(0, 0);
        let (_, d) = masked_mse(&[y], &[1.0], &[true]).unwrap();
        let d = DenseMatrix::from_vec(1, 1, d).unwrap();
        let (grads, dx) = linear_backward(Features::Dense(&x), &p, &cache, &d, true).unwrap();
        for j in 0..3 {
            assert_eq!(grads.weight.get(j, 0), 2.0 * x.get(0, j) * (y - 1.0));
        }
        assert_eq!(grads.bias, vec![2.0 * (y - 1.0)]);
        assert_eq!(dx.unwrap().get(0, 2), 2.0 * (y - 1.0) * -0.4);
    }

    #[test]
    fn masked_mse_ignores_unmasked_rows() {
        let (loss, grad) =
            masked_mse(&[1.0, 5.0, 2.0], &[0.0, 0.0, 4.0], &[true, false, true]).unwrap();
        assert_eq!(loss, 2.5);
        assert_eq!(grad, vec![1.0, 0.0, -2.0]);
    }
}
