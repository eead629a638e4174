//! A small dense numeric kernel: matrices, graph-convolution and linear
//! layers with hand-written backward passes, masked MSE and ADAM.
//!
//! Propagation matrices are stored sparse since normalized De Bruijn
//! adjacencies are mostly zeros; parameters and activations are dense.

mod adam;
mod layers;
mod matrix;

pub use adam::Adam;
pub use layers::{
    conv_backward, conv_forward, graph_conv_forward, linear_backward, linear_forward, masked_mse,
    Activation, Features, LayerCache, LayerGrads, LayerParams,
};
pub use matrix::{normalize_adjacency, normalize_sparse, DenseMatrix, SparseMatrix};
