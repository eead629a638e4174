//! Model fixtures, a finite-difference gradient checker and a straight-line
//! forward pass built from nested `Vec`s.

use tempora::debruijn::{build_debruijn_orders, DeBruijnGraph};
use tempora::graph::TemporalGraph;
use tempora::models::{Aggregation, DbgnnModel, Model, Registry, WindowGraphs};
use tempora::nn::{masked_mse, Activation, LayerParams};
use tempora::paths::EventGraph;

pub struct Fixture {
    pub graph: TemporalGraph,
    pub dbgs: Vec<DeBruijnGraph>,
    pub registry: Registry,
    pub window: WindowGraphs,
    pub target: Vec<f64>,
}

/// Five nodes, two De Bruijn orders, targets far from any initial output.
pub fn five_nodes() -> Fixture {
    let obs = [
        ("a", "b", 1.0),
        ("b", "c", 2.0),
        ("b", "e", 2.0),
        ("c", "d", 3.0),
        ("e", "c", 3.0),
        ("c", "a", 4.0),
        ("d", "e", 5.0),
        ("a", "c", 6.0),
        ("c", "e", 7.0),
        ("e", "b", 8.0),
    ];
    let graph = TemporalGraph::from_observations(&obs, true).unwrap();
    let dbgs = build_debruijn_orders(&EventGraph::new(&graph, 2.0).unwrap(), 2).unwrap();
    let registry = Registry::build(graph.node_count(), &[&dbgs]).unwrap();
    let window = WindowGraphs::new(&registry, &dbgs, &graph, Aggregation::Mean).unwrap();
    Fixture {
        graph,
        dbgs,
        registry,
        window,
        target: vec![1.0, -0.5, 2.0, 0.3, 1.5],
    }
}

fn loss<M: Model>(model: &M, f: &Fixture) -> f64 {
    let pred = model.forward(&f.window).unwrap();
    masked_mse(&pred, &f.target, &f.window.active).unwrap().0
}

/// Largest relative error between analytic gradients and central finite
/// differences with step `h`, over every weight and bias.
pub fn max_gradient_error<M: Model + Clone>(model: &M, f: &Fixture, h: f64) -> f64 {
    let (_, grads, _) = model
        .loss_and_grads(&f.window, &f.target, &f.window.active)
        .unwrap();
    let mut worst: f64 = 0.0;
    let layer_count = model.layers().len();
    for layer in 0..layer_count {
        let p = model.layers()[layer];
        let (n_weights, n_bias) = (p.weight.data().len(), p.bias.len());
        for idx in 0..n_weights + n_bias {
            let analytic = if idx < n_weights {
                grads[layer].weight.data()[idx]
            } else {
                grads[layer].bias[idx - n_weights]
            };
            let probe = |delta: f64| {
                let mut m = model.clone();
                let p = &mut m.layers_mut()[layer];
                if idx < n_weights {
                    p.weight.data_mut()[idx] += delta;
                } else {
                    p.bias[idx - n_weights] += delta;
                }
                loss(&m, f)
            };
            let numeric = (probe(h) - probe(-h)) / (2.0 * h);
            let scale = analytic.abs().max(numeric.abs());
            if scale > 0.0 {
                worst = worst.max((analytic - numeric).abs() / scale);
            }
        }
    }
    worst
}

pub type Mat = Vec<Vec<f64>>;

fn mat_mul(a: &Mat, b: &Mat) -> Mat {
    let inner = b.len();
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| (0..inner).map(|k| row[k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

fn weights(p: &LayerParams) -> Mat {
    (0..p.weight.rows())
        .map(|i| p.weight.row(i).to_vec())
        .collect()
}

fn dense_layer(x: &Mat, p: &LayerParams) -> Mat {
    mat_mul(x, &weights(p))
        .into_iter()
        .map(|row| {
            row.iter()
                .zip(&p.bias)
                .map(|(z, b)| act(p.activation, z + b))
                .collect()
        })
        .collect()
}

fn act(a: Activation, z: f64) -> f64 {
    match a {
        Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
        Activation::Elu => {
            if z >= 0.0 {
                z
            } else {
                z.exp() - 1.0
            }
        }
        Activation::Identity => z,
    }
}

/// `D^-1/2 (A + I) D^-1/2` with receiver rows, straight from edge weights.
pub fn renormalize(n: usize, edges: &[(usize, usize, f64)]) -> Mat {
    let mut a = vec![vec![0.0; n]; n];
    for &(from, to, w) in edges {
        a[to][from] += w;
    }
    for (i, row) in a.iter_mut().enumerate() {
        row[i] += 1.0;
    }
    let d: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    (0..n)
        .map(|i| (0..n).map(|j| a[i][j] / (d[i] * d[j]).sqrt()).collect())
        .collect()
}

/// DBGNN forward on one window computed with nested loops.
pub fn reference_dbgnn(m: &DbgnnModel, dbgs: &[DeBruijnGraph], n: usize) -> Vec<f64> {
    let reg = &m.registry;
    let mut sums = vec![vec![0.0; 16]; n];
    let mut counts = vec![0usize; n];
    for (k, dbg) in dbgs.iter().enumerate() {
        let size = reg.len(k + 1);
        let slot = |i: usize| reg.index_of(&dbg.nodes()[i]).unwrap();
        let edges: Vec<(usize, usize, f64)> = dbg
            .edges()
            .iter()
            .map(|(&(u, v), &w)| (slot(u), slot(v), w as f64))
            .collect();
        let a_hat = renormalize(size, &edges);
        // one-hot input: Â · I · W = Â · W
        let hidden = dense_layer(&a_hat, &m.convs[k]);
        for i in 0..dbg.node_count() {
            let v = dbg.bipartite(i);
            counts[v] += 1;
            for (s, h) in sums[v].iter_mut().zip(&hidden[slot(i)]) {
                *s += h;
            }
        }
    }
    let mean: Mat = sums
        .into_iter()
        .zip(&counts)
        .map(|(row, &c)| row.into_iter().map(|x| x / c as f64).collect())
        .collect();
    let emb = dense_layer(&mean, &m.bipartite);
    dense_layer(&emb, &m.head)
        .into_iter()
        .map(|r| r[0])
        .collect()
}
