//! Isolation forest anomaly scores.

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rng;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Average path length of an unsuccessful binary-search-tree lookup among `n` points.
pub fn average_path_length(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let n = n as f64;
            2.0 * ((n - 1.0).ln() + EULER_GAMMA) - 2.0 * (n - 1.0) / n
        }
    }
}

enum Node {
    Leaf { size: usize },
    Split { feature: usize, value: f64, left: Box<Node>, right: Box<Node> },
}

fn build(points: &[Vec<f64>], idx: Vec<usize>, depth: usize, limit: usize, rng: &mut ChaCha8Rng) -> Node {
    if depth >= limit || idx.len() <= 1 {
        return Node::Leaf { size: idx.len() };
    }
    let dim = points[idx[0]].len();
    let splittable: Vec<(usize, f64, f64)> = (0..dim)
        .filter_map(|f| {
            let (lo, hi) = idx
                .iter()
                .map(|i| points[*i][f])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            (hi > lo).then_some((f, lo, hi))
        })
        .collect();
    if splittable.is_empty() {
        return Node::Leaf { size: idx.len() };
    }
    let (feature, lo, hi) = splittable[rng.gen_range(0..splittable.len())];
    let value = rng.gen_range(lo..hi);
    let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|i| points[*i][feature] < value);
    Node::Split {
        feature,
        value,
        left: Box::new(build(points, l, depth + 1, limit, rng)),
        right: Box::new(build(points, r, depth + 1, limit, rng)),
    }
}

fn path_length(node: &Node, x: &[f64], depth: usize) -> f64 {
    match node {
        Node::Leaf { size } => depth as f64 + average_path_length(*size),
        Node::Split { feature, value, left, right } => {
            if x[*feature] < *value {
                path_length(left, x, depth + 1)
            } else {
                path_length(right, x, depth + 1)
            }
        }
    }
}

/// Scores `2^(−E[h(x)] / c(ψ))` in (0, 1]; higher means more anomalous.
pub fn isolation_forest(points: &[Vec<f64>], n_trees: usize, subsample: usize, seed: u64) -> Result<Vec<f64>> {
    if points.len() < 2 {
        return Err(Error::InsufficientData("isolation forest needs at least 2 points".into()));
    }
    if n_trees == 0 || subsample < 2 {
        return Err(Error::InvalidParameter("n_trees ≥ 1 and subsample ≥ 2 required".into()));
    }
    let psi = subsample.min(points.len());
    let limit = (psi as f64).log2().ceil() as usize;
    let mut total = vec![0.0; points.len()];
    for t in 0..n_trees {
        let mut rng = rng::indexed_stream(seed, "iforest", t as u64);
        let idx = sample(&mut rng, points.len(), psi).into_vec();
        let tree = build(points, idx, 0, limit, &mut rng);
        for (acc, p) in total.iter_mut().zip(points) {
            *acc += path_length(&tree, p, 0);
        }
    }
    let c = average_path_length(psi);
    Ok(total
        .into_iter()
        .map(|h| 2f64.powf(-(h / n_trees as f64) / c))
        .collect())
}
