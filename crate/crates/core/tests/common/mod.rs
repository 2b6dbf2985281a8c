#![allow(dead_code)]

use lbm_gof::rng::stream_rng;
use lbm_gof::{BlockStructure, ObservedMatrix};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn gaussian_matrix(seed: u64, n: usize, p: usize) -> Array2<f64> {
    let mut rng = stream_rng(seed, 100);
    Array2::from_shape_fn((n, p), |_| StandardNormal.sample(&mut rng))
}

pub fn observed(seed: u64, n: usize, p: usize) -> ObservedMatrix {
    ObservedMatrix::new(gaussian_matrix(seed, n, p)).unwrap()
}

/// Random labels with every cluster present: a shuffled cover of 0..k padded uniformly.
pub fn labels(seed: u64, stream: u64, len: usize, k: usize) -> Vec<usize> {
    assert!(k <= len);
    let mut rng = stream_rng(seed, stream);
    let mut out: Vec<usize> = (0..k).chain((k..len).map(|_| rng.random_range(0..k))).collect();
    out.shuffle(&mut rng);
    out
}

pub fn structure(seed: u64, n: usize, p: usize, k: usize, h: usize) -> BlockStructure {
    BlockStructure::new(labels(seed, 200, n, k), labels(seed, 201, p, h), k, h).unwrap()
}

pub fn permutation(seed: u64, stream: u64, len: usize) -> Vec<usize> {
    let mut rng = stream_rng(seed, stream);
    let mut perm: Vec<usize> = (0..len).collect();
    perm.shuffle(&mut rng);
    perm
}

/// Relabels by order of first appearance so partitions can be compared directly.
pub fn canonical(labels: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|&g| {
            let next = map.len();
            *map.entry(g).or_insert(next)
        })
        .collect()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
