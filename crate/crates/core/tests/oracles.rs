mod common;

use common::*;
use lbm_gof::experiments::ks_statistic;
use lbm_gof::rng::stream_rng;
use lbm_gof::spectral::largest_gram_eigenvalue;
use lbm_gof::{align_labels, BlockStructure, SpectralConfig, Tw1Table};
use nalgebra::DMatrix;
use ndarray::Array2;
use rand::Rng;

fn dense_top_eigenvalue(z: &Array2<f64>) -> f64 {
    let (n, p) = z.dim();
    let m = DMatrix::from_fn(n, p, |i, j| z[[i, j]]);
    let gram = m.transpose() * &m;
    gram.symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn lanczos_matches_a_dense_eigensolver() {
    let cfg = SpectralConfig::default();
    for seed in 0..50 {
        let z = gaussian_matrix(seed, 20, 15);
        let got = largest_gram_eigenvalue(z.view(), &cfg).unwrap();
        let want = dense_top_eigenvalue(&z);
        assert!(rel_err(got, want) < 1e-8, "seed {seed}: {got} vs {want}");
    }
}

#[test]
fn lanczos_handles_wide_tall_and_low_rank_inputs() {
    let cfg = SpectralConfig::default();
    for (seed, (n, p)) in [(15, 20), (1, 7), (40, 2), (3, 60), (64, 64)].into_iter().enumerate() {
        let z = gaussian_matrix(seed as u64, n, p);
        let got = largest_gram_eigenvalue(z.view(), &cfg).unwrap();
        assert!(rel_err(got, dense_top_eigenvalue(&z)) < 1e-8, "{n}x{p}");
    }
    // Rank two: an outer-product sum.
    let u = gaussian_matrix(7, 30, 2);
    let v = gaussian_matrix(8, 2, 25);
    let z = u.dot(&v);
    let got = largest_gram_eigenvalue(z.view(), &cfg).unwrap();
    assert!(rel_err(got, dense_top_eigenvalue(&z)) < 1e-8);
    // Two nearly equal top singular values.
    let mut z = Array2::zeros((10, 10));
    z[[0, 0]] = 3.0;
    z[[1, 1]] = 3.0 * (1.0 - 1e-9);
    z[[2, 2]] = 1.0;
    let got = largest_gram_eigenvalue(z.view(), &cfg).unwrap();
    assert!(rel_err(got, 9.0) < 1e-8);
}

/// Mean and variance of TW1 from the literature (Prähofer-Spohn, Bornemann).
const TW1_MEAN: f64 = -1.206_533_574_582;
const TW1_VAR: f64 = 1.607_781_034_581;

#[test]
fn table_moments_match_published_values() {
    let table = Tw1Table::embedded();
    let (lo, hi) = (-10.0f64, 8.0f64);
    let steps = 180_000;
    let h = (hi - lo) / steps as f64;
    // E[X] = hi - int F and E[X^2] = hi^2 - int 2 s F on a support inside [lo, hi].
    let (mut int_f, mut int_sf) = (0.0, 0.0);
    for i in 0..=steps {
        let s = lo + h * i as f64;
        let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
        let f = table.cdf(s);
        int_f += w * f * h;
        int_sf += w * 2.0 * s * f * h;
    }
    let mean = hi - int_f;
    let var = hi * hi - int_sf - mean * mean;
    assert!((mean - TW1_MEAN).abs() < 1e-5, "mean {mean}");
    assert!((var - TW1_VAR).abs() < 1e-4, "variance {var}");
}

#[test]
fn ks_on_uniform_samples_follows_its_null_distribution() {
    let uniform = |x: f64| x.clamp(0.0, 1.0);
    let seeds = 200;
    let below = (0..seeds)
        .filter(|&seed| {
            let mut rng = stream_rng(seed, 0);
            let xs: Vec<f64> = (0..1000).map(|_| rng.random::<f64>()).collect();
            ks_statistic(&xs, uniform).unwrap().d_sqrt_r < 1.95
        })
        .count();
    assert!(below as f64 >= 0.95 * seeds as f64, "{below}/{seeds}");
}

#[test]
fn independent_random_labels_align_near_chance() {
    let (n, k) = (1000, 4);
    let mut total = 0.0;
    for seed in 0..20 {
        let a = BlockStructure::new(labels(seed, 1, n, k), labels(seed, 2, n, k), k, k).unwrap();
        let b = BlockStructure::new(labels(seed, 3, n, k), labels(seed, 4, n, k), k, k).unwrap();
        let al = align_labels(&a, &b).unwrap();
        assert!((al.agreement - 0.25).abs() < 0.05, "{}", al.agreement);
        total += al.row_agreement;
    }
    assert!((total / 20.0 - 0.25).abs() < 0.05);
}

#[test]
fn scaling_constant_values() {
    let s = lbm_gof::scaling_constants(1, 1);
    assert_eq!(s.a, 4.0);
    assert!((s.b - 2.0 * 2f64.cbrt()).abs() < 1e-14);
    let s = lbm_gof::scaling_constants(300, 225);
    assert!((s.a - 1044.615).abs() < 1e-3);
    assert!((s.b - 16.134).abs() < 1e-3);
    let big = lbm_gof::scaling_constants(3000, 2250);
    assert!(big.a / 5250.0 > 1.0);
    assert!((big.b / s.b - 10f64.cbrt()).abs() < 1e-12);
}
