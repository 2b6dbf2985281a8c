//! Statistical checks that need many simulated matrices. Each test uses fixed
//! seeds, so outcomes are reproducible; thresholds leave room for Monte-Carlo noise.

mod common;

use common::*;
use lbm_gof::experiments::{
    ks_statistic, run, ExperimentPlan, Scale, Study, Summary, TRUE_CLUSTERS,
};
use lbm_gof::gof::{gof_test, sequential_select, TestConfig};
use lbm_gof::spectral::largest_gram_eigenvalue;
use lbm_gof::{
    align_labels, block_params, generate, presets, scaling_constants, tw1_cdf, tw1_upper_quantile,
    ward_cocluster, BlockParams, ClusteringRequest, Family, GeneratorSpec, SpectralConfig,
};
use ndarray::array;
use statrs::distribution::{ContinuousCDF, Normal};

fn preset_spec(family: Family, n: usize, p: usize, seed: u64) -> GeneratorSpec {
    GeneratorSpec {
        family,
        params: presets::paper_4x3(family),
        n,
        p,
        seed,
    }
}

/// Scaled largest Gram eigenvalue of an n×p standard Gaussian matrix.
fn null_statistic(seed: u64, n: usize, p: usize) -> f64 {
    let z = gaussian_matrix(seed, n, p);
    let lambda = largest_gram_eigenvalue(z.view(), &SpectralConfig::default()).unwrap();
    let s = scaling_constants(n, p);
    (lambda - s.a) / s.b
}

/// At 400×300 the statistic still sits slightly left of its limit (the shift
/// decays like n^(-2/3)), so the band allows a few points of bias.
#[test]
fn median_quantile_matches_simulated_exceedance() {
    let t = tw1_upper_quantile(0.5).unwrap();
    let r = 5000;
    let above = (0..r).filter(|&seed| null_statistic(seed, 400, 300) >= t).count();
    let rate = above as f64 / r as f64;
    assert!((rate - 0.5).abs() <= 0.05, "exceedance {rate}");
}

#[test]
fn null_statistic_is_tracy_widom_distributed() {
    let samples: Vec<f64> = (0..2000).map(|seed| null_statistic(10_000 + seed, 600, 450)).collect();
    let ks = ks_statistic(&samples, tw1_cdf).unwrap();
    assert!(ks.d_sqrt_r < 1.95, "D sqrt(r) = {}", ks.d_sqrt_r);
}

#[test]
fn bernoulli_and_poisson_block_moments() {
    for seed in 0..5 {
        let (m, truth) = generate(&preset_spec(Family::Bernoulli, 300, 225, seed)).unwrap();
        let est = block_params(&m, &truth).unwrap();
        let b = presets::paper_4x3_means(Family::Bernoulli);
        for ((k, h), &mean) in est.means.indexed_iter() {
            let count = (truth.row_sizes()[k] * truth.col_sizes()[h]) as f64;
            let bkh = b[[k, h]];
            assert!((mean - bkh).abs() <= 4.0 * (bkh * (1.0 - bkh) / count).sqrt(), "bernoulli block ({k},{h})");
        }

        let (m, truth) = generate(&preset_spec(Family::Poisson, 300, 225, seed)).unwrap();
        let est = block_params(&m, &truth).unwrap();
        let b = presets::paper_4x3_means(Family::Poisson);
        for ((k, h), &std) in est.stds.indexed_iter() {
            let count = (truth.row_sizes()[k] * truth.col_sizes()[h]) as f64;
            let lam = b[[k, h]];
            // Var of the sample variance is (mu4 - sigma^4) / N = (lam + 2 lam^2) / N.
            let band = 4.0 * ((lam + 2.0 * lam * lam) / count).sqrt();
            assert!((std * std - lam).abs() <= band, "poisson block ({k},{h})");
            assert!((est.means[[k, h]] - lam).abs() <= 4.0 * (lam / count).sqrt());
        }
    }
}

#[test]
fn block_mean_errors_are_standard_normal() {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let b = presets::paper_4x3_means(Family::Gaussian);
    let s = presets::paper_4x3_stds();
    let mut z = vec![Vec::new(); 12];
    for seed in 0..100 {
        let (m, truth) = generate(&preset_spec(Family::Gaussian, 300, 225, seed)).unwrap();
        let est = block_params(&m, &truth).unwrap();
        for ((k, h), &mean) in est.means.indexed_iter() {
            let count = (truth.row_sizes()[k] * truth.col_sizes()[h]) as f64;
            z[k * 3 + h].push((mean - b[[k, h]]) / (s[[k, h]] / count.sqrt()));
        }
    }
    for (block, zs) in z.iter().enumerate() {
        let ks = ks_statistic(zs, |x| normal.cdf(x)).unwrap();
        assert!(ks.d_sqrt_r < 1.95, "block {block}: {}", ks.d_sqrt_r);
    }
}

#[test]
fn ward_recovers_the_true_structure() {
    let mut exact = 0;
    for seed in 0..100 {
        let (m, truth) = generate(&preset_spec(Family::Gaussian, 1500, 1125, seed)).unwrap();
        let est = ward_cocluster(&ClusteringRequest { matrix: &m, k0: 4, h0: 3 }).unwrap();
        if align_labels(&est, &truth).unwrap().exact() {
            exact += 1;
        }
    }
    assert!(exact >= 99, "{exact}/100 recovered");
}

#[test]
fn block_estimates_are_accurate_at_the_largest_size() {
    let b = presets::paper_4x3_means(Family::Gaussian);
    let s = presets::paper_4x3_stds();
    for seed in 0..100 {
        let (m, truth) = generate(&preset_spec(Family::Gaussian, 3000, 2250, seed)).unwrap();
        let est = block_params(&m, &truth).unwrap();
        let mean_err = (&est.means - &b).mapv(f64::abs).fold(0.0f64, |a, &x| a.max(x));
        let std_err = (&est.stds - &s).mapv(f64::abs).fold(0.0f64, |a, &x| a.max(x));
        assert!(mean_err < 0.02 && std_err < 0.02, "seed {seed}: {mean_err} {std_err}");
    }
}

#[test]
fn correct_hypothesis_is_kept_and_missing_clusters_are_rejected() {
    let cfg = TestConfig::default();
    let trials = 300;
    let (mut kept, mut rejected) = (0, 0);
    for seed in 0..trials {
        let (m, _) = generate(&preset_spec(Family::Gaussian, 2000, 1500, 50_000 + seed)).unwrap();
        if !gof_test(&m, 4, 3, &cfg).unwrap().reject {
            kept += 1;
        }
        if gof_test(&m, 3, 3, &cfg).unwrap().reject {
            rejected += 1;
        }
    }
    assert!(kept as f64 >= 0.97 * trials as f64, "(4,3) kept in {kept}/{trials}");
    assert!(rejected as f64 >= 0.99 * trials as f64, "(3,3) rejected in {rejected}/{trials}");
}

#[test]
fn single_block_matrices_select_one_by_one_immediately() {
    let params = BlockParams::new(array![[0.5]], array![[1.0]]).unwrap();
    let cfg = TestConfig::default();
    let trials = 100;
    let first = (0..trials)
        .filter(|&seed| {
            let spec = GeneratorSpec {
                family: Family::Gaussian,
                params: params.clone(),
                n: 500,
                p: 400,
                seed,
            };
            let (m, _) = generate(&spec).unwrap();
            let trace = sequential_select(&m, &cfg).unwrap();
            trace.selected == Some((1, 1)) && trace.steps.len() == 1
        })
        .count();
    assert!(first >= 95, "{first}/{trials}");
}

#[test]
fn unrealizable_statistics_dwarf_the_critical_value() {
    let mut plan = ExperimentPlan::preset(Study::Unrealizable, Family::Gaussian, Scale::Desk, 17);
    plan.trials = 20;
    let report = run(&plan).unwrap();
    let Summary::Unrealizable(sum) = report.summary else { panic!("wrong summary") };
    let q = tw1_upper_quantile(0.01).unwrap();
    for series in &sum.series {
        for cell in &series.cells {
            let mean = cell.mean_t.unwrap();
            assert!(mean >= 100.0 * q, "({},{}) at n={}: {mean}", series.k0, series.h0, cell.n);
        }
    }
}

#[test]
fn accuracy_decreases_as_block_means_converge() {
    let mut plan = ExperimentPlan::preset(Study::Accuracy, Family::Gaussian, Scale::Desk, 23);
    plan.size_grid = vec![(40, 30), (400, 300)];
    plan.t_grid = vec![0, 3, 6, 9];
    plan.trials = 50;
    let report = run(&plan).unwrap();
    let Summary::Accuracy(sum) = report.summary else { panic!("wrong summary") };
    let acc = |t: u32, n: usize| sum.cells.iter().find(|c| c.t == t && c.n == n).unwrap().accuracy;
    for pair in plan.t_grid.windows(2) {
        assert!(acc(pair[1], 400) <= acc(pair[0], 400) + 0.05, "t={} vs t={}", pair[1], pair[0]);
    }
    assert!(acc(9, 40) < acc(0, 40));
    assert_eq!(TRUE_CLUSTERS, (4, 3));
}

/// The published cell: 1000 trials at 3000×2250. Hours on one core; run with
/// `cargo test --release -- --ignored` when replicating at full scale.
#[test]
#[ignore]
fn full_scale_exceedance_at_five_percent() {
    let mut plan = ExperimentPlan::preset(Study::Realizable, Family::Gaussian, Scale::Paper, 2024);
    plan.size_grid = vec![(3000, 2250)];
    let report = run(&plan).unwrap();
    let Summary::Realizable(sum) = report.summary else { panic!("wrong summary") };
    let rate = sum.cells[0].exceedance.iter().find(|e| e.alpha == 0.05).unwrap().ratio.unwrap();
    assert!((rate - 0.05).abs() <= 0.02, "{rate}");
}
