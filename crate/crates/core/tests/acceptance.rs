//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.
//!
//! Run alone with `cargo test --release -p lbm-gof --test acceptance`.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::*;
use lbm_gof::experiments::{
    run, ExperimentPlan, RealizableCell, Scale, Study, StudyReport, Summary, KS_CRITICAL_1PCT,
};
use lbm_gof::rng::derive_seed;
use lbm_gof::spectral::largest_gram_eigenvalue;
use lbm_gof::{
    block_params, estimate, generate, presets, tw1_upper_quantile, BlockStructure, Family, GeneratorSpec,
    SpectralConfig,
};
use nalgebra::DMatrix;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn realizable_cell(family: Family, seed: u64) -> RealizableCell {
    let mut plan = ExperimentPlan::preset(Study::Realizable, family, Scale::Desk, seed);
    plan.size_grid = vec![(1500, 1125)];
    plan.trials = 300;
    let report = run(&plan).expect("plan is valid");
    let Summary::Realizable(mut sum) = report.summary else {
        unreachable!()
    };
    sum.cells.remove(0)
}

fn ratio(cell: &RealizableCell, alpha: f64) -> f64 {
    cell.exceedance
        .iter()
        .find(|e| e.alpha == alpha)
        .and_then(|e| e.ratio)
        .unwrap_or(f64::NAN)
}

fn criterion_1(gaussian: &RealizableCell) -> Outcome {
    let checks = [(0.01, 0.015), (0.05, 0.03), (0.1, 0.03)];
    let pass = gaussian.failed == 0
        && checks
            .iter()
            .all(|&(alpha, tol)| (ratio(gaussian, alpha) - alpha).abs() <= tol);
    let detail = checks
        .iter()
        .map(|&(alpha, tol)| format!("alpha={alpha}: {:.4} (tol {tol})", ratio(gaussian, alpha)))
        .collect::<Vec<_>>()
        .join(", ");
    outcome(pass, format!("{detail}; {} valid, {} failed trials", gaussian.valid, gaussian.failed))
}

fn criterion_2(cells: &[(Family, &RealizableCell)]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (family, cell) in cells {
        let d = cell.ks.map_or(f64::NAN, |k| k.d_sqrt_r);
        pass &= d < KS_CRITICAL_1PCT && cell.failed == 0;
        parts.push(format!("{family}: D*sqrt(r)={d:.4}"));
    }
    outcome(pass, format!("{} (limit {KS_CRITICAL_1PCT})", parts.join(", ")))
}

fn criterion_3() -> Outcome {
    let mut plan = ExperimentPlan::preset(Study::Unrealizable, Family::Gaussian, Scale::Desk, 3003);
    plan.size_grid = (1..=6).map(|i| (200 * i, 150 * i)).collect();
    plan.trials = 100;
    plan.hypotheses = vec![(1, 1)];
    let report = run(&plan).expect("plan is valid");
    let Summary::Unrealizable(sum) = report.summary else {
        unreachable!()
    };
    let series = &sum.series[0];
    let slope = series.loglog_slope.unwrap_or(f64::NAN);
    let flat = series.flatness_ratio.unwrap_or(f64::NAN);
    let failed: usize = series.cells.iter().map(|c| c.failed).sum();
    let pass = (1.5..=1.85).contains(&slope) && flat < 2.0 && failed == 0;
    outcome(
        pass,
        format!("slope={slope:.4} (range [1.5, 1.85]), max/min of mean T/n^(5/3) over i=3..6 = {flat:.4} (< 2)"),
    )
}

fn accuracy(report: &StudyReport, t: u32, n: usize) -> f64 {
    let Summary::Accuracy(sum) = &report.summary else {
        unreachable!()
    };
    sum.cells.iter().find(|c| c.t == t && c.n == n).map_or(f64::NAN, |c| c.accuracy)
}

fn criterion_4() -> Outcome {
    let mut plan = ExperimentPlan::preset(Study::Accuracy, Family::Gaussian, Scale::Desk, 4004);
    plan.alpha = 0.01;
    plan.trials = 200;
    plan.size_grid = vec![(400, 300)];
    plan.t_grid = vec![0];
    let large = accuracy(&run(&plan).expect("plan is valid"), 0, 400);

    plan.size_grid = vec![(120, 90)];
    plan.t_grid = vec![0, 6];
    let report = run(&plan).expect("plan is valid");
    let (t0, t6) = (accuracy(&report, 0, 120), accuracy(&report, 6, 120));
    outcome(
        large >= 0.9 && t6 < t0,
        format!("accuracy at 400x300, t=0: {large:.3} (>= 0.9); at 120x90: t=0 {t0:.3}, t=6 {t6:.3} (t=6 strictly lower)"),
    )
}

fn criterion_5() -> Outcome {
    let refs = [(0.01, 2.02345), (0.05, 0.97931), (0.1, 0.45014)];
    let mut pass = true;
    let mut parts = Vec::new();
    for (alpha, want) in refs {
        let got = tw1_upper_quantile(alpha).unwrap_or(f64::NAN);
        pass &= (got - want).abs() <= 2e-3;
        parts.push(format!("t({alpha})={got:.5} vs {want}"));
    }
    outcome(pass, format!("{} (tol 2e-3)", parts.join(", ")))
}

fn criterion_6() -> Outcome {
    let cfg = SpectralConfig::default();
    let matrices: Vec<_> = (0..50).map(|seed| gaussian_matrix(6000 + seed, 20, 15)).collect();
    let start = Instant::now();
    let got: Vec<f64> = matrices
        .iter()
        .map(|z| largest_gram_eigenvalue(z.view(), &cfg).unwrap_or(f64::NAN))
        .collect();
    let elapsed = start.elapsed().as_secs_f64();
    let worst = matrices
        .iter()
        .zip(&got)
        .map(|(z, &g)| {
            let m = DMatrix::from_fn(20, 15, |i, j| z[[i, j]]);
            let top = (m.transpose() * &m)
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
            rel_err(g, top)
        })
        .fold(0.0f64, f64::max);
    outcome(
        worst < 1e-8 && elapsed < 1.0,
        format!("max relative error {worst:.2e} (< 1e-8), solver time {elapsed:.4}s (< 1s)"),
    )
}

/// Labels covering every cluster at least twice, so no block is a single entry.
fn roomy_labels(seed: u64, stream: u64, len: usize, k: usize) -> Vec<usize> {
    let mut l = labels(seed, stream, len - k, k);
    l.extend(0..k);
    let perm = permutation(seed, stream + 10, len);
    perm.into_iter().map(|i| l[i]).collect()
}

fn criterion_7() -> Outcome {
    let (mut worst_mean, mut worst_rms) = (0.0f64, 0.0f64);
    let mut errors = 0;
    for seed in 0..100u64 {
        let n = 10 + (seed as usize * 7) % 50;
        let p = 8 + (seed as usize * 11) % 40;
        let (k, h) = (1 + seed as usize % 5, 1 + (seed as usize / 5) % 4);
        let scale = 10f64.powi((seed % 7) as i32 - 3);
        let m = observed(7000 + seed, n, p).affine(scale, 100.0 * scale).unwrap();
        let st = BlockStructure::new(roomy_labels(seed, 1, n, k), roomy_labels(seed, 2, p, h), k, h).unwrap();
        let Ok(est) = estimate(&m, &st) else {
            errors += 1;
            continue;
        };
        let z = &est.normalized.data;
        let mut sum = vec![0.0; k * h];
        let mut sq = vec![0.0; k * h];
        let mut cnt = vec![0.0; k * h];
        for ((i, j), &v) in z.indexed_iter() {
            let b = st.row_assign()[i] * h + st.col_assign()[j];
            sum[b] += v;
            sq[b] += v * v;
            cnt[b] += 1.0;
        }
        for b in 0..k * h {
            worst_mean = worst_mean.max((sum[b] / cnt[b]).abs());
            worst_rms = worst_rms.max(((sq[b] / cnt[b]).sqrt() - 1.0).abs());
        }
    }
    outcome(
        errors == 0 && worst_mean < 1e-10 && worst_rms < 1e-10,
        format!("worst |block mean| {worst_mean:.2e}, worst |RMS - 1| {worst_rms:.2e} (< 1e-10), {errors} estimation errors"),
    )
}

fn criterion_8() -> Outcome {
    let stds = presets::paper_4x3_stds();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut medians = Vec::new();
    for i in 1..=10usize {
        let (m, p) = (300 * i, 225 * i);
        let mut errs: Vec<f64> = (0..50u64)
            .map(|trial| {
                let spec = GeneratorSpec {
                    family: Family::Gaussian,
                    params: presets::paper_4x3(Family::Gaussian),
                    n: m,
                    p,
                    seed: derive_seed(8008, &[m as u64, trial]),
                };
                let (a, truth) = generate(&spec).expect("valid spec");
                let est = block_params(&a, &truth).expect("true structure fits");
                (&est.stds - &stds).mapv(f64::abs).fold(0.0f64, |acc, &x| acc.max(x))
            })
            .collect();
        errs.sort_by(f64::total_cmp);
        let median = 0.5 * (errs[24] + errs[25]);
        medians.push(format!("{median:.2e}"));
        xs.push((m as f64).ln());
        ys.push(median.ln());
    }
    let (mx, my) = (xs.iter().sum::<f64>() / 10.0, ys.iter().sum::<f64>() / 10.0);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    outcome(
        (-1.25..=-0.75).contains(&slope),
        format!("slope of log median max|S_hat - S| on log m = {slope:.4} (range [-1.25, -0.75]); medians {}", medians.join(" ")),
    )
}

fn criterion_9() -> Outcome {
    let mut all_equal = true;
    let mut parts = Vec::new();
    for (study, family) in [
        (Study::Realizable, Family::Gaussian),
        (Study::Unrealizable, Family::Bernoulli),
        (Study::Accuracy, Family::Poisson),
    ] {
        let mut plan = ExperimentPlan::preset(study, family, Scale::Desk, 9009);
        plan.size_grid = vec![(120, 90), (240, 180)];
        plan.trials = 4;
        if study == Study::Accuracy {
            plan.t_grid = vec![0, 6];
        }
        let a = run(&plan).and_then(|r| r.to_json()).expect("plan is valid");
        let b = run(&plan).and_then(|r| r.to_json()).expect("plan is valid");
        all_equal &= a == b;
        parts.push(format!("{study}: {} bytes {}", a.len(), if a == b { "identical" } else { "DIFFER" }));
    }
    outcome(all_equal, parts.join(", "))
}

fn main() -> ExitCode {
    let started = Instant::now();
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut report = |id: usize, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        eprintln!("running criterion {id} ({name})...");
        let t = Instant::now();
        let o = f();
        println!(
            "criterion {id} [{}] {name}: {} [{:.0}s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
        results.push((id, name, o));
    };

    report(5, "TW1 quantile fidelity", &mut criterion_5);
    report(6, "spectral oracle equivalence", &mut criterion_6);
    report(7, "normalization exactness", &mut criterion_7);
    report(9, "determinism", &mut criterion_9);
    report(8, "block std error scaling", &mut criterion_8);
    report(3, "unrealizable growth exponent", &mut criterion_3);
    report(4, "selection accuracy", &mut criterion_4);

    eprintln!("simulating 300 trials at 1500x1125 for each family...");
    let gaussian = realizable_cell(Family::Gaussian, 1001);
    report(1, "type-I calibration", &mut || criterion_1(&gaussian));
    let bernoulli = realizable_cell(Family::Bernoulli, 2002);
    let poisson = realizable_cell(Family::Poisson, 2003);
    report(2, "TW1 convergence (KS)", &mut || {
        criterion_2(&[
            (Family::Gaussian, &gaussian),
            (Family::Bernoulli, &bernoulli),
            (Family::Poisson, &poisson),
        ])
    });

    results.sort_by_key(|r| r.0);
    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!("\nacceptance summary ({:.0}s):", started.elapsed().as_secs_f64());
    for (id, name, o) in &results {
        println!("  {id}. {} {name}", if o.pass { "PASS" } else { "FAIL" });
    }
    if failed.is_empty() {
        println!("all {} criteria passed", results.len());
        ExitCode::SUCCESS
    } else {
        println!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
