mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use lbm_gof::experiments::{self, ExperimentPlan, Scale, Study, StudyReport};
use lbm_gof::{
    estimate, generate, gof_test_with_structure, interpolate_means, io, presets, sequential_select,
    BlockStructure, ClusteringRequest, Family, GeneratorSpec, SpectralConfig, TestConfig,
};

use config::{parse_list, parse_pairs, pick, ConfigFile};

const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "lbm-gof", version, about = "Goodness-of-fit test and cluster-number selection for latent block models")]
struct Cli {
    /// TOML file whose keys mirror the long flag names.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// error, warn, info, debug or trace.
    #[arg(long, global = true)]
    log_level: Option<String>,
    /// Worker threads for parallel work (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a matrix from a latent block model.
    Generate(GenerateArgs),
    /// Co-cluster a matrix with Ward's method.
    Cluster(ClusterArgs),
    /// Estimate block parameters and the standardized matrix.
    Estimate(EstimateArgs),
    /// Test one (K0, H0) hypothesis. Exit 0 = accept, 1 = reject.
    Test(TestArgs),
    /// Select (K0, H0) sequentially. Exit 0 = selected, 1 = exhausted.
    Select(SelectArgs),
    /// Run a Monte-Carlo study.
    Experiment(ExperimentArgs),
    /// Merge reports of disjoint trial ranges of one plan.
    Merge(MergeArgs),
}

#[derive(Args)]
struct SpectralArgs {
    /// Relative convergence tolerance of the eigenvalue solver.
    #[arg(long)]
    rel_tolerance: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
}

impl SpectralArgs {
    fn resolve(&self, file: &ConfigFile) -> SpectralConfig {
        let d = SpectralConfig::default();
        SpectralConfig {
            rel_tolerance: pick(self.rel_tolerance, file.rel_tolerance, d.rel_tolerance),
            max_iterations: pick(self.max_iterations, file.max_iterations, d.max_iterations),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    #[value(name = "paper-4x3")]
    Paper4x3,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    family: Option<String>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Mean shrinkage step in 0..=9.
    #[arg(long)]
    t: Option<u32>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Where to write the true block structure.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args)]
struct ClusterArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    h: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    structure: PathBuf,
    #[arg(long)]
    out_params: Option<PathBuf>,
    #[arg(long)]
    out_z: Option<PathBuf>,
}

#[derive(Args)]
struct TestArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    h: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Use this block structure instead of clustering.
    #[arg(long)]
    structure: Option<PathBuf>,
    #[command(flatten)]
    spectral: SpectralArgs,
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    alpha: Option<f64>,
    /// Largest K0 + H0 to test (default: 12, capped at min(n, p) + 1).
    #[arg(long)]
    l_max: Option<usize>,
    #[command(flatten)]
    spectral: SpectralArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum StudyArg {
    Realizable,
    Unrealizable,
    Accuracy,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(value_enum)]
    study: StudyArg,
    #[arg(long)]
    family: Option<String>,
    /// desk or paper.
    #[arg(long)]
    scale: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    /// Index of the first trial, for splitting a run across processes.
    #[arg(long)]
    first_trial: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Size grid override, e.g. `300x225,600x450`.
    #[arg(long)]
    sizes: Option<String>,
    /// Shrinkage steps override for the accuracy study, e.g. `0,3,6,9`.
    #[arg(long)]
    t_grid: Option<String>,
    /// Hypotheses override, e.g. `1x1,3x3`.
    #[arg(long)]
    hypotheses: Option<String>,
    #[arg(long)]
    l_max: Option<usize>,
    #[command(flatten)]
    spectral: SpectralArgs,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for plot-ready CSV files.
    #[arg(long)]
    csv_dir: Option<PathBuf>,
}

#[derive(Args)]
struct MergeArgs {
    #[arg(required = true)]
    parts: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    csv_dir: Option<PathBuf>,
}

#[derive(Serialize)]
struct Metadata {
    tool_version: &'static str,
    command: &'static str,
    config: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Serialize)]
struct Output<'a, T: Serialize> {
    metadata: Metadata,
    #[serde(flatten)]
    result: &'a T,
}

fn emit<T: Serialize>(
    command: &'static str,
    config: serde_json::Value,
    seed: Option<u64>,
    result: &T,
    path: Option<&Path>,
) -> Result<()> {
    let out = Output {
        metadata: Metadata {
            tool_version: TOOL_VERSION,
            command,
            config,
            seed,
        },
        result,
    };
    let mut text = serde_json::to_string_pretty(&out)?;
    text.push('\n');
    write_text(&text, path)
}

fn write_text(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn read_matrix(path: &Path) -> Result<lbm_gof::ObservedMatrix> {
    io::read_matrix_csv(path).with_context(|| format!("reading matrix {}", path.display()))
}

fn read_structure(path: &Path) -> Result<BlockStructure> {
    io::read_json(path).with_context(|| format!("reading block structure {}", path.display()))
}

fn required<T>(value: Option<T>, name: &str) -> Result<T> {
    value.with_context(|| format!("--{name} is required (on the command line or in the config file)"))
}

fn parse_family(flag: Option<String>, file: &ConfigFile) -> Result<Family> {
    let name = pick(flag, file.family.clone(), "gaussian".to_string());
    Ok(name.parse()?)
}

fn run_generate(a: GenerateArgs, file: &ConfigFile) -> Result<ExitCode> {
    let family = parse_family(a.family, file)?;
    if let Some(preset) = file.preset.as_deref().filter(|_| a.preset.is_none()) {
        if preset != "paper-4x3" {
            bail!("unknown preset '{preset}'");
        }
    }
    let t = pick(a.t, file.t, 0);
    if t > 9 {
        bail!("--t must be in 0..=9, got {t}");
    }
    let n = required(a.n.or(file.n), "n")?;
    let p = required(a.p.or(file.p), "p")?;
    let seed = pick(a.seed, file.seed, 0);
    let params = interpolate_means(&presets::paper_4x3(family), t, family.interpolation_center());
    let spec = GeneratorSpec {
        family,
        params,
        n,
        p,
        seed,
    };
    let (matrix, truth) = generate(&spec)?;
    io::write_matrix_csv(&a.out, matrix.view())
        .with_context(|| format!("writing {}", a.out.display()))?;
    let config = json!({ "family": family, "preset": "paper-4x3", "t": t, "n": n, "p": p, "seed": seed });
    if let Some(path) = &a.truth {
        emit("generate", config, Some(seed), &truth, Some(path))?;
    }
    tracing::info!(n, p, %family, t, seed, "matrix written to {}", a.out.display());
    Ok(ExitCode::SUCCESS)
}

fn run_cluster(a: ClusterArgs, file: &ConfigFile) -> Result<ExitCode> {
    let matrix = read_matrix(&a.input)?;
    let k0 = required(a.k.or(file.k), "k")?;
    let h0 = required(a.h.or(file.h), "h")?;
    let structure = lbm_gof::ward_cocluster(&ClusteringRequest {
        matrix: &matrix,
        k0,
        h0,
    })?;
    let config = json!({ "in": a.input, "k": k0, "h": h0 });
    emit("cluster", config, None, &structure, a.out.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

fn run_estimate(a: EstimateArgs) -> Result<ExitCode> {
    let matrix = read_matrix(&a.input)?;
    let structure = read_structure(&a.structure)?;
    let est = estimate(&matrix, &structure)?;
    if let Some(path) = &a.out_z {
        io::write_matrix_csv(path, est.normalized.data.view())
            .with_context(|| format!("writing {}", path.display()))?;
    }
    let config = json!({ "in": a.input, "structure": a.structure });
    emit("estimate", config, None, &est.params, a.out_params.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

fn test_config(alpha: f64, l_max: usize, spectral: SpectralConfig) -> TestConfig {
    TestConfig {
        alpha,
        l_max,
        spectral,
        ..TestConfig::default()
    }
}

fn run_test(a: TestArgs, file: &ConfigFile) -> Result<ExitCode> {
    let matrix = read_matrix(&a.input)?;
    let alpha = pick(a.alpha, file.alpha, lbm_gof::gof::DEFAULT_ALPHA);
    let spectral = a.spectral.resolve(file);
    let result = match &a.structure {
        Some(path) => {
            let structure = read_structure(path)?;
            structure.check_dims(matrix.n(), matrix.p())?;
            gof_test_with_structure(&matrix, &structure, alpha, &spectral)?
        }
        None => {
            let k0 = required(a.k.or(file.k), "k")?;
            let h0 = required(a.h.or(file.h), "h")?;
            let cfg = test_config(alpha, lbm_gof::gof::DEFAULT_L_MAX, spectral);
            lbm_gof::gof_test(&matrix, k0, h0, &cfg)?
        }
    };
    let config = json!({
        "in": a.input,
        "k": a.k.or(file.k),
        "h": a.h.or(file.h),
        "structure": a.structure,
        "alpha": alpha,
        "spectral": spectral,
    });
    emit("test", config, None, &result, None)?;
    Ok(if result.reject {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

fn run_select(a: SelectArgs, file: &ConfigFile) -> Result<ExitCode> {
    let matrix = read_matrix(&a.input)?;
    let alpha = pick(a.alpha, file.alpha, lbm_gof::gof::DEFAULT_ALPHA);
    let cap = matrix.n().min(matrix.p()) + 1;
    let l_max = pick(a.l_max, file.l_max, lbm_gof::gof::DEFAULT_L_MAX.min(cap));
    let spectral = a.spectral.resolve(file);
    let trace = sequential_select(&matrix, &test_config(alpha, l_max, spectral))?;
    let config = json!({ "in": a.input, "alpha": alpha, "l_max": l_max, "spectral": spectral });
    emit("select", config, None, &trace, None)?;
    Ok(if trace.selected.is_some() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn write_report(report: &StudyReport, out: Option<&Path>, csv_dir: Option<&Path>) -> Result<()> {
    write_text(&report.to_json()?, out)?;
    if let Some(dir) = csv_dir {
        let files = report
            .write_csv(dir)
            .with_context(|| format!("writing CSV files to {}", dir.display()))?;
        tracing::info!(count = files.len(), "CSV files written to {}", dir.display());
    }
    Ok(())
}

fn run_experiment(a: ExperimentArgs, file: &ConfigFile) -> Result<ExitCode> {
    let study = match a.study {
        StudyArg::Realizable => Study::Realizable,
        StudyArg::Unrealizable => Study::Unrealizable,
        StudyArg::Accuracy => Study::Accuracy,
    };
    let family = parse_family(a.family, file)?;
    let scale: Scale = pick(a.scale, file.scale.clone(), "desk".to_string()).parse()?;
    let seed = pick(a.seed, file.seed, 0);
    let mut plan = ExperimentPlan::preset(study, family, scale, seed);
    if let Some(trials) = a.trials.or(file.trials) {
        plan.trials = trials;
    }
    plan.first_trial = pick(a.first_trial, file.first_trial, 0);
    if let Some(alpha) = a.alpha.or(file.alpha) {
        plan.alpha = alpha;
    }
    if let Some(sizes) = a.sizes.as_deref().or(file.sizes.as_deref()) {
        plan.size_grid = parse_pairs(sizes)?;
    }
    if let Some(ts) = a.t_grid.as_deref().or(file.t_grid.as_deref()) {
        if study != Study::Accuracy {
            bail!("--t-grid only applies to the accuracy study");
        }
        plan.t_grid = parse_list(ts)?;
    }
    if let Some(hs) = a.hypotheses.as_deref().or(file.hypotheses.as_deref()) {
        if study == Study::Accuracy {
            bail!("--hypotheses does not apply to the accuracy study");
        }
        plan.hypotheses = parse_pairs(hs)?;
    }
    if let Some(l_max) = a.l_max.or(file.l_max) {
        plan.l_max = l_max;
    }
    plan.spectral = a.spectral.resolve(file);
    plan.validate()?;
    let report = experiments::run(&plan)?;
    write_report(&report, a.out.as_deref(), a.csv_dir.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

fn run_merge(a: MergeArgs) -> Result<ExitCode> {
    let parts = a
        .parts
        .iter()
        .map(|p| io::read_json::<StudyReport>(p).with_context(|| format!("reading {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let merged = StudyReport::merge(parts)?;
    write_report(&merged, a.out.as_deref(), a.csv_dir.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

fn init_logging(level: &str) -> Result<()> {
    let level: tracing::Level = level
        .parse()
        .map_err(|_| anyhow::anyhow!("unknown log level '{level}'"))?;
    tracing_subscriber::fmt()
        .with_max_level(level)
        .with_writer(std::io::stderr)
        .without_time()
        .init();
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    let file = ConfigFile::load(cli.config.as_deref())?;
    init_logging(&pick(cli.log_level, file.log_level.clone(), "warn".to_string()))?;
    if let Some(threads) = cli.threads.or(file.threads) {
        if threads == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Generate(a) => run_generate(a, &file),
        Command::Cluster(a) => run_cluster(a, &file),
        Command::Estimate(a) => run_estimate(a),
        Command::Test(a) => run_test(a, &file),
        Command::Select(a) => run_select(a, &file),
        Command::Experiment(a) => run_experiment(a, &file),
        Command::Merge(a) => run_merge(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
