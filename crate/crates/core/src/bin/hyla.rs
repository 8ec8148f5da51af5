//! Command-line harness: `verify` runs the property suites, `bench` the
//! scaling measurements, `gen-data` the synthetic dataset export, and
//! `demo` an end-to-end forward pass with the linear probe.
//!
//! Exit codes: 0 success, 1 property/acceptance failure, 2 usage error,
//! 3 I/O error.

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hyliformer::attention::QkvMode;
use hyliformer::bench::{
    check_monotonic, emit_csv, emit_json, fit_loglog_slope, run_scaling_bench, BenchConfig,
    Mechanism,
};
use hyliformer::dataset::{load_dataset, write_dataset};
use hyliformer::model::{
    gen_synthetic_skeletons, hyliformer_forward, layer_weights, tokenize, AttentionAxis,
    LinearProbe, ModelConfig, SyntheticDatasetSpec,
};
use hyliformer::verify::{verify, VerifyScope};
use hyliformer::{Curvature, DenseArray, Error};

fn parse_kappa(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    Curvature::new(v).map_err(|e| e.to_string())?;
    Ok(v)
}

#[derive(Parser)]
#[command(name = "hyla", version, about = "Hyperbolic linear attention verification and benchmarking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Ball curvature (must be strictly negative)
    #[arg(long, default_value = "-1", value_parser = parse_kappa, allow_hyphen_values = true)]
    kappa: f64,
    /// Seed for every random draw in the subcommand
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Kernel thread count; overrides HYLA_THREADS
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn threads_or(&self, default: usize) -> Result<usize, Error> {
        let t = match self.threads {
            Some(t) => t,
            None => match std::env::var("HYLA_THREADS") {
                Ok(v) => v
                    .parse()
                    .map_err(|_| Error::Config(format!("bad HYLA_THREADS value {v:?}")))?,
                Err(_) => default,
            },
        };
        if t == 0 {
            return Err(Error::Config("thread count must be >= 1".into()));
        }
        Ok(t)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ScopeArg {
    All,
    Poincare,
    Attention,
    Model,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    Temporal,
    Spatial,
    Flattened,
}

impl From<AxisArg> for AttentionAxis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::Temporal => AttentionAxis::Temporal,
            AxisArg::Spatial => AttentionAxis::Spatial,
            AxisArg::Flattened => AttentionAxis::Flattened,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum QkvArg {
    Projection,
    Shift,
}

#[derive(Subcommand)]
enum Command {
    /// Run the invariant suites and print one pass/fail line per property
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = ScopeArg::All)]
        scope: ScopeArg,
        /// Acceptance-scale sample counts (10^4 sweeps) instead of quick ones
        #[arg(long)]
        full: bool,
    },
    /// Time all mechanisms over the sequence-length grid and fit slopes
    Bench {
        #[command(flatten)]
        common: Common,
        /// Comma-separated sequence lengths
        #[arg(long, default_value = "512,1024,2048,4096,8192", value_delimiter = ',')]
        grid: Vec<usize>,
        #[arg(long, default_value_t = 64)]
        feature_dim: usize,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[arg(long, default_value_t = 3)]
        warmup: usize,
        /// Comma-separated subset; default is all six mechanisms
        #[arg(long, value_delimiter = ',')]
        mechanisms: Option<Vec<String>>,
        /// Output directory for the report files
        #[arg(long, default_value = "bench_out")]
        out: PathBuf,
        /// Restrict the written report to one format (default: both)
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
    },
    /// Generate and export the synthetic labeled skeleton set
    GenData {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "dataset")]
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        classes: usize,
        #[arg(long, default_value_t = 100)]
        per_class: usize,
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
        #[arg(long)]
        force: bool,
    },
    /// Forward the dataset through the model and fit the linear probe
    Demo {
        #[command(flatten)]
        common: Common,
        /// Dataset directory written by gen-data
        #[arg(long, default_value = "dataset")]
        data: PathBuf,
        #[arg(long, default_value_t = 2)]
        layers: usize,
        #[arg(long, value_enum, default_value_t = AxisArg::Temporal)]
        axis: AxisArg,
        #[arg(long, value_enum, default_value_t = QkvArg::Projection)]
        qkv: QkvArg,
        /// Shuffle labels before fitting (chance-level control)
        #[arg(long)]
        shuffle_labels: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io(_) | Error::Format(_) => ExitCode::from(3),
                Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Verify { common, scope, full } => cmd_verify(common, scope, full),
        Command::Bench {
            common,
            grid,
            feature_dim,
            repeats,
            warmup,
            mechanisms,
            out,
            format,
        } => cmd_bench(common, grid, feature_dim, repeats, warmup, mechanisms, out, format),
        Command::GenData {
            common,
            out,
            classes,
            per_class,
            noise,
            force,
        } => cmd_gen_data(common, out, classes, per_class, noise, force),
        Command::Demo {
            common,
            data,
            layers,
            axis,
            qkv,
            shuffle_labels,
        } => cmd_demo(common, data, layers, axis, qkv, shuffle_labels),
    }
}

fn cmd_verify(common: Common, scope: ScopeArg, full: bool) -> Result<ExitCode, Error> {
    let threads = common.threads_or(1)?;
    if threads != 1 {
        return Err(Error::Config(
            "verify runs single-threaded for determinism; use --threads 1".into(),
        ));
    }
    let kappa = Curvature::new(common.kappa)?;
    let scope = match scope {
        ScopeArg::All => VerifyScope::All,
        ScopeArg::Poincare => VerifyScope::Poincare,
        ScopeArg::Attention => VerifyScope::Attention,
        ScopeArg::Model => VerifyScope::Model,
    };
    println!("seed {} | kappa {} | threads 1", common.seed, common.kappa);
    let results = verify(scope, common.seed, kappa, full);
    let mut failures = 0;
    for r in &results {
        let tag = if r.passed { "PASS" } else { "FAIL" };
        println!("[{tag}] {} - {}", r.name, r.detail);
        if !r.passed {
            failures += 1;
        }
    }
    println!("{} properties, {} failed", results.len(), failures);
    Ok(if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_bench(
    common: Common,
    grid: Vec<usize>,
    feature_dim: usize,
    repeats: usize,
    warmup: usize,
    mechanisms: Option<Vec<String>>,
    out: PathBuf,
    format: Option<FormatArg>,
) -> Result<ExitCode, Error> {
    let threads = common.threads_or(std::thread::available_parallelism().map_or(1, |n| n.get()))?;
    let mechanisms: Vec<Mechanism> = match mechanisms {
        Some(names) => names
            .iter()
            .map(|s| Mechanism::from_str(s.trim()))
            .collect::<Result<_, _>>()?,
        None => Mechanism::ALL.to_vec(),
    };
    let config = BenchConfig {
        ns: grid,
        feature_dim,
        repeats,
        warmup,
        threads,
        seed: common.seed,
    };
    println!(
        "seed {} | threads {} | F {} | grid {:?}",
        common.seed, threads, feature_dim, config.ns
    );
    let records = run_scaling_bench(&mechanisms, &config)?;
    let mut slopes = Vec::new();
    println!("{:<16} {:>8} {:>8} {:>10}", "mechanism", "slope", "r^2", "monotone");
    for &mech in &mechanisms {
        let report = fit_loglog_slope(&records, mech)?;
        let mono = check_monotonic(&records, mech);
        println!(
            "{:<16} {:>8.3} {:>8.4} {:>10}{}",
            mech.to_string(),
            report.slope,
            report.r_squared,
            mono,
            if report.flagged { "  (low r^2)" } else { "" }
        );
        slopes.push(report);
    }
    std::fs::create_dir_all(&out)?;
    let write_csv = !matches!(format, Some(FormatArg::Json));
    let write_json = !matches!(format, Some(FormatArg::Csv));
    if write_csv {
        std::fs::write(out.join("bench.csv"), emit_csv(&records))?;
    }
    if write_json {
        std::fs::write(out.join("bench.json"), emit_json(&records, &slopes)?)?;
    }
    println!("report written to {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_gen_data(
    common: Common,
    out: PathBuf,
    classes: usize,
    per_class: usize,
    noise: f64,
    force: bool,
) -> Result<ExitCode, Error> {
    let spec = SyntheticDatasetSpec {
        num_classes: classes,
        samples_per_class: per_class,
        noise_sigma: noise,
        seed: common.seed,
        ..Default::default()
    };
    let samples = gen_synthetic_skeletons(&spec)?;
    let manifest = write_dataset(&out, &samples, &spec, force)?;
    println!(
        "wrote {} samples ({} classes) to {} | spec hash {}",
        manifest.entries.len(),
        classes,
        out.display(),
        &manifest.spec_hash[..16]
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_demo(
    common: Common,
    data: PathBuf,
    layers: usize,
    axis: AxisArg,
    qkv: QkvArg,
    shuffle_labels: bool,
) -> Result<ExitCode, Error> {
    let kappa = Curvature::new(common.kappa)?;
    let (samples, manifest) = load_dataset(&data)?;
    if samples.is_empty() {
        return Err(Error::Format("dataset has no samples".into()));
    }
    let mut config = ModelConfig::new(layers, 16, kappa, common.seed);
    config.attention_axis = axis.into();
    config.attention.qkv_mode = match qkv {
        QkvArg::Projection => QkvMode::Projection,
        QkvArg::Shift => QkvMode::Shift,
    };
    let f = tokenize(&samples[0].sequence, config.attention_axis).ncols();
    let weights = layer_weights(&config, f);

    let mut rows = Vec::with_capacity(samples.len());
    let mut labels = Vec::with_capacity(samples.len());
    for sample in &samples {
        rows.push(hyliformer_forward(&sample.sequence, &config, &weights)?.into_data());
        labels.push(sample.label);
    }
    if shuffle_labels {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(common.seed.wrapping_add(99));
        labels.shuffle(&mut rng);
    }
    let features = DenseArray::from_rows(&rows)
        .map_err(|e| Error::Shape(format!("feature matrix: {e}")))?;
    let (_, acc) = LinearProbe::fit(&features, &labels)?;
    let chance = 1.0 / manifest.spec.num_classes as f64;
    println!(
        "seed {} | layers {} | {} samples | feature dim {}",
        common.seed,
        layers,
        samples.len(),
        f
    );
    println!("probe train accuracy: {acc:.4} (chance baseline {chance:.4})");
    Ok(ExitCode::SUCCESS)
}
