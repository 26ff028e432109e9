//! `deepar` command-line front end.
//!
//! Every subcommand prints one JSON object on stdout and a short summary on
//! stderr. Exit status is 0 on success, 2 for usage or input errors and 3
//! for numeric failures and exhausted budgets.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use deepar::bench::{ratio_diagnostic, write_csv, Status};
use deepar::estimator::DEFAULT_TRIAL_BUDGET;
use deepar::exact::DEFAULT_EXACT_CAP;
use deepar::gg::DEFAULT_SAMPLE_CAP;
use deepar::matrix::{load_matrix, save_matrix, MatrixFormat};
use deepar::sampler::DEFAULT_MAX_REFINEMENTS;
use deepar::{
    deep_bound, ds_pipeline, estimate, generate, gg_estimate, run_bench, BenchConfig, BoundKind,
    Error, EstimatorConfig, GGVariant, InstanceClass, InstanceSpec, LogScale, Matrix, SamplerConfig, Scheme,
    Strategy,
};

/// Environment variable holding the worker thread count.
const THREADS_ENV: &str = "DEEPAR_THREADS";

#[derive(Parser, Debug)]
#[command(name = "deepar", version, about = "Exact and approximate matrix permanents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact permanent (Glynn's formula).
    Exact {
        /// Matrix file (.mtx for MatrixMarket, dense text otherwise).
        file: PathBuf,
        /// Largest order to attempt.
        #[arg(long, default_value_t = DEFAULT_EXACT_CAP)]
        cap: usize,
    },
    /// Permanental upper bound, optionally at depth d.
    Bound {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "hl")]
        kind: KindArg,
        /// Number of leading columns summed out exactly.
        #[arg(long, default_value_t = 0)]
        depth: usize,
    },
    /// Doubly-stochastic preprocessing; writes the matrix and a scale sidecar.
    Preprocess {
        file: PathBuf,
        /// Output matrix; the scale goes to <OUT>.scale.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// (eps, delta)-approximation by rejection sampling.
    Estimate {
        file: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long, value_enum, default_value = "gbas-exact")]
        scheme: SchemeArg,
        /// Bound driving the sampler.
        #[arg(long, value_enum, default_value = "ss")]
        kind: KindArg,
        /// Depth of the deep bound.
        #[arg(long, default_value_t = 0)]
        depth: usize,
        /// Defaults to static for hl and adapart otherwise.
        #[arg(long, value_enum)]
        strategy: Option<StrategyArg>,
        /// Sinkhorn-scale the matrix before sampling.
        #[arg(long)]
        ds: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Give up (exit 3) after this many trials.
        #[arg(long, default_value_t = DEFAULT_TRIAL_BUDGET)]
        trial_budget: u64,
        /// AdaPart refinement rounds per step before failing.
        #[arg(long, default_value_t = DEFAULT_MAX_REFINEMENTS)]
        max_refinements: usize,
    },
    /// Godsil-Gutman estimate with median-of-means.
    Gg {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "real")]
        variant: VariantArg,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Refuse (exit 3) if the plan needs more samples than this.
        #[arg(long, default_value_t = DEFAULT_SAMPLE_CAP)]
        sample_cap: u64,
    },
    /// Generate a benchmark instance.
    Gen {
        #[arg(long, value_enum)]
        class: ClassArg,
        #[arg(long)]
        n: usize,
        /// Density, required for bernoulli.
        #[arg(long)]
        p: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a benchmark grid from a TOML or JSON config.
    Bench {
        #[arg(long)]
        config: PathBuf,
        /// CSV destination; defaults to the config path with a .csv extension.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KindArg {
    Mb,
    Ss,
    Hl,
}

impl From<KindArg> for BoundKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Mb => BoundKind::MincBregman,
            KindArg::Ss => BoundKind::SchrijverSoules,
            KindArg::Hl => BoundKind::HuberLaw,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SchemeArg {
    Dagum,
    Gbas,
    GbasExact,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Dagum => Scheme::Dagum,
            SchemeArg::Gbas => Scheme::Gbas,
            SchemeArg::GbasExact => Scheme::GbasExactK,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StrategyArg {
    Static,
    Adapart,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum VariantArg {
    Real,
    Complex,
    Quaternion,
}

impl From<VariantArg> for GGVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Real => GGVariant::Real,
            VariantArg::Complex => GGVariant::Complex,
            VariantArg::Quaternion => GGVariant::Quaternion,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ClassArg {
    Uniform,
    BlockDiagonal,
    Bernoulli,
    Staircase,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    match run(cli.command) {
        Ok(out) => {
            println!("{}", serde_json::to_string_pretty(&out).expect("json"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.parse().with_context(|| format!("{THREADS_ENV}={v} is not a count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(
            Error::Overflow(_)
            | Error::ZeroPermanent
            | Error::NestingFailure { .. }
            | Error::TrialBudget { .. }
            | Error::SampleBudget { .. }
            | Error::MemoryBudget { .. },
        ) => 3,
        _ => 2,
    }
}

/// `{ "ln": …, "value": … }`; `value` is null once it leaves `f64` range.
fn log_json(v: LogScale) -> Value {
    let value = v.to_f64();
    json!({
        "ln": if v.is_zero() { Value::Null } else { json!(v.ln()) },
        "value": if value.is_finite() { json!(value) } else { Value::Null },
        "display": v.to_string(),
    })
}

fn load(path: &Path) -> anyhow::Result<Matrix> {
    Ok(load_matrix(path, MatrixFormat::from_path(path))?)
}

fn run(cmd: Command) -> anyhow::Result<Value> {
    match cmd {
        Command::Exact { file, cap } => {
            let m = load(&file)?;
            let per = deepar::exact::permanent_exact_with_cap(&m, cap)?;
            eprintln!("per = {per} (n = {})", m.rows());
            let value = per.to_f64();
            Ok(json!({
                "n": m.rows(),
                "permanent": if value.is_finite() { json!(value) } else { Value::Null },
                "ln_permanent": if per.is_zero() { Value::Null } else { json!(per.ln()) },
            }))
        }
        Command::Bound { file, kind, depth } => {
            let m = load(&file)?;
            let kind = BoundKind::from(kind);
            if kind == BoundKind::MincBregman && m.data().iter().any(|&v| v > 1.0) {
                eprintln!("warning: entries above 1; the mb value is not a permanent bound here");
            }
            let db = deep_bound(&m, depth, kind)?;
            eprintln!("U_{depth}^{} = {}", kind.short_name(), db.value);
            Ok(json!({
                "n": m.rows(),
                "kind": kind,
                "depth": depth,
                "bound": log_json(db.value),
                "table_bytes": db.table.bytes(),
            }))
        }
        Command::Preprocess { file, out } => {
            let m = load(&file)?;
            let s = ds_pipeline(&m)?;
            save_matrix(&s.matrix, &out, MatrixFormat::from_path(&out))?;
            let sidecar = sidecar_path(&out);
            let meta = json!({
                "log_scale": s.log_scale,
                "zero_permanent": s.zero_permanent,
                "source": file,
            });
            std::fs::write(&sidecar, serde_json::to_string_pretty(&meta)?)
                .with_context(|| format!("writing {}", sidecar.display()))?;
            eprintln!(
                "wrote {} (log scale {:.6}{})",
                out.display(),
                s.log_scale,
                if s.zero_permanent { ", permanent is zero" } else { "" }
            );
            Ok(json!({
                "out": out,
                "sidecar": sidecar,
                "log_scale": s.log_scale,
                "zero_permanent": s.zero_permanent,
            }))
        }
        Command::Estimate {
            file,
            eps,
            delta,
            scheme,
            kind,
            depth,
            strategy,
            ds,
            seed,
            trial_budget,
            max_refinements,
        } => {
            let m = load(&file)?;
            let kind = BoundKind::from(kind);
            let strategy = match strategy {
                Some(StrategyArg::Static) => Strategy::StaticColumns,
                Some(StrategyArg::Adapart) => Strategy::AdaPart,
                None if kind == BoundKind::HuberLaw => Strategy::StaticColumns,
                None => Strategy::AdaPart,
            };
            let scfg = SamplerConfig {
                kind,
                depth,
                strategy,
                seed,
                max_refinements,
            };
            let mut ecfg = EstimatorConfig::new(eps, delta, scheme.into());
            ecfg.trial_budget = trial_budget;
            ecfg.preprocess = ds;
            let r = estimate(&m, &ecfg, &scfg)?;
            eprintln!(
                "per ~ {} ({} accepts in {} trials, {}, {:.3}s)",
                r.estimate, r.accepted, r.total_trials, r.sampler, r.wall_time_s
            );
            Ok(json!({
                "n": m.rows(),
                "estimate": log_json(r.estimate),
                "epsilon": r.epsilon,
                "delta": r.delta,
                "scheme": r.scheme,
                "sampler": r.sampler,
                "k": r.target,
                "accepted": r.accepted,
                "total_trials": r.total_trials,
                "upper_bound": log_json(r.upper_bound),
                "scale_correction": log_json(r.scale_correction),
                "preprocess_seconds": r.preprocess_seconds,
                "wall_time_s": r.wall_time_s,
            }))
        }
        Command::Gg {
            file,
            variant,
            eps,
            delta,
            seed,
            sample_cap,
        } => {
            let m = load(&file)?;
            let r = gg_estimate(&m, variant.into(), eps, delta, seed, sample_cap)?;
            eprintln!(
                "per ~ {} ({} batches of {} samples, {:.3}s)",
                r.estimate, r.batches, r.batch_size, r.wall_time_s
            );
            Ok(serde_json::to_value(&r)?)
        }
        Command::Gen {
            class,
            n,
            p,
            seed,
            out,
        } => {
            let class = match class {
                ClassArg::Uniform => InstanceClass::Uniform,
                ClassArg::BlockDiagonal => InstanceClass::BlockDiagonal,
                ClassArg::Staircase => InstanceClass::Staircase,
                ClassArg::Bernoulli => InstanceClass::Bernoulli {
                    p: p.ok_or_else(|| Error::Config("bernoulli needs --p".into()))?,
                },
            };
            let spec = InstanceSpec::new(class, n, seed);
            let m = generate(&spec)?;
            save_matrix(&m, &out, MatrixFormat::from_path(&out))?;
            eprintln!("wrote {} to {}", spec.label(), out.display());
            Ok(json!({ "instance": spec.label(), "n": n, "out": out }))
        }
        Command::Bench { config, out } => {
            let text = std::fs::read_to_string(&config).map_err(|e| Error::io(&config, e))?;
            let cfg: BenchConfig = if config.extension().is_some_and(|e| e == "json") {
                serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?
            } else {
                toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?
            };
            let rows = run_bench(&cfg)?;
            let csv_path = out.unwrap_or_else(|| config.with_extension("csv"));
            write_csv(&rows, &csv_path)?;
            for r in &rows {
                let mark = if r.status == Status::Timeout { ">" } else { "" };
                eprintln!("{:<28} {:<14} ERT {mark}{:.3e}s", r.instance, r.scheme, r.ert_seconds);
            }
            let diagnostic = match &cfg.diagnostic {
                Some(d) => {
                    let rows = ratio_diagnostic(d.n, d.p, &d.depths, &d.seeds, d.delta)?;
                    for r in &rows {
                        eprintln!(
                            "{:<28} d={:<3} U/per = {:.3e} (theorem bound {})",
                            r.instance,
                            r.depth,
                            r.ratio,
                            r.theorem_bound.map_or("n/a".to_string(), |b| format!("{b:.3e}"))
                        );
                    }
                    serde_json::to_value(rows)?
                }
                None => Value::Null,
            };
            Ok(json!({ "csv": csv_path, "rows": rows, "diagnostic": diagnostic }))
        }
    }
}

/// `out.mtx` → `out.mtx.scale.json`.
fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".scale.json");
    PathBuf::from(s)
}
