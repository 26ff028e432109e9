//! Expected-running-time benchmark over a grid of schemes and instances.
//!
//! A sampler cell times sampling until `ert_accepts` accepts and
//! extrapolates linearly to `target_accepts`, adding preprocessing time once.
//! If the time limit hits first, the same formula on the time spent gives a
//! lower bound and the row is marked `timeout`.

use std::f64::consts::{E, PI};
use std::path::Path;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::bounds::{deep_bound, BoundKind};
use crate::error::{Error, Result};
use crate::estimator::{run_trials, RunMode};
use crate::exact::permanent_exact;
use crate::gg::{gg_single_estimate, median_of_means_plan, GGVariant};
use crate::matrix::{generate, InstanceClass, InstanceSpec, Matrix};
use crate::preprocess::{ds_pipeline, has_perfect_matching};
use crate::sampler::{trial_rng, Sampler, SamplerConfig, Strategy};

pub const DEFAULT_ERT_ACCEPTS: u64 = 65;
pub const DEFAULT_TARGET_ACCEPTS: u64 = 388;
pub const DEFAULT_TIME_LIMIT_S: f64 = 4825.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum BenchScheme {
    Sampler {
        kind: BoundKind,
        depth: usize,
        strategy: Strategy,
        #[serde(default)]
        ds: bool,
    },
    Gg {
        variant: GGVariant,
        #[serde(default = "default_eps")]
        epsilon: f64,
        #[serde(default = "default_delta")]
        delta: f64,
    },
}

fn default_eps() -> f64 {
    0.1
}

fn default_delta() -> f64 {
    0.05
}

impl BenchScheme {
    pub fn hl(depth: usize, ds: bool) -> Self {
        BenchScheme::Sampler {
            kind: BoundKind::HuberLaw,
            depth,
            strategy: Strategy::StaticColumns,
            ds,
        }
    }

    pub fn adapart(depth: usize, ds: bool) -> Self {
        BenchScheme::Sampler {
            kind: BoundKind::SchrijverSoules,
            depth,
            strategy: Strategy::AdaPart,
            ds,
        }
    }

    /// `HL-20-DS`, `AdaPart-0`, `GG-complex`.
    pub fn name(&self) -> String {
        match self {
            BenchScheme::Sampler {
                kind,
                depth,
                strategy,
                ds,
            } => {
                let cfg = SamplerConfig {
                    kind: *kind,
                    depth: *depth,
                    strategy: *strategy,
                    seed: 0,
                    max_refinements: 0,
                };
                format!("{}{}", cfg.name(), if *ds { "-DS" } else { "" })
            }
            BenchScheme::Gg { variant, .. } => format!("GG-{}", format!("{variant:?}").to_lowercase()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub schemes: Vec<BenchScheme>,
    pub instances: Vec<InstanceSpec>,
    #[serde(default = "default_ert_accepts")]
    pub ert_accepts: u64,
    #[serde(default = "default_target_accepts")]
    pub target_accepts: u64,
    #[serde(default = "default_time_limit")]
    pub time_limit_s: f64,
    #[serde(default = "default_repeats")]
    pub repeats: u32,
    #[serde(default)]
    pub seed: u64,
    /// Optional bound-to-permanent ratio report on Bernoulli instances.
    #[serde(default)]
    pub diagnostic: Option<DiagnosticConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticConfig {
    pub n: usize,
    pub p: f64,
    pub depths: Vec<usize>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

fn default_ert_accepts() -> u64 {
    DEFAULT_ERT_ACCEPTS
}

fn default_target_accepts() -> u64 {
    DEFAULT_TARGET_ACCEPTS
}

fn default_time_limit() -> f64 {
    DEFAULT_TIME_LIMIT_S
}

fn default_repeats() -> u32 {
    1
}

impl BenchConfig {
    pub fn new(schemes: Vec<BenchScheme>, instances: Vec<InstanceSpec>) -> Self {
        BenchConfig {
            schemes,
            instances,
            ert_accepts: DEFAULT_ERT_ACCEPTS,
            target_accepts: DEFAULT_TARGET_ACCEPTS,
            time_limit_s: DEFAULT_TIME_LIMIT_S,
            repeats: 1,
            seed: 0,
            diagnostic: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ert_accepts == 0 || self.ert_accepts > self.target_accepts {
            return Err(Error::Config(format!(
                "need 0 < ert_accepts <= target_accepts, got {} and {}",
                self.ert_accepts, self.target_accepts
            )));
        }
        if self.time_limit_s.is_nan() || self.time_limit_s <= 0.0 {
            return Err(Error::Config("time_limit_s must be positive".into()));
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        for spec in &self.instances {
            spec.validate()?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    /// `ert_seconds` is a lower bound.
    Timeout,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub instance: String,
    pub n: usize,
    pub scheme: String,
    pub repeat: u32,
    pub ert_seconds: f64,
    pub accepts: u64,
    pub trials: u64,
    pub preprocess_seconds: f64,
    /// `ln` of the root or deep upper bound; empty for GG rows.
    pub bound_value_log: Option<f64>,
    pub status: Status,
}

/// Runs every scheme on every instance, `repeats` times, sequentially.
pub fn run_bench(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for spec in &cfg.instances {
        let m = generate(spec)?;
        for scheme in &cfg.schemes {
            for r in 0..cfg.repeats {
                rows.push(bench_cell(&m, &spec.label(), scheme, cfg, r)?);
            }
        }
    }
    Ok(rows)
}

/// One row of the table for matrix `m`.
pub fn bench_cell(m: &Matrix, instance: &str, scheme: &BenchScheme, cfg: &BenchConfig, repeat: u32) -> Result<BenchRow> {
    let n = m.order()?;
    let seed = cfg.seed.wrapping_add(u64::from(repeat));
    let limit = Duration::from_secs_f64(cfg.time_limit_s);
    let mut row = BenchRow {
        instance: instance.to_string(),
        n,
        scheme: scheme.name(),
        repeat,
        ert_seconds: 0.0,
        accepts: 0,
        trials: 0,
        preprocess_seconds: 0.0,
        bound_value_log: None,
        status: Status::Ok,
    };
    match *scheme {
        BenchScheme::Sampler {
            kind,
            depth,
            strategy,
            ds,
        } => {
            let started = Instant::now();
            let working = if ds {
                let s = ds_pipeline(m)?;
                if s.zero_permanent {
                    row.preprocess_seconds = started.elapsed().as_secs_f64();
                    row.ert_seconds = row.preprocess_seconds;
                    return Ok(row);
                }
                s.matrix
            } else {
                if !has_perfect_matching(m) {
                    return Ok(row);
                }
                m.clone()
            };
            let scfg = SamplerConfig {
                kind,
                depth,
                strategy,
                seed,
                max_refinements: crate::sampler::DEFAULT_MAX_REFINEMENTS,
            };
            let sampler = Sampler::new(&working, scfg)?;
            row.preprocess_seconds = started.elapsed().as_secs_f64();
            row.bound_value_log = Some(sampler.upper_bound().ln());
            let t0 = Instant::now();
            let deadline = started + limit;
            let p = run_trials(&sampler, cfg.ert_accepts, u64::MAX, Some(deadline), RunMode::Sequential, false)?;
            let sampling = t0.elapsed().as_secs_f64();
            row.accepts = p.accepts;
            row.trials = p.trials;
            row.ert_seconds = row.preprocess_seconds + cfg.target_accepts as f64 * sampling / cfg.ert_accepts as f64;
            if !p.completed {
                row.status = Status::Timeout;
            }
        }
        BenchScheme::Gg { variant, epsilon, delta } => {
            // time single estimates and extrapolate to the full plan
            let (batches, size) = median_of_means_plan(n, variant, epsilon, delta);
            let required = batches.saturating_mul(size);
            let t0 = Instant::now();
            let probe_limit = limit.min(Duration::from_secs(1));
            let mut done = 0u64;
            while done < required && (done < 16 || t0.elapsed() < probe_limit) {
                let mut rng = trial_rng(seed, done);
                gg_single_estimate(m, variant, &mut rng)?;
                done += 1;
            }
            let per_sample = t0.elapsed().as_secs_f64() / done as f64;
            row.accepts = done;
            row.trials = required;
            row.ert_seconds = per_sample * required as f64;
            if row.ert_seconds > cfg.time_limit_s {
                row.status = Status::Timeout;
            }
        }
    }
    Ok(row)
}

pub fn write_csv(rows: &[BenchRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<BenchRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Right-hand side of the high-probability ratio bound for `B(n, p)`:
/// `δ⁻¹ (π(n−d))^{−1/2} (e^{2e−1} (n−d) p₀)^{1/(2p₀)}` with
/// `p₀ = p − n⁻¹ √(2p ln δ⁻¹)`. Returns `None` when `p₀ ≤ 0`.
pub fn ratio_theorem_bound(n: usize, p: f64, d: usize, delta: f64) -> Option<f64> {
    let nf = n as f64;
    let p0 = p - (2.0 * p * (1.0 / delta).ln()).sqrt() / nf;
    if p0 <= 0.0 || d >= n {
        return None;
    }
    let m = (n - d) as f64;
    let a = (2.0 * E - 1.0).exp();
    Some((a * m * p0).powf(1.0 / (2.0 * p0)) / (delta * (PI * m).sqrt()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub instance: String,
    pub n: usize,
    pub p: f64,
    pub depth: usize,
    pub permanent_log: f64,
    pub bound_log: f64,
    pub ratio: f64,
    pub theorem_bound: Option<f64>,
}

/// `U^HL_d / per` on Bernoulli instances next to the theorem's bound.
pub fn ratio_diagnostic(n: usize, p: f64, depths: &[usize], seeds: &[u64], delta: f64) -> Result<Vec<RatioRow>> {
    let mut out = Vec::new();
    for &seed in seeds {
        let spec = InstanceSpec::new(InstanceClass::Bernoulli { p }, n, seed);
        let m = generate(&spec)?;
        let per = permanent_exact(&m)?;
        for &d in depths {
            let u = deep_bound(&m, d, BoundKind::HuberLaw)?.value;
            let ratio = if per.is_zero() {
                f64::INFINITY
            } else {
                (u.ln() - per.ln()).exp()
            };
            out.push(RatioRow {
                instance: spec.label(),
                n,
                p,
                depth: d,
                permanent_log: per.ln(),
                bound_log: u.ln(),
                ratio,
                theorem_bound: ratio_theorem_bound(n, p, d, delta),
            });
        }
    }
    Ok(out)
}
