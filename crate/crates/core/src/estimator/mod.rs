//! `(ε, δ)`-approximation of the permanent from a stream of sampler trials.
//!
//! Two stopping rules are available. The Dagum-style rule counts trials until
//! `k = ⌈ψ⌉` accepts and returns `U·k/t`. GBAS adds one `Exp(1)` arrival per
//! trial and returns `U·(k−1)/t` with `t` the arrival time of the `k`-th
//! accept; `k` is either `⌈ψ*⌉` or the smallest `k` for which a
//! `Gamma(k, k−1)` variable lies within `1 ± ε` with probability `1 − δ`.

mod run;

pub use run::{run_trials, RunMode, RunProgress};

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logscale::LogScale;
use crate::matrix::Matrix;
use crate::preprocess::{ds_pipeline, has_perfect_matching};
use crate::sampler::{Sampler, SamplerConfig};
use crate::special::gamma_p;

/// Trials allowed before a run gives up.
pub const DEFAULT_TRIAL_BUDGET: u64 = 100_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Dagum,
    Gbas,
    #[serde(rename = "gbas-exact")]
    GbasExactK,
}

impl Scheme {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dagum" => Some(Scheme::Dagum),
            "gbas" => Some(Scheme::Gbas),
            "gbas-exact" | "gbas-exact-k" | "gbasexactk" => Some(Scheme::GbasExactK),
            _ => None,
        }
    }

    pub fn uses_arrivals(&self) -> bool {
        !matches!(self, Scheme::Dagum)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub epsilon: f64,
    pub delta: f64,
    pub scheme: Scheme,
    #[serde(default = "default_budget")]
    pub trial_budget: u64,
    /// Run the doubly-stochastic preprocessing first.
    #[serde(default)]
    pub preprocess: bool,
}

fn default_budget() -> u64 {
    DEFAULT_TRIAL_BUDGET
}

impl EstimatorConfig {
    pub fn new(epsilon: f64, delta: f64, scheme: Scheme) -> Self {
        EstimatorConfig {
            epsilon,
            delta,
            scheme,
            trial_budget: DEFAULT_TRIAL_BUDGET,
            preprocess: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if self.scheme.uses_arrivals() && self.epsilon >= 0.75 {
            return Err(Error::Config(format!(
                "GBAS needs epsilon in (0, 3/4), got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    pub fn psi(&self) -> f64 {
        psi(self.epsilon, self.delta)
    }

    pub fn psi_star(&self) -> f64 {
        psi_star(self.epsilon, self.delta)
    }
}

/// `ψ(ε, δ) = 1 + 2.88 (1 + ε) ε⁻² ln(2/δ)`.
pub fn psi(eps: f64, delta: f64) -> f64 {
    1.0 + 2.88 * (1.0 + eps) * (2.0 / delta).ln() / (eps * eps)
}

/// `ψ*(ε, δ) = 2 (1 − 4ε/3)⁻¹ ε⁻² ln(2/δ)`.
pub fn psi_star(eps: f64, delta: f64) -> f64 {
    2.0 * (2.0 / delta).ln() / ((1.0 - 4.0 * eps / 3.0) * eps * eps)
}

/// `Pr(|Z − 1| > ε)` for `Z ~ Gamma(k, rate k − 1)`.
pub fn gamma_tail(k: u64, eps: f64) -> f64 {
    assert!(k >= 2, "gamma_tail needs k >= 2");
    let a = k as f64;
    let scale = a - 1.0;
    let hi = gamma_p(a, scale * (1.0 + eps));
    let lo = gamma_p(a, (scale * (1.0 - eps)).max(0.0));
    (1.0 - (hi - lo)).max(0.0)
}

/// Number of accepts the scheme waits for.
pub fn required_accepts(cfg: &EstimatorConfig) -> Result<u64> {
    cfg.validate()?;
    Ok(match cfg.scheme {
        Scheme::Dagum => cfg.psi().ceil() as u64,
        Scheme::Gbas => cfg.psi_star().ceil() as u64,
        Scheme::GbasExactK => exact_k(cfg.epsilon, cfg.delta),
    })
}

// Doubling then bisection; the tail is nonincreasing in k.
fn exact_k(eps: f64, delta: f64) -> u64 {
    let ok = |k: u64| gamma_tail(k, eps) < delta;
    if ok(2) {
        return 2;
    }
    let (mut lo, mut hi) = (2, 4);
    while !ok(hi) {
        lo = hi;
        hi *= 2;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateReport {
    pub estimate: LogScale,
    pub epsilon: f64,
    pub delta: f64,
    pub scheme: Scheme,
    pub sampler: String,
    /// Accepts the scheme required.
    pub target: u64,
    pub accepted: u64,
    pub total_trials: u64,
    /// Arrival time of the last accept (GBAS) or the trial count (Dagum).
    pub elapsed_time: f64,
    /// `U_d` of the matrix the sampler ran on.
    pub upper_bound: LogScale,
    /// `per(input) / per(sampled matrix)`.
    pub scale_correction: LogScale,
    pub preprocess_seconds: f64,
    pub wall_time_s: f64,
}

/// Runs the configured estimator on `m`. A matrix without a positive
/// permutation yields an exact zero without sampling.
pub fn estimate(m: &Matrix, cfg: &EstimatorConfig, sampler_cfg: &SamplerConfig) -> Result<EstimateReport> {
    let started = Instant::now();
    cfg.validate()?;
    sampler_cfg.validate()?;
    m.order()?;
    let target = required_accepts(cfg)?;
    let zero = |preprocess_seconds: f64| EstimateReport {
        estimate: LogScale::ZERO,
        epsilon: cfg.epsilon,
        delta: cfg.delta,
        scheme: cfg.scheme,
        sampler: sampler_cfg.name(),
        target,
        accepted: 0,
        total_trials: 0,
        elapsed_time: 0.0,
        upper_bound: LogScale::ZERO,
        scale_correction: LogScale::ONE,
        preprocess_seconds,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    let (working, ds_scale) = if cfg.preprocess {
        let s = ds_pipeline(m)?;
        if s.zero_permanent {
            return Ok(zero(started.elapsed().as_secs_f64()));
        }
        let scale = s.scale();
        (s.matrix, scale)
    } else {
        if !has_perfect_matching(m) {
            return Ok(zero(0.0));
        }
        (m.clone(), LogScale::ONE)
    };
    let preprocess_seconds = if cfg.preprocess {
        started.elapsed().as_secs_f64()
    } else {
        0.0
    };
    let sampler = match Sampler::new(&working, sampler_cfg.clone()) {
        Err(Error::ZeroPermanent) => return Ok(zero(preprocess_seconds)),
        other => other?,
    };
    let progress = run_trials(&sampler, target, cfg.trial_budget, None, RunMode::Parallel, cfg.scheme.uses_arrivals())?;
    if !progress.completed {
        return Err(Error::TrialBudget {
            trials: progress.trials,
            accepted: progress.accepts,
        });
    }
    let ratio = match cfg.scheme {
        Scheme::Dagum => target as f64 / progress.trials as f64,
        _ => (target - 1) as f64 / progress.arrival_time,
    };
    let scale_correction = ds_scale * sampler.scale();
    let upper_bound = sampler.deep_bound().value;
    Ok(EstimateReport {
        estimate: upper_bound * LogScale::from_f64(ratio) * scale_correction,
        epsilon: cfg.epsilon,
        delta: cfg.delta,
        scheme: cfg.scheme,
        sampler: sampler_cfg.name(),
        target,
        accepted: progress.accepts,
        total_trials: progress.trials,
        elapsed_time: if cfg.scheme.uses_arrivals() {
            progress.arrival_time
        } else {
            progress.trials as f64
        },
        upper_bound,
        scale_correction,
        preprocess_seconds,
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}
