//! Trial loop shared by the estimator and the bench harness.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::Result;
use crate::sampler::Sampler;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunMode {
    /// One thread, trials in index order; used when timing matters.
    Sequential,
    /// Batches of trials in parallel, merged in index order.
    Parallel,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunProgress {
    pub accepts: u64,
    pub trials: u64,
    /// Sum of the `Exp(1)` arrivals of the consumed trials.
    pub arrival_time: f64,
    /// Whether the target was reached.
    pub completed: bool,
    /// Sum of per-trial step counters.
    pub cost: u64,
}

const CHUNK: u64 = 256;
const MIN_BATCH: u64 = 1024;
const MAX_BATCH: u64 = 1 << 20;

/// Consumes trials `0, 1, 2, …` until `target` accepts, the trial budget,
/// or the deadline. Trial `k` always uses the stream `(seed, k)`, so both
/// modes stop at the same trial with the same totals.
pub fn run_trials(
    sampler: &Sampler,
    target: u64,
    budget: u64,
    deadline: Option<Instant>,
    mode: RunMode,
    arrivals: bool,
) -> Result<RunProgress> {
    let mut p = RunProgress {
        accepts: 0,
        trials: 0,
        arrival_time: 0.0,
        completed: target == 0,
        cost: 0,
    };
    if p.completed {
        return Ok(p);
    }
    match mode {
        RunMode::Sequential => {
            let mut state = sampler.new_state();
            while p.trials < budget {
                if p.trials.is_multiple_of(CHUNK) && deadline.is_some_and(|d| Instant::now() >= d) {
                    return Ok(p);
                }
                let (out, arrival) = sampler.indexed_trial(&mut state, p.trials)?;
                p.trials += 1;
                p.cost += out.trial_cost;
                if arrivals {
                    p.arrival_time += arrival;
                }
                if out.accepted {
                    p.accepts += 1;
                    if p.accepts == target {
                        p.completed = true;
                        return Ok(p);
                    }
                }
            }
        }
        RunMode::Parallel => {
            while p.trials < budget {
                if deadline.is_some_and(|d| Instant::now() >= d) {
                    return Ok(p);
                }
                let batch = next_batch(&p, target).min(budget - p.trials);
                let start = p.trials;
                let chunks = batch.div_ceil(CHUNK);
                let results: Vec<Vec<(bool, f64, u64)>> = (0..chunks)
                    .into_par_iter()
                    .map(|c| {
                        let mut state = sampler.new_state();
                        let lo = start + c * CHUNK;
                        let hi = (lo + CHUNK).min(start + batch);
                        (lo..hi)
                            .map(|k| {
                                let (out, a) = sampler.indexed_trial(&mut state, k)?;
                                Ok((out.accepted, a, out.trial_cost))
                            })
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<_>>()?;
                for (accepted, arrival, cost) in results.into_iter().flatten() {
                    p.trials += 1;
                    p.cost += cost;
                    if arrivals {
                        p.arrival_time += arrival;
                    }
                    if accepted {
                        p.accepts += 1;
                        if p.accepts == target {
                            p.completed = true;
                            return Ok(p);
                        }
                    }
                }
            }
        }
    }
    Ok(p)
}

// Aim a little past the expected number of trials still needed.
fn next_batch(p: &RunProgress, target: u64) -> u64 {
    if p.accepts == 0 {
        return p.trials.clamp(MIN_BATCH, MAX_BATCH);
    }
    let rate = p.accepts as f64 / p.trials as f64;
    let need = (target - p.accepts) as f64 / rate * 1.1;
    (need as u64).clamp(MIN_BATCH, MAX_BATCH)
}
