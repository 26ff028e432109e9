//! Rejection samplers over the column-wise partition tree of permutations.
//!
//! A trial starts at the root, optionally jumps to depth `d` by drawing an
//! injection from the deep-bound table, then descends one row–column pair
//! at a time. At a node with bound `u(S)` the children `S_i` are chosen with
//! probability `u(S_i) / u(S)`; the remaining mass rejects. A trial that
//! fixes every column is accepted, and each permutation `σ` is accepted with
//! probability exactly `a(σ) / U_d(A)`.

mod adapart;
mod state;

pub use adapart::{adapart_pick_column, ColumnChoice, DEFAULT_MAX_REFINEMENTS};
pub use state::{BoundGrid, SamplerState, Tables};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{deep_bound_with_limits, BoundKind, DeepBound, NESTING_TOLERANCE};
use crate::deep_table::{dsample, TableLimits};
use crate::error::{Error, Result};
use crate::logscale::LogScale;
use crate::matrix::Matrix;
use adapart::{log_sum_exp, refine, Node};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Columns in increasing order (Huber–Law scheme).
    StaticColumns,
    /// Column minimizing the child-bound sum at each level.
    #[serde(rename = "adapart")]
    AdaPart,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub kind: BoundKind,
    pub depth: usize,
    pub strategy: Strategy,
    pub seed: u64,
    #[serde(default = "default_refinements")]
    pub max_refinements: usize,
}

fn default_refinements() -> usize {
    DEFAULT_MAX_REFINEMENTS
}

impl SamplerConfig {
    /// `HL-d`: static columns with the Huber–Law bound.
    pub fn huber_law(depth: usize, seed: u64) -> Self {
        SamplerConfig {
            kind: BoundKind::HuberLaw,
            depth,
            strategy: Strategy::StaticColumns,
            seed,
            max_refinements: DEFAULT_MAX_REFINEMENTS,
        }
    }

    /// `AdaPart-d`: dynamic columns with the Schrijver–Soules bound.
    pub fn adapart(depth: usize, seed: u64) -> Self {
        SamplerConfig {
            kind: BoundKind::SchrijverSoules,
            depth,
            strategy: Strategy::AdaPart,
            seed,
            max_refinements: DEFAULT_MAX_REFINEMENTS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.strategy == Strategy::StaticColumns && self.kind != BoundKind::HuberLaw {
            return Err(Error::Config(format!(
                "static column order needs the Huber-Law bound, got {:?}",
                self.kind
            )));
        }
        Ok(())
    }

    /// Scheme name such as `HL-20` or `AdaPart-0`.
    pub fn name(&self) -> String {
        match self.strategy {
            Strategy::StaticColumns => format!("HL-{}", self.depth),
            Strategy::AdaPart if self.kind == BoundKind::SchrijverSoules => {
                format!("AdaPart-{}", self.depth)
            }
            Strategy::AdaPart => format!("AdaPart[{}]-{}", self.kind.short_name(), self.depth),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialOutcome {
    pub accepted: bool,
    /// `permutation[i]` is the column of row `i`, for accepted trials.
    pub permutation: Option<Vec<usize>>,
    pub trial_cost: u64,
}

/// A matrix prepared for repeated trials.
#[derive(Clone, Debug)]
pub struct Sampler {
    tables: Tables,
    bound: DeepBound,
    config: SamplerConfig,
    scale: LogScale,
}

impl Sampler {
    /// Builds the deep bound and sampling tables. For Huber–Law, rows with
    /// entries above 1 are divided by their maximum first; `scale` records
    /// the factor so that `per(m) = per(working) * scale`.
    pub fn new(m: &Matrix, config: SamplerConfig) -> Result<Self> {
        Self::with_limits(m, config, TableLimits::default())
    }

    pub fn with_limits(m: &Matrix, config: SamplerConfig, limits: TableLimits) -> Result<Self> {
        config.validate()?;
        m.order()?;
        let mut working = m.clone();
        let mut scale_ln = 0.0;
        if config.kind == BoundKind::HuberLaw {
            for i in 0..working.rows() {
                let max = working.row_max(i);
                if max > 1.0 {
                    working.scale_row(i, 1.0 / max);
                    scale_ln += max.ln();
                }
            }
        }
        let bound = deep_bound_with_limits(&working, config.depth, config.kind, limits)?;
        Self::assemble(working, bound, config, LogScale::from_ln(scale_ln))
    }

    /// Uses a precomputed deep bound of `m`.
    pub fn with_bound(m: &Matrix, bound: DeepBound, config: SamplerConfig) -> Result<Self> {
        config.validate()?;
        if bound.kind != config.kind || bound.depth != config.depth {
            return Err(Error::Config("deep bound does not match sampler config".into()));
        }
        if config.kind == BoundKind::HuberLaw && m.data().iter().any(|&v| v > 1.0) {
            return Err(Error::Config("Huber-Law sampling needs entries in [0, 1]".into()));
        }
        Self::assemble(m.clone(), bound, config, LogScale::ONE)
    }

    fn assemble(working: Matrix, bound: DeepBound, config: SamplerConfig, scale: LogScale) -> Result<Self> {
        if bound.value.is_zero() {
            return Err(Error::ZeroPermanent);
        }
        Ok(Sampler {
            tables: Tables::new(working, config.kind),
            bound,
            config,
            scale,
        })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    pub fn deep_bound(&self) -> &DeepBound {
        &self.bound
    }

    /// The matrix trials run on.
    pub fn working_matrix(&self) -> &Matrix {
        self.tables.matrix()
    }

    /// `per(input) / per(working)`.
    pub fn scale(&self) -> LogScale {
        self.scale
    }

    /// `U_d` of the input matrix.
    pub fn upper_bound(&self) -> LogScale {
        self.bound.value * self.scale
    }

    pub fn new_state(&self) -> SamplerState<'_> {
        SamplerState::new(&self.tables)
    }

    /// Runs one trial from `state` (which is reset first).
    pub fn trial<R: Rng + ?Sized>(
        &self,
        state: &mut SamplerState<'_>,
        rng: &mut R,
    ) -> Result<TrialOutcome> {
        state.reset();
        let d = self.config.depth;
        if d > 0 {
            let tau = dsample(&self.bound.table, rng)?;
            for (j, &i) in tau.iter().enumerate() {
                state.fix(i, j);
            }
            state.cost += (self.tables.matrix.rows() * d) as u64;
        }
        let mut parent = state.parent_log();
        let mut nodes: Vec<Node> = Vec::new();
        while let Some(&first_free) = state.free_cols().first() {
            nodes.clear();
            match self.config.strategy {
                Strategy::StaticColumns => {
                    state.column_bounds_into(first_free, |i, log| {
                        nodes.push(Node {
                            pairs: vec![(i, first_free)],
                            log,
                        })
                    });
                    // emitted last row first
                    nodes.reverse();
                }
                Strategy::AdaPart => {
                    let grid = state.all_bounds();
                    let Some(choice) = adapart_pick_column(state, &grid) else {
                        break;
                    };
                    state.cost += (state.free_cols().len() * state.free_rows().len()) as u64;
                    if choice.sum_log <= parent + NESTING_TOLERANCE.ln_1p() {
                        let j = choice.column;
                        nodes.extend(choice.children.into_iter().map(|(i, log)| Node {
                            pairs: vec![(i, j)],
                            log,
                        }));
                    } else {
                        nodes = refine(state, &self.tables, parent, choice, self.config.max_refinements)?;
                    }
                }
            }
            let total = log_sum_exp(nodes.iter().map(|n| n.log));
            if total > parent + NESTING_TOLERANCE.ln_1p() {
                return Err(Error::NestingFailure { refinements: 0 });
            }
            let mut u = rng.random::<f64>();
            let mut chosen = None;
            for (k, node) in nodes.iter().enumerate() {
                let p = (node.log - parent).exp();
                if u < p {
                    chosen = Some(k);
                    break;
                }
                u -= p;
            }
            state.cost += nodes.len() as u64;
            let Some(k) = chosen else {
                return Ok(TrialOutcome {
                    accepted: false,
                    permutation: None,
                    trial_cost: state.cost,
                });
            };
            let node = &nodes[k];
            let mut picked = 0.0;
            for &(i, j) in &node.pairs {
                picked += self.tables.matrix.get(i, j).ln();
                state.fix(i, j);
            }
            parent = node.log - picked;
        }
        let mut perm = vec![usize::MAX; self.tables.matrix.rows()];
        for &(i, j) in state.fixed() {
            perm[i] = j;
        }
        Ok(TrialOutcome {
            accepted: true,
            permutation: Some(perm),
            trial_cost: state.cost,
        })
    }

    /// Trial number `index` with its own random stream, plus one `Exp(1)`
    /// arrival drawn from the same stream before the trial.
    pub fn indexed_trial(&self, state: &mut SamplerState<'_>, index: u64) -> Result<(TrialOutcome, f64)> {
        let mut rng = trial_rng(self.config.seed, index);
        let arrival = exp1(&mut rng);
        Ok((self.trial(state, &mut rng)?, arrival))
    }
}

/// Random stream of trial `index` under `seed`.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// `Exp(1)` by inversion.
pub fn exp1<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    -(1.0 - rng.random::<f64>()).ln()
}

/// One trial on `m` with a prepared deep bound.
pub fn sample_trial<R: Rng + ?Sized>(
    m: &Matrix,
    db: &DeepBound,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<TrialOutcome> {
    let sampler = Sampler::with_bound(m, db.clone(), cfg.clone())?;
    let mut state = sampler.new_state();
    sampler.trial(&mut state, rng)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AcceptanceStats {
    pub accepts: u64,
    pub trials: u64,
    pub mean_trial_cost: f64,
}

impl AcceptanceStats {
    pub fn rate(&self) -> f64 {
        self.accepts as f64 / self.trials as f64
    }
}

const CHUNK: u64 = 4096;

/// Runs `trials` independent trials in parallel. Trial `k` uses
/// `trial_rng(seed, k)`, so totals do not depend on the thread count.
pub fn acceptance_rate_estimate(m: &Matrix, cfg: &SamplerConfig, trials: u64) -> Result<AcceptanceStats> {
    let sampler = Sampler::new(m, cfg.clone())?;
    sampler_acceptance(&sampler, trials)
}

pub fn sampler_acceptance(sampler: &Sampler, trials: u64) -> Result<AcceptanceStats> {
    let chunks = trials.div_ceil(CHUNK);
    let (accepts, cost) = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut state = sampler.new_state();
            let mut accepts = 0u64;
            let mut cost = 0u64;
            for k in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                let mut rng = trial_rng(sampler.config.seed, k);
                let out = sampler.trial(&mut state, &mut rng)?;
                accepts += u64::from(out.accepted);
                cost += out.trial_cost;
            }
            Ok::<_, Error>((accepts, cost))
        })
        .try_reduce(|| (0, 0), |a, b| Ok((a.0 + b.0, a.1 + b.1)))?;
    Ok(AcceptanceStats {
        accepts,
        trials,
        mean_trial_cost: if trials == 0 { 0.0 } else { cost as f64 / trials as f64 },
    })
}
