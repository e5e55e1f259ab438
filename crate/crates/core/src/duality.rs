//! Both sides of the moment duality `E_r[Π R_i(t)^{n_i}] = E_n[Π r_i^{N_i(t)}]`
//! between the limiting frequency process and the block-counting chain.

use std::collections::{HashMap, VecDeque};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::coalescent::{BlockCountingChain, BlockCounts, CoalescentError, RateSource};
use crate::frequency::{build_freq_params, FrequencyError, LimitSde};
use crate::multiindex::monomial;
use crate::params::BranchingParams;
use crate::rng::{derive_seed, rng_from_seed, splitmix64};
use crate::stats::mean_stderr;
use crate::transform::MassLevel;

/// Largest state space the exact backward evaluator will build.
pub const STATE_CAP: usize = 100_000;

/// Uniformization substeps keep `Λ h` at or below this.
const MAX_UNIFORM_RATE_STEP: f64 = 8.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DualityError {
    #[error("more than {cap} states reachable from the initial block counts; use Monte Carlo backward mode")]
    StateSpaceOverflow { cap: usize },
    #[error("frequency must lie in [0, 1]^d, got {0:?}")]
    OutsideCube(Vec<f64>),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("number of replicates must be positive")]
    NoReplicates,
    #[error("time must be nonnegative and finite, got {0}")]
    Time(f64),
    #[error(transparent)]
    Coalescent(#[from] CoalescentError),
    #[error(transparent)]
    Frequency(#[from] FrequencyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentEstimate {
    pub value: f64,
    pub stderr: f64,
    pub reps: usize,
}

impl MomentEstimate {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            stderr: 0.0,
            reps: 1,
        }
    }

    fn from_samples(values: &[f64]) -> Self {
        let (value, stderr) = mean_stderr(values);
        Self {
            value,
            stderr,
            reps: values.len(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualityReport {
    pub forward: MomentEstimate,
    pub backward: MomentEstimate,
    pub zscore: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl DualityReport {
    pub fn new(forward: MomentEstimate, backward: MomentEstimate, threshold: f64) -> Self {
        let diff = forward.value - backward.value;
        let se = forward.stderr.hypot(backward.stderr);
        let zscore = if se > 0.0 {
            diff / se
        } else if diff == 0.0 {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        };
        Self {
            forward,
            backward,
            zscore,
            threshold,
            passed: zscore.abs() <= threshold,
        }
    }
}

fn check_inputs(d: usize, r: &[f64], n: &BlockCounts, t: f64) -> Result<(), DualityError> {
    for found in [r.len(), n.dim()] {
        if found != d {
            return Err(DualityError::Dimension { expected: d, found });
        }
    }
    if r.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(DualityError::OutsideCube(r.to_vec()));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(DualityError::Time(t));
    }
    Ok(())
}

/// Monte Carlo estimate of `E_r[Π R_i(t)^{n_i}]`; replicate `k` uses
/// `derive_seed(seed, k)`.
#[allow(clippy::too_many_arguments)]
pub fn forward_moment(
    p: &BranchingParams,
    z: &MassLevel,
    r: &[f64],
    n: &BlockCounts,
    t: f64,
    reps: usize,
    dt: f64,
    seed: u64,
) -> Result<MomentEstimate, DualityError> {
    check_inputs(p.d(), r, n, t)?;
    if reps == 0 {
        return Err(DualityError::NoReplicates);
    }
    if n.total() == 0 {
        return Ok(MomentEstimate {
            value: 1.0,
            stderr: 0.0,
            reps,
        });
    }
    let sde = LimitSde::new(&build_freq_params(p, z)?);
    let values = (0..reps as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng_from_seed(derive_seed(seed, k));
            sde.endpoint(r, t, dt, &mut rng).map(|end| monomial(&end, n.as_slice()))
        })
        .collect::<Result<Vec<f64>, _>>()?;
    Ok(MomentEstimate::from_samples(&values))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackwardMode {
    /// Transient distribution by uniformization over the reachable states.
    Exact,
    MonteCarlo { reps: usize, seed: u64 },
}

/// `E_n[Π r_i^{N_i(t)}]`.
pub fn backward_moment(
    source: RateSource<'_>,
    n: &BlockCounts,
    r: &[f64],
    t: f64,
    mode: BackwardMode,
) -> Result<MomentEstimate, DualityError> {
    let chain = BlockCountingChain::new(source)?;
    check_inputs(chain.d(), r, n, t)?;
    match mode {
        BackwardMode::Exact => exact_backward(&chain, n, r, t).map(MomentEstimate::exact),
        BackwardMode::MonteCarlo { reps, seed } => {
            if reps == 0 {
                return Err(DualityError::NoReplicates);
            }
            let values = (0..reps as u64)
                .into_par_iter()
                .map(|k| {
                    let mut rng = rng_from_seed(derive_seed(seed, k));
                    chain
                        .endpoint(n, t, &mut rng)
                        .map(|end| monomial(r, end.as_slice()))
                })
                .collect::<Result<Vec<f64>, _>>()?;
            Ok(MomentEstimate::from_samples(&values))
        }
    }
}

/// Reachable states from `n` with their sparse outgoing rates.
pub(crate) struct StateGraph {
    pub states: Vec<BlockCounts>,
    /// Per state: `(target index, rate)`.
    pub moves: Vec<Vec<(usize, f64)>>,
}

pub(crate) fn reachable(chain: &BlockCountingChain, n: &BlockCounts) -> Result<StateGraph, DualityError> {
    let mut index: HashMap<BlockCounts, usize> = HashMap::new();
    let mut states = vec![n.clone()];
    let mut moves = Vec::new();
    index.insert(n.clone(), 0);
    let mut queue = VecDeque::from([0usize]);
    while let Some(s) = queue.pop_front() {
        let mut out = Vec::new();
        for tr in chain.transitions(&states[s])? {
            let next = states.len();
            let idx = *index.entry(tr.target.clone()).or_insert(next);
            if idx == next {
                if states.len() >= STATE_CAP {
                    return Err(DualityError::StateSpaceOverflow { cap: STATE_CAP });
                }
                states.push(tr.target);
                queue.push_back(idx);
            }
            out.push((idx, tr.rate));
        }
        // Moves are processed in BFS order, so `moves[s]` lines up with `s`.
        moves.push(out);
    }
    Ok(StateGraph { states, moves })
}

fn exact_backward(chain: &BlockCountingChain, n: &BlockCounts, r: &[f64], t: f64) -> Result<f64, DualityError> {
    let graph = reachable(chain, n)?;
    let f: Vec<f64> = graph.states.iter().map(|m| monomial(r, m.as_slice())).collect();
    Ok(transient_expectation(&graph, &f, t)[0])
}

/// `exp(tQ) f` by uniformization, split into substeps with `Λ h ≤ 8`.
pub(crate) fn transient_expectation(graph: &StateGraph, f: &[f64], t: f64) -> Vec<f64> {
    let outflow: Vec<f64> = graph.moves.iter().map(|m| m.iter().map(|(_, q)| q).sum()).collect();
    let lambda = outflow.iter().copied().fold(0.0, f64::max);
    if lambda == 0.0 || t == 0.0 {
        return f.to_vec();
    }
    let substeps = (lambda * t / MAX_UNIFORM_RATE_STEP).ceil().max(1.0);
    let h = t / substeps;
    let lh = lambda * h;
    // Poisson(lh) tail beyond this is below 1e-17 for lh ≤ 8.
    let terms = (lh + 12.0 * lh.sqrt() + 40.0).ceil() as usize;
    let apply_p = |v: &[f64]| -> Vec<f64> {
        graph
            .moves
            .iter()
            .zip(&outflow)
            .enumerate()
            .map(|(s, (m, out))| {
                let jump: f64 = m.iter().map(|&(j, q)| q * v[j]).sum();
                v[s] + (jump - out * v[s]) / lambda
            })
            .collect()
    };
    let mut v = f.to_vec();
    for _ in 0..substeps as usize {
        let mut weight = (-lh).exp();
        let mut power = v.clone();
        let mut acc: Vec<f64> = power.iter().map(|x| weight * x).collect();
        for k in 1..=terms {
            power = apply_p(&power);
            weight *= lh / k as f64;
            for (a, p) in acc.iter_mut().zip(&power) {
                *a += weight * p;
            }
        }
        v = acc;
    }
    v
}

/// Settings shared by both sides of [`duality_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualityConfig {
    pub t: f64,
    pub reps: usize,
    pub dt: f64,
    pub seed: u64,
    pub zthreshold: f64,
    pub exact_backward: bool,
}

impl Default for DualityConfig {
    fn default() -> Self {
        Self {
            t: 1.0,
            reps: 10_000,
            dt: 1e-3,
            seed: 0,
            zthreshold: 3.0,
            exact_backward: true,
        }
    }
}

/// Seed of the backward Monte Carlo ensemble, kept apart from the forward one.
pub fn backward_seed(seed: u64) -> u64 {
    splitmix64(seed ^ 0xD1B5_4A32_D192_ED03)
}

/// Runs both sides concurrently and compares them.
pub fn duality_check(
    p: &BranchingParams,
    z: &MassLevel,
    r: &[f64],
    n: &BlockCounts,
    cfg: &DualityConfig,
) -> Result<DualityReport, DualityError> {
    let mode = if cfg.exact_backward {
        BackwardMode::Exact
    } else {
        BackwardMode::MonteCarlo {
            reps: cfg.reps,
            seed: backward_seed(cfg.seed),
        }
    };
    let (forward, backward) = rayon::join(
        || forward_moment(p, z, r, n, cfg.t, cfg.reps, cfg.dt, cfg.seed),
        || backward_moment(RateSource::Dual { params: p, z }, n, r, cfg.t, mode),
    );
    Ok(DualityReport::new(forward?, backward?, cfg.zthreshold))
}
