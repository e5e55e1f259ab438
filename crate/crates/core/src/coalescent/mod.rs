//! Multitype Λ-coalescents: merger rates, the block-counting chain on
//! `ℕ₀^d` and the typed-partition chain on `[M]`.
//!
//! With `b` blocks present, the rate at which a given selection of `k`
//! blocks (`k_j` of type `j`) merges into one block of type `i` is
//!
//! ```text
//! λ^i_{b,k} = ρ_ii 1{k = 2e_i} + Σ_{j≠i} ρ_ij 1{k = e_j} + ∫ u^k (1-u)^{b-k} Q_i(du)
//! ```
//!
//! and the block-counting chain jumps from `n` to `n - k + e_i` at rate
//! `C(n, k) λ^i_{n,k}` for every `k ∈ [n]_0 \ {0, e_i}`.

mod partition;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use self::partition::{
    enumerate_partition_transitions, partition_distance, restrict, simulate_partition, Block,
    PartitionChain, TypedPartition,
};
use crate::multiindex::{binomial, merger_kernel, multi_binomial, SubIndices};
use crate::params::{
    validate_branching, validate_coalescent, Atom, AtomicMeasure, BranchingParams,
    CoalescentParams, Domain, ParamsError,
};
use crate::rng::{rng_from_seed, SimRng};
use crate::trajectory::{PathEnd, Trajectory};
use crate::transform::{pushforward, MassLevel, TransformError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoalescentError {
    #[error("merger vector {k:?} is not in [b]_0 for b = {b:?}")]
    OutOfRange { b: Vec<u32>, k: Vec<u32> },
    #[error("merger vector {k:?} is 0 or the unit vector of the target type {i}")]
    TrivialMerger { k: Vec<u32>, i: usize },
    #[error("type index {i} out of range for d = {d}")]
    TypeIndex { i: usize, d: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("parameters fail validation: {0}")]
    InvalidParams(String),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("restriction level {m} outside 1..={size}")]
    RestrictionLevel { m: usize, size: usize },
    #[error("ground sets differ: {0} vs {1}")]
    GroundSetMismatch(usize, usize),
    #[error("{0} blocks is too many for exhaustive subset enumeration (max {max})", max = partition::MAX_BLOCKS)]
    TooManyBlocks(usize),
    #[error("horizon must be finite and nonnegative, got {0}")]
    Horizon(f64),
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Transform(#[from] TransformError),
}

/// Number of blocks of each type.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BlockCounts(Vec<u32>);

impl BlockCounts {
    pub fn new(n: Vec<u32>) -> Self {
        Self(n)
    }

    pub fn zeros(d: usize) -> Self {
        Self(vec![0; d])
    }

    pub fn unit(d: usize, i: usize) -> Self {
        let mut n = vec![0; d];
        n[i] = 1;
        Self(n)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    /// `self - k + e_i`; `k` must not exceed `self`.
    pub fn merged(&self, k: &[u32], i: usize) -> Self {
        let mut m: Vec<u32> = self.0.iter().zip(k).map(|(n, k)| n - k).collect();
        m[i] += 1;
        Self(m)
    }

    /// Every `n` with `|n| ≤ max_total` in dimension `d`.
    pub fn all_up_to(d: usize, max_total: u32) -> Vec<Self> {
        SubIndices::bounded(&vec![max_total; d], max_total)
            .map(Self)
            .collect()
    }
}

impl std::ops::Index<usize> for BlockCounts {
    type Output = u32;

    fn index(&self, i: usize) -> &u32 {
        &self.0[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TransitionKind {
    /// Two blocks of type `i` merge into one block of type `i`.
    Pairwise,
    /// A single block changes type.
    Migration,
    /// Any other merger.
    MultiMerger,
}

impl TransitionKind {
    pub fn classify(k: &[u32], i: usize) -> Self {
        let total: u32 = k.iter().sum();
        if total == 1 {
            TransitionKind::Migration
        } else if total == 2 && k[i] == 2 {
            TransitionKind::Pairwise
        } else {
            TransitionKind::MultiMerger
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Transition<S> {
    pub target: S,
    pub rate: f64,
    pub kind: TransitionKind,
    pub result_type: usize,
    /// Number of blocks of each type taking part.
    pub merged: Vec<u32>,
}

fn check_merger(b: &[u32], k: &[u32], i: usize) -> Result<(), CoalescentError> {
    let d = b.len();
    if k.len() != d {
        return Err(CoalescentError::Dimension {
            expected: d,
            found: k.len(),
        });
    }
    if i >= d {
        return Err(CoalescentError::TypeIndex { i, d });
    }
    if k.iter().zip(b).any(|(k, b)| k > b) {
        return Err(CoalescentError::OutOfRange {
            b: b.to_vec(),
            k: k.to_vec(),
        });
    }
    let total: u32 = k.iter().sum();
    if total == 0 || (total == 1 && k[i] == 1) {
        return Err(CoalescentError::TrivialMerger { k: k.to_vec(), i });
    }
    Ok(())
}

/// Rate `λ^i_{b,k}` at which one particular selection of `k` out of `b`
/// blocks merges into a single type-`i` block.
pub fn lambda_rate(
    b: &BlockCounts,
    k: &[u32],
    i: usize,
    p: &CoalescentParams,
) -> Result<f64, CoalescentError> {
    if b.dim() != p.d() {
        return Err(CoalescentError::Dimension {
            expected: p.d(),
            found: b.dim(),
        });
    }
    check_merger(b.as_slice(), k, i)?;
    Ok(lambda_unchecked(b.as_slice(), k, i, p))
}

fn lambda_unchecked(b: &[u32], k: &[u32], i: usize, p: &CoalescentParams) -> f64 {
    let mut rate = 0.0;
    match TransitionKind::classify(k, i) {
        TransitionKind::Pairwise => rate += p.rho()[(i, i)],
        TransitionKind::Migration => {
            let j = k.iter().position(|&x| x == 1).expect("unit vector");
            rate += p.rho()[(i, j)];
        }
        TransitionKind::MultiMerger => {}
    }
    rate + p.q()[i].integrate(|u| merger_kernel(u, b, k))
}

/// Finite measure `Λ` on `[0, 1]` of a single-type Λ-coalescent.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalLambda {
    atoms: Vec<(f64, f64)>,
}

impl ClassicalLambda {
    /// Atoms as `(location, weight)`; repeated locations are merged.
    pub fn new(atoms: &[(f64, f64)]) -> Result<Self, CoalescentError> {
        let mut merged: Vec<(f64, f64)> = Vec::new();
        for &(x, w) in atoms {
            if !(0.0..=1.0).contains(&x) || !(w.is_finite() && w > 0.0) {
                return Err(CoalescentError::Params(ParamsError::InvalidAtom {
                    field: "Lambda".into(),
                    reason: format!("atom ({x}, {w}) must lie in [0,1] with positive weight"),
                }));
            }
            match merged.iter_mut().find(|(y, _)| *y == x) {
                Some(slot) => slot.1 += w,
                None => merged.push((x, w)),
            }
        }
        Ok(Self { atoms: merged })
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }
}

/// Recasts a classical `Λ` as the `d = 1` pair `(ρ, Q)`: `ρ = Λ({0})` and
/// `Q(du) = u^{-2} Λ(du)` on `(0, 1]`.
pub fn classical_lambda_to_q(lambda: &ClassicalLambda) -> Result<CoalescentParams, CoalescentError> {
    let mut rho = 0.0;
    let mut atoms = Vec::new();
    for &(x, w) in lambda.atoms() {
        if x == 0.0 {
            rho += w;
        } else {
            atoms.push(Atom::new(vec![x], w / (x * x)));
        }
    }
    let q = AtomicMeasure::new(1, Domain::UnitCube, atoms)?;
    Ok(CoalescentParams::new(DMatrix::from_element(1, 1, rho), vec![q])?)
}

/// Where block-counting rates come from.
#[derive(Debug, Clone, Copy)]
pub enum RateSource<'a> {
    /// Coalescent-native: `C(n, k) λ^i_{n,k}` from `(ρ, Q)`.
    Coalescent(&'a CoalescentParams),
    /// Dual of the sequentially sampled frequency process of a CSBP at mass
    /// level `z`, with rates computed directly from `(B, c, μ)`.
    Dual {
        params: &'a BranchingParams,
        z: &'a MassLevel,
    },
}

#[derive(Debug, Clone)]
enum Rates {
    Coalescent(CoalescentParams),
    Dual {
        /// `c_i / z_i`
        diffusion: Vec<f64>,
        /// `(i, j) ↦ b_ji z_i / z_j`
        migration: DMatrix<f64>,
        z: Vec<f64>,
        /// Atoms of `T_z μ_i`.
        images: Vec<AtomicMeasure>,
    },
}

/// The block-counting process `N` as a continuous-time Markov chain.
#[derive(Debug, Clone)]
pub struct BlockCountingChain {
    d: usize,
    rates: Rates,
}

impl BlockCountingChain {
    pub fn new(source: RateSource<'_>) -> Result<Self, CoalescentError> {
        match source {
            RateSource::Coalescent(p) => {
                let report = validate_coalescent(p);
                if !report.ok {
                    return Err(CoalescentError::InvalidParams(report.failed().join(", ")));
                }
                Ok(Self {
                    d: p.d(),
                    rates: Rates::Coalescent(p.clone()),
                })
            }
            RateSource::Dual { params, z } => {
                let report = validate_branching(params);
                if !report.ok {
                    return Err(CoalescentError::InvalidParams(report.failed().join(", ")));
                }
                let d = params.d();
                z.expect_dim(d)?;
                let migration = DMatrix::from_fn(d, d, |i, j| {
                    if i == j {
                        0.0
                    } else {
                        params.b()[(j, i)] * z[i] / z[j]
                    }
                });
                let images = params
                    .mu()
                    .iter()
                    .map(|m| pushforward(m, z))
                    .collect::<Result<_, _>>()?;
                Ok(Self {
                    d,
                    rates: Rates::Dual {
                        diffusion: (0..d).map(|i| params.c()[i] / z[i]).collect(),
                        migration,
                        z: z.as_slice().to_vec(),
                        images,
                    },
                })
            }
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Total rate of the move `n → n - k + e_i` (zero if impossible).
    fn rate(&self, n: &[u32], k: &[u32], i: usize) -> f64 {
        match &self.rates {
            Rates::Coalescent(p) => multi_binomial(n, k) * lambda_unchecked(n, k, i, p),
            Rates::Dual {
                diffusion,
                migration,
                z,
                images,
            } => {
                let mut rate = match TransitionKind::classify(k, i) {
                    TransitionKind::Pairwise => 2.0 * diffusion[i] * binomial(n[i], 2),
                    TransitionKind::Migration => {
                        let j = k.iter().position(|&x| x == 1).expect("unit vector");
                        f64::from(n[j]) * migration[(i, j)]
                    }
                    TransitionKind::MultiMerger => 0.0,
                };
                if !images[i].is_empty() {
                    rate += z[i] * multi_binomial(n, k) * images[i].integrate(|u| merger_kernel(u, n, k));
                }
                rate
            }
        }
    }

    /// Largest `|k|` with a possibly positive rate.
    fn max_merger(&self, n: &BlockCounts) -> u32 {
        let no_jumps = match &self.rates {
            Rates::Coalescent(p) => p.q().iter().all(AtomicMeasure::is_empty),
            Rates::Dual { images, .. } => images.iter().all(AtomicMeasure::is_empty),
        };
        if no_jumps {
            2
        } else {
            n.total()
        }
    }

    /// All moves out of `n` with positive rate, one per `(i, k)` pair.
    pub fn transitions(&self, n: &BlockCounts) -> Result<Vec<Transition<BlockCounts>>, CoalescentError> {
        if n.dim() != self.d {
            return Err(CoalescentError::Dimension {
                expected: self.d,
                found: n.dim(),
            });
        }
        let mut out = Vec::new();
        for k in SubIndices::bounded(n.as_slice(), self.max_merger(n)) {
            let total: u32 = k.iter().sum();
            if total == 0 {
                continue;
            }
            for i in 0..self.d {
                if total == 1 && k[i] == 1 {
                    continue;
                }
                let rate = self.rate(n.as_slice(), &k, i);
                if rate > 0.0 {
                    out.push(Transition {
                        target: n.merged(&k, i),
                        rate,
                        kind: TransitionKind::classify(&k, i),
                        result_type: i,
                        merged: k.clone(),
                    });
                }
            }
        }
        Ok(out)
    }

    pub fn total_rate(&self, n: &BlockCounts) -> Result<f64, CoalescentError> {
        Ok(self.transitions(n)?.iter().map(|t| t.rate).sum())
    }

    /// Full path on `[0, horizon]`.
    pub fn simulate(&self, n0: &BlockCounts, horizon: f64, seed: u64) -> Result<Trajectory<BlockCounts>, CoalescentError> {
        check_horizon(horizon)?;
        let mut rng = rng_from_seed(seed);
        let mut traj = Trajectory::new(n0.clone(), seed, format!("block-counting d={}", self.d));
        let end = run_ctmc(n0.clone(), horizon, &mut rng, |s| self.transitions(s), |t, s| {
            traj.push(t, s.clone())
        })?;
        traj.end = end;
        Ok(traj)
    }

    /// State at `horizon` only.
    pub fn endpoint(&self, n0: &BlockCounts, horizon: f64, rng: &mut SimRng) -> Result<BlockCounts, CoalescentError> {
        let mut last = n0.clone();
        run_ctmc(n0.clone(), horizon, rng, |s| self.transitions(s), |_, s| last = s.clone())?;
        Ok(last)
    }
}

pub(crate) fn check_horizon(horizon: f64) -> Result<(), CoalescentError> {
    if horizon.is_finite() && horizon >= 0.0 {
        Ok(())
    } else {
        Err(CoalescentError::Horizon(horizon))
    }
}

/// Gillespie loop: exponential holding times at the total rate, then a
/// categorical choice among the outgoing moves. `on_jump` sees every new
/// state with its jump time.
pub(crate) fn run_ctmc<S, R>(
    mut state: S,
    horizon: f64,
    rng: &mut R,
    mut transitions: impl FnMut(&S) -> Result<Vec<Transition<S>>, CoalescentError>,
    mut on_jump: impl FnMut(f64, &S),
) -> Result<PathEnd, CoalescentError>
where
    R: Rng + ?Sized,
{
    let mut t = 0.0;
    loop {
        let moves = transitions(&state)?;
        let total: f64 = moves.iter().map(|m| m.rate).sum();
        if total <= 0.0 {
            return Ok(PathEnd::Absorbed);
        }
        let hold: f64 = rng.sample::<f64, _>(Exp1) / total;
        t += hold;
        if t > horizon {
            return Ok(PathEnd::Horizon);
        }
        let mut pick = rng.random::<f64>() * total;
        let mut chosen = moves.len() - 1;
        for (idx, m) in moves.iter().enumerate() {
            if pick < m.rate {
                chosen = idx;
                break;
            }
            pick -= m.rate;
        }
        state = moves.into_iter().nth(chosen).expect("index in range").target;
        on_jump(t, &state);
    }
}

/// Outgoing moves of the block-counting chain from `n`.
pub fn enumerate_block_transitions(
    n: &BlockCounts,
    source: RateSource<'_>,
) -> Result<Vec<Transition<BlockCounts>>, CoalescentError> {
    BlockCountingChain::new(source)?.transitions(n)
}

pub fn simulate_block_counting(
    n0: &BlockCounts,
    source: RateSource<'_>,
    horizon: f64,
    seed: u64,
) -> Result<Trajectory<BlockCounts>, CoalescentError> {
    BlockCountingChain::new(source)?.simulate(n0, horizon, seed)
}
