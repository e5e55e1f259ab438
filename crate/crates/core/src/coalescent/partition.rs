use std::collections::HashMap;

use serde::Serialize;

use super::{
    check_horizon, lambda_unchecked, run_ctmc, BlockCounts, CoalescentError, Transition,
    TransitionKind,
};
use crate::params::{validate_coalescent, CoalescentParams};
use crate::rng::rng_from_seed;
use crate::trajectory::Trajectory;

/// Upper limit on the number of blocks for exhaustive subset enumeration.
pub const MAX_BLOCKS: usize = 20;

/// Nonempty block of a typed partition. Elements are drawn from `1..=M`
/// and kept sorted; `ty` is a 0-based type index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Block {
    pub elements: Vec<usize>,
    #[serde(rename = "type")]
    pub ty: usize,
}

impl Block {
    pub fn new(mut elements: Vec<usize>, ty: usize) -> Self {
        elements.sort_unstable();
        Self { elements, ty }
    }

    fn least(&self) -> usize {
        self.elements[0]
    }
}

/// Partition of `[M] = {1, ..., M}` whose blocks carry types, ordered by
/// least element. Empty blocks are not stored.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct TypedPartition {
    size: usize,
    blocks: Vec<Block>,
}

impl TypedPartition {
    pub fn new(size: usize, mut blocks: Vec<Block>) -> Result<Self, CoalescentError> {
        let bad = |msg: String| Err(CoalescentError::InvalidPartition(msg));
        if size == 0 {
            return bad("ground set must be nonempty".into());
        }
        let mut seen = vec![false; size + 1];
        for block in &mut blocks {
            block.elements.sort_unstable();
            if block.elements.is_empty() {
                return bad("empty block".into());
            }
            for &e in &block.elements {
                if e == 0 || e > size {
                    return bad(format!("element {e} outside 1..={size}"));
                }
                if std::mem::replace(&mut seen[e], true) {
                    return bad(format!("element {e} appears twice"));
                }
            }
        }
        if let Some(e) = (1..=size).find(|&e| !seen[e]) {
            return bad(format!("element {e} is not covered"));
        }
        blocks.sort_by_key(Block::least);
        Ok(Self { size, blocks })
    }

    /// `{1}, {2}, ..., {M}` with `types[e - 1]` the type of `{e}`.
    pub fn singletons(types: &[usize]) -> Result<Self, CoalescentError> {
        let blocks = types
            .iter()
            .enumerate()
            .map(|(e, &ty)| Block::new(vec![e + 1], ty))
            .collect();
        Self::new(types.len(), blocks)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block_counts(&self, d: usize) -> BlockCounts {
        let mut n = vec![0; d];
        for b in &self.blocks {
            n[b.ty] += 1;
        }
        BlockCounts::new(n)
    }

    /// Multiset of block sizes, sorted decreasingly.
    pub fn block_sizes(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.blocks.iter().map(|b| b.elements.len()).collect();
        s.sort_unstable_by(|a, b| b.cmp(a));
        s
    }

    /// Type of the block containing `e`.
    pub fn type_of(&self, e: usize) -> Option<usize> {
        self.blocks
            .iter()
            .find(|b| b.elements.binary_search(&e).is_ok())
            .map(|b| b.ty)
    }

    /// Applies a bijection `σ` of `[M]`, given as `sigma[e - 1] = σ(e)`.
    pub fn relabel(&self, sigma: &[usize]) -> Result<Self, CoalescentError> {
        if sigma.len() != self.size {
            return Err(CoalescentError::GroundSetMismatch(self.size, sigma.len()));
        }
        let blocks = self
            .blocks
            .iter()
            .map(|b| Block::new(b.elements.iter().map(|&e| sigma[e - 1]).collect(), b.ty))
            .collect();
        Self::new(self.size, blocks)
    }

    fn check_types(&self, d: usize) -> Result<(), CoalescentError> {
        match self.blocks.iter().find(|b| b.ty >= d) {
            Some(b) => Err(CoalescentError::TypeIndex { i: b.ty, d }),
            None => Ok(()),
        }
    }
}

/// `π|[m]`: blocks intersected with `[m]`, empty ones dropped.
pub fn restrict(pi: &TypedPartition, m: usize) -> Result<TypedPartition, CoalescentError> {
    if m == 0 || m > pi.size {
        return Err(CoalescentError::RestrictionLevel { m, size: pi.size });
    }
    let blocks = pi
        .blocks
        .iter()
        .filter_map(|b| {
            let kept: Vec<usize> = b.elements.iter().copied().take_while(|&e| e <= m).collect();
            (!kept.is_empty()).then_some(Block { elements: kept, ty: b.ty })
        })
        .collect();
    // Still ordered by least element: restriction keeps each least element.
    Ok(TypedPartition { size: m, blocks })
}

/// `1 / max{m : π|[m] = π'|[m]}` on a finite ground set, with `0` when the
/// partitions coincide and `2` when they already differ on `[1]`.
pub fn partition_distance(a: &TypedPartition, b: &TypedPartition) -> Result<f64, CoalescentError> {
    if a.size != b.size {
        return Err(CoalescentError::GroundSetMismatch(a.size, b.size));
    }
    if a == b {
        return Ok(0.0);
    }
    let mut agree = 0;
    for m in 1..=a.size {
        if restrict(a, m)? != restrict(b, m)? {
            break;
        }
        agree = m;
    }
    Ok(if agree == 0 { 2.0 } else { 1.0 / agree as f64 })
}

/// The typed-partition chain `Π|[M]`.
#[derive(Debug, Clone)]
pub struct PartitionChain {
    params: CoalescentParams,
}

impl PartitionChain {
    pub fn new(params: &CoalescentParams) -> Result<Self, CoalescentError> {
        let report = validate_coalescent(params);
        if !report.ok {
            return Err(CoalescentError::InvalidParams(report.failed().join(", ")));
        }
        Ok(Self {
            params: params.clone(),
        })
    }

    /// One move per (block subset, result type) with positive rate.
    pub fn transitions(&self, pi: &TypedPartition) -> Result<Vec<Transition<TypedPartition>>, CoalescentError> {
        let d = self.params.d();
        pi.check_types(d)?;
        let nblocks = pi.blocks.len();
        if nblocks > MAX_BLOCKS {
            return Err(CoalescentError::TooManyBlocks(nblocks));
        }
        let counts = pi.block_counts(d);
        let mut cache: HashMap<(Vec<u32>, usize), f64> = HashMap::new();
        let mut out = Vec::new();
        for mask in 1u32..(1 << nblocks) {
            let mut k = vec![0u32; d];
            for (idx, b) in pi.blocks.iter().enumerate() {
                if mask & (1 << idx) != 0 {
                    k[b.ty] += 1;
                }
            }
            let total: u32 = k.iter().sum();
            for i in 0..d {
                if total == 1 && k[i] == 1 {
                    continue;
                }
                let rate = *cache
                    .entry((k.clone(), i))
                    .or_insert_with(|| lambda_unchecked(counts.as_slice(), &k, i, &self.params));
                if rate <= 0.0 {
                    continue;
                }
                out.push(Transition {
                    target: merge_blocks(pi, mask, i),
                    rate,
                    kind: TransitionKind::classify(&k, i),
                    result_type: i,
                    merged: k.clone(),
                });
            }
        }
        Ok(out)
    }

    pub fn simulate(&self, pi0: &TypedPartition, horizon: f64, seed: u64) -> Result<Trajectory<TypedPartition>, CoalescentError> {
        check_horizon(horizon)?;
        pi0.check_types(self.params.d())?;
        let mut rng = rng_from_seed(seed);
        let mut traj = Trajectory::new(pi0.clone(), seed, format!("typed-partition M={}", pi0.size));
        let end = run_ctmc(pi0.clone(), horizon, &mut rng, |s| self.transitions(s), |t, s| {
            traj.push(t, s.clone())
        })?;
        traj.end = end;
        Ok(traj)
    }
}

fn merge_blocks(pi: &TypedPartition, mask: u32, ty: usize) -> TypedPartition {
    let mut merged = Vec::new();
    let mut blocks = Vec::with_capacity(pi.blocks.len());
    for (idx, b) in pi.blocks.iter().enumerate() {
        if mask & (1 << idx) != 0 {
            merged.extend_from_slice(&b.elements);
        } else {
            blocks.push(b.clone());
        }
    }
    blocks.push(Block::new(merged, ty));
    blocks.sort_by_key(Block::least);
    TypedPartition { size: pi.size, blocks }
}

pub fn enumerate_partition_transitions(
    pi: &TypedPartition,
    p: &CoalescentParams,
) -> Result<Vec<Transition<TypedPartition>>, CoalescentError> {
    PartitionChain::new(p)?.transitions(pi)
}

pub fn simulate_partition(
    pi0: &TypedPartition,
    p: &CoalescentParams,
    horizon: f64,
    seed: u64,
) -> Result<Trajectory<TypedPartition>, CoalescentError> {
    PartitionChain::new(p)?.simulate(pi0, horizon, seed)
}
