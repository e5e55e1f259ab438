//! Simulation and verification of multitype Λ-coalescents and multitype
//! continuous-state branching processes (CSBPs).
//!
//! The crate is organised around the two parameter worlds and the bridges
//! between them:
//!
//! * [`params`]: finite atomic measures, the CSBP triplet `(B, c, μ)` and the
//!   coalescent pair `(ρ, Q)`, together with their validation.
//! * [`transform`]: the coordinatewise map `w ↦ w / (w + z)` and the explicit
//!   bijection `H_z` between branching and coalescent parameters.
//! * [`coalescent`]: merger rates, the block-counting chain and the
//!   partition-valued chain on `[M]`.
//! * [`branching`]: Euler-type simulation of the CSBP, of an independent pair
//!   `(X, Y)` and of the derived frequency/total-mass process.
//! * [`frequency`]: the sequentially sampled frequency process, both through
//!   the culling scheme and through its limiting jump-diffusion, plus the
//!   action of its generator on monomials.
//! * [`duality`]: Monte Carlo and exact evaluation of both sides of the
//!   moment duality `E_r[R(t)^n] = E_n[r^N(t)]`.
//!
//! All simulators are deterministic functions of their inputs and a `u64`
//! seed; see [`rng::derive_seed`] for how per-replicate streams are derived.

pub mod branching;
pub mod coalescent;
pub mod duality;
mod error;
pub mod frequency;
pub mod multiindex;
pub mod params;
pub mod rng;
pub mod stats;
pub mod trajectory;
pub mod transform;

pub use crate::branching::{BranchingError, CsbpState, FreqMass, PairState};
pub use crate::coalescent::{
    BlockCounts, CoalescentError, RateSource, Transition, TransitionKind, TypedPartition,
};
pub use crate::duality::{DualityError, DualityReport, MomentEstimate};
pub use crate::error::{Error, Result};
pub use crate::frequency::{FreqParams, FrequencyError, SeqSampleConfig};
pub use crate::params::{
    Atom, AtomicMeasure, BranchingParams, CoalescentParams, Domain, ParamsError, ValidationReport,
};
pub use crate::trajectory::{PathEnd, Trajectory};
pub use crate::transform::{DiagonalAnchor, MassLevel, TransformError};
