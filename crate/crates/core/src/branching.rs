//! Euler-type simulation of `d`-type CSBPs, of an independent pair `(X, Y)`
//! and of the derived frequency/total-mass process `(R, Z)`.
//!
//! One step of length `h` is split into a drift-diffusion part with full
//! truncation at zero followed by a jump part whose Poisson counts are drawn
//! with rates frozen at the clamped state.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use thiserror::Error;

use crate::params::{truncation, validate_branching, BranchingParams, ParamsError};
use crate::rng::{poisson_count, rng_from_seed, SimRng};
use crate::trajectory::{time_grid, PathEnd, Trajectory};

/// Any coordinate above this value ends the path as exploded.
pub const EXPLOSION_THRESHOLD: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BranchingError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("time step must be positive and finite, got {0}")]
    Step(f64),
    #[error("horizon must be nonnegative and finite, got {0}")]
    Horizon(f64),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("initial state must be finite and nonnegative, got {0:?}")]
    InitialState(Vec<f64>),
    #[error("initial frequency must lie in [0, 1]^d, got {0:?}")]
    Frequency(Vec<f64>),
    #[error("guard rails need 0 < eps < min z <= max z < L, got eps={eps}, L={l}, z={z:?}")]
    GuardRails { eps: f64, l: f64, z: Vec<f64> },
    #[error(transparent)]
    Params(#[from] ParamsError),
}

/// Mass per colony.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct CsbpState {
    pub x: Vec<f64>,
}

impl CsbpState {
    pub fn new(x: Vec<f64>) -> Self {
        Self { x }
    }

    pub fn zeros(d: usize) -> Self {
        Self { x: vec![0.0; d] }
    }

    pub fn is_zero(&self) -> bool {
        self.x.iter().all(|&v| v == 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairState {
    pub x: CsbpState,
    pub y: CsbpState,
}

/// Frequency `R = X / (X + Y)` and total mass `Z = X + Y`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FreqMass {
    pub r: Vec<f64>,
    pub z: Vec<f64>,
    pub stopped: bool,
}

impl FreqMass {
    /// Coordinates with `Z_i = 0` keep `previous_r[i]`.
    fn from_pair(x: &[f64], y: &[f64], previous_r: &[f64]) -> Self {
        let z: Vec<f64> = x.iter().zip(y).map(|(a, b)| a + b).collect();
        let r = x
            .iter()
            .zip(&z)
            .zip(previous_r)
            .map(|((&xi, &zi), &ri)| if zi > 0.0 { (xi / zi).clamp(0.0, 1.0) } else { ri })
            .collect();
        Self { r, z, stopped: false }
    }
}

/// First-moment matrix `M` with `d/dt E[X(t)] = M E[X(t)]`, where
/// `M_ki = b_ki + ∫ (w_k - (1 ∧ w_i) 1{i = k}) μ_i(dw)`.
pub fn mean_matrix(p: &BranchingParams) -> DMatrix<f64> {
    let d = p.d();
    let mut m = p.b().clone();
    for (i, mu) in p.mu().iter().enumerate() {
        for k in 0..d {
            m[(k, i)] += mu.integrate(|w| w[k]);
        }
        m[(i, i)] -= mu.integrate(|w| truncation(w[i]));
    }
    m
}

/// `exp(t M) x0`.
pub fn mean_flow(p: &BranchingParams, x0: &[f64], t: f64) -> Vec<f64> {
    let flow = (mean_matrix(p) * t).exp();
    (flow * DVector::from_column_slice(x0)).iter().copied().collect()
}

fn check_step(dt: f64) -> Result<(), BranchingError> {
    if dt.is_finite() && dt > 0.0 {
        Ok(())
    } else {
        Err(BranchingError::Step(dt))
    }
}

fn check_horizon(horizon: f64) -> Result<(), BranchingError> {
    if horizon.is_finite() && horizon >= 0.0 {
        Ok(())
    } else {
        Err(BranchingError::Horizon(horizon))
    }
}

/// Splitting scheme for one CSBP.
#[derive(Debug, Clone)]
pub struct CsbpSimulator {
    d: usize,
    b: DMatrix<f64>,
    c: Vec<f64>,
    /// `∫ (1 ∧ w_k) μ_k(dw)`
    compensator: Vec<f64>,
    /// Per colony: `(w, weight)`.
    jumps: Vec<Vec<(Vec<f64>, f64)>>,
}

impl CsbpSimulator {
    pub fn new(p: &BranchingParams) -> Result<Self, BranchingError> {
        let report = validate_branching(p);
        if !report.ok {
            return Err(BranchingError::InvalidParams(report.failed().join(", ")));
        }
        let compensator = p
            .mu()
            .iter()
            .enumerate()
            .map(|(k, mu)| mu.integrate(|w| truncation(w[k])))
            .collect();
        let jumps = p
            .mu()
            .iter()
            .map(|mu| mu.atoms().iter().map(|a| (a.point.clone(), a.weight)).collect())
            .collect();
        Ok(Self {
            d: p.d(),
            b: p.b().clone(),
            c: p.c().to_vec(),
            compensator,
            jumps,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    fn check_state(&self, x: &[f64]) -> Result<(), BranchingError> {
        if x.len() != self.d {
            return Err(BranchingError::Dimension {
                expected: self.d,
                found: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(BranchingError::InitialState(x.to_vec()));
        }
        Ok(())
    }

    /// Advances `x` in place by one step of length `h`.
    pub fn step<R: Rng + ?Sized>(&self, x: &mut [f64], h: f64, rng: &mut R) {
        let d = self.d;
        let mut next = vec![0.0; d];
        for k in 0..d {
            let mut drift = -x[k] * self.compensator[k];
            for (i, &xi) in x.iter().enumerate() {
                drift += self.b[(k, i)] * xi;
            }
            let mut v = x[k] + h * drift;
            if self.c[k] > 0.0 && x[k] > 0.0 {
                let xi: f64 = rng.sample(StandardNormal);
                v += (2.0 * self.c[k] * x[k] * h).sqrt() * xi;
            }
            next[k] = v.max(0.0);
        }
        x.copy_from_slice(&next);
        for (i, atoms) in self.jumps.iter().enumerate() {
            if next[i] == 0.0 {
                continue;
            }
            for (w, weight) in atoms {
                let count = poisson_count(rng, next[i] * weight * h);
                if count > 0 {
                    for (xk, wk) in x.iter_mut().zip(w) {
                        *xk += count as f64 * wk;
                    }
                }
            }
        }
    }

    /// Steps `x` over `[0, horizon]`; stops early on absorption at zero or
    /// explosion. `on_step` sees every grid time and state.
    fn drive<R: Rng + ?Sized>(
        &self,
        x: &mut [f64],
        horizon: f64,
        dt: f64,
        rng: &mut R,
        mut on_step: impl FnMut(f64, &[f64]),
    ) -> PathEnd {
        if x.iter().all(|&v| v == 0.0) {
            return PathEnd::Absorbed;
        }
        for (t, h) in time_grid(horizon, dt) {
            self.step(x, h, rng);
            on_step(t, x);
            if x.iter().any(|&v| v > EXPLOSION_THRESHOLD) {
                return PathEnd::Exploded;
            }
            if x.iter().all(|&v| v == 0.0) {
                return PathEnd::Absorbed;
            }
        }
        PathEnd::Horizon
    }

    pub fn simulate(&self, x0: &[f64], horizon: f64, dt: f64, seed: u64) -> Result<Trajectory<CsbpState>, BranchingError> {
        self.check_state(x0)?;
        check_step(dt)?;
        check_horizon(horizon)?;
        let mut rng = rng_from_seed(seed);
        let mut traj = Trajectory::new(CsbpState::new(x0.to_vec()), seed, format!("csbp d={} dt={dt}", self.d));
        let mut x = x0.to_vec();
        let end = self.drive(&mut x, horizon, dt, &mut rng, |t, s| traj.push(t, CsbpState::new(s.to_vec())));
        traj.end = end;
        Ok(traj)
    }

    /// State at `horizon` (or at the explosion time) only.
    pub fn endpoint(&self, x0: &[f64], horizon: f64, dt: f64, rng: &mut SimRng) -> Result<(CsbpState, PathEnd), BranchingError> {
        self.check_state(x0)?;
        check_step(dt)?;
        check_horizon(horizon)?;
        let mut x = x0.to_vec();
        let end = self.drive(&mut x, horizon, dt, rng, |_, _| {});
        Ok((CsbpState::new(x), end))
    }
}

pub fn simulate_csbp(
    p: &BranchingParams,
    x0: &[f64],
    horizon: f64,
    dt: f64,
    seed: u64,
) -> Result<Trajectory<CsbpState>, BranchingError> {
    CsbpSimulator::new(p)?.simulate(x0, horizon, dt, seed)
}

/// Two independent copies of a CSBP viewed through `(R, Z)`, stopped once
/// any `Z_i` leaves `(eps, L)`.
#[derive(Debug, Clone)]
pub struct PairSimulator {
    csbp: CsbpSimulator,
    eps: f64,
    l: f64,
}

impl PairSimulator {
    pub fn new(p: &BranchingParams, eps: f64, l: f64) -> Result<Self, BranchingError> {
        if !(eps > 0.0 && l > eps) || eps.is_nan() || l.is_nan() {
            return Err(BranchingError::GuardRails { eps, l, z: vec![] });
        }
        Ok(Self {
            csbp: CsbpSimulator::new(p)?,
            eps,
            l,
        })
    }

    pub(crate) fn check_start(&self, r: &[f64], z: &[f64]) -> Result<(), BranchingError> {
        let d = self.csbp.d;
        for v in [r, z] {
            if v.len() != d {
                return Err(BranchingError::Dimension {
                    expected: d,
                    found: v.len(),
                });
            }
        }
        if r.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(BranchingError::Frequency(r.to_vec()));
        }
        if z.iter().any(|&v| !(v > self.eps && v < self.l)) {
            return Err(BranchingError::GuardRails {
                eps: self.eps,
                l: self.l,
                z: z.to_vec(),
            });
        }
        Ok(())
    }

    fn exited(&self, z: &[f64]) -> bool {
        z.iter().any(|&v| !(v > self.eps && v < self.l))
    }

    fn drive<R: Rng + ?Sized>(
        &self,
        r0: &[f64],
        z0: &[f64],
        duration: f64,
        dt: f64,
        rng: &mut R,
        mut on_step: impl FnMut(f64, &FreqMass),
    ) -> FreqMass {
        let mut x: Vec<f64> = r0.iter().zip(z0).map(|(r, z)| r * z).collect();
        let mut y: Vec<f64> = x.iter().zip(z0).map(|(xi, z)| z - xi).collect();
        let mut current = FreqMass {
            r: r0.to_vec(),
            z: z0.to_vec(),
            stopped: false,
        };
        for (t, h) in time_grid(duration, dt) {
            self.csbp.step(&mut x, h, rng);
            self.csbp.step(&mut y, h, rng);
            current = FreqMass::from_pair(&x, &y, &current.r);
            current.stopped = self.exited(&current.z);
            on_step(t, &current);
            if current.stopped {
                break;
            }
        }
        current
    }

    /// `(R, Z)` at `duration ∧ τ` from `(r, z)`.
    pub fn advance<R: Rng + ?Sized>(&self, r: &[f64], z: &[f64], duration: f64, dt: f64, rng: &mut R) -> FreqMass {
        self.drive(r, z, duration, dt, rng, |_, _| {})
    }

    pub fn simulate(&self, r0: &[f64], z0: &[f64], horizon: f64, dt: f64, seed: u64) -> Result<Trajectory<FreqMass>, BranchingError> {
        self.check_start(r0, z0)?;
        check_step(dt)?;
        check_horizon(horizon)?;
        let mut rng = rng_from_seed(seed);
        let start = FreqMass {
            r: r0.to_vec(),
            z: z0.to_vec(),
            stopped: false,
        };
        let meta = format!("pair d={} dt={dt} eps={} L={}", self.csbp.d, self.eps, self.l);
        let mut traj = Trajectory::new(start, seed, meta);
        let last = self.drive(r0, z0, horizon, dt, &mut rng, |t, s| traj.push(t, s.clone()));
        if last.stopped {
            traj.end = PathEnd::Stopped;
        }
        Ok(traj)
    }
}

#[allow(clippy::too_many_arguments)]
pub fn simulate_pair_rz(
    p: &BranchingParams,
    r0: &[f64],
    z0: &[f64],
    horizon: f64,
    dt: f64,
    seed: u64,
    eps: f64,
    l: f64,
) -> Result<Trajectory<FreqMass>, BranchingError> {
    PairSimulator::new(p, eps, l)?.simulate(r0, z0, horizon, dt, seed)
}
