//! The sequentially sampled frequency process at a fixed mass level `z`:
//! its limiting jump-diffusion, the culling scheme that approximates it,
//! and the action of its generator on monomials `r^n`.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::Serialize;
use thiserror::Error;

use crate::branching::{BranchingError, PairSimulator};
use crate::coalescent::BlockCounts;
use crate::multiindex::{monomial, multi_binomial, SubIndices};
use crate::params::{validate_branching, AtomicMeasure, BranchingParams};
use crate::rng::{poisson_count, rng_from_seed, SimRng};
use crate::trajectory::{time_grid, Trajectory};
use crate::transform::{pushforward, MassLevel, TransformError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrequencyError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("frequency must lie in [0, 1]^d, got {0:?}")]
    OutsideCube(Vec<f64>),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("time step must be positive and finite, got {0}")]
    Step(f64),
    #[error("horizon must be nonnegative and finite, got {0}")]
    Horizon(f64),
    #[error("sampling config: {0}")]
    Config(String),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Branching(#[from] BranchingError),
}

/// Coefficients of the limiting frequency dynamics at mass level `z`.
#[derive(Debug, Clone, Serialize)]
pub struct FreqParams {
    #[serde(serialize_with = "ser_slice")]
    pub z: MassLevel,
    /// `b_ij z_j / z_i` off the diagonal, zero on it.
    #[serde(serialize_with = "ser_matrix")]
    pub migration: DMatrix<f64>,
    /// `β_ij = b_ij z_j / z_i + z_j ∫ u_i T_zμ_j(du)` off the diagonal.
    #[serde(serialize_with = "ser_matrix")]
    pub drift: DMatrix<f64>,
    /// `γ_i = 2 c_i / z_i`
    pub diffusion: Vec<f64>,
    /// `T_zμ_j`, indexed by source type `j`.
    pub jump_atoms: Vec<AtomicMeasure>,
}

fn ser_slice<S: serde::Serializer>(z: &MassLevel, s: S) -> Result<S::Ok, S::Error> {
    z.as_slice().serialize(s)
}

fn ser_matrix<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
    rows.serialize(s)
}

impl FreqParams {
    pub fn d(&self) -> usize {
        self.diffusion.len()
    }

    fn check_r(&self, r: &[f64]) -> Result<(), FrequencyError> {
        if r.len() != self.d() {
            return Err(FrequencyError::Dimension {
                expected: self.d(),
                found: r.len(),
            });
        }
        if r.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(FrequencyError::OutsideCube(r.to_vec()));
        }
        Ok(())
    }
}

pub fn build_freq_params(p: &BranchingParams, z: &MassLevel) -> Result<FreqParams, FrequencyError> {
    let report = validate_branching(p);
    if !report.ok {
        return Err(FrequencyError::InvalidParams(report.failed().join(", ")));
    }
    let d = p.d();
    z.expect_dim(d)?;
    let jump_atoms = p
        .mu()
        .iter()
        .map(|m| pushforward(m, z))
        .collect::<Result<Vec<_>, _>>()?;
    let mut migration = DMatrix::zeros(d, d);
    let mut drift = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in (0..d).filter(|&j| j != i) {
            migration[(i, j)] = p.b()[(i, j)] * z[j] / z[i];
            drift[(i, j)] = migration[(i, j)] + z[j] * jump_atoms[j].integrate(|u| u[i]);
        }
    }
    Ok(FreqParams {
        z: z.clone(),
        migration,
        drift,
        diffusion: p.c().iter().enumerate().map(|(i, c)| 2.0 * c / z[i]).collect(),
        jump_atoms,
    })
}

/// The two ways a jump event moves every coordinate at once.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JumpFamily {
    /// `r ← r + (1 - r) ⊙ u`
    Up,
    /// `r ← r - r ⊙ u`
    Down,
}

pub fn apply_jump(r: &mut [f64], u: &[f64], family: JumpFamily) {
    for (ri, ui) in r.iter_mut().zip(u) {
        *ri = match family {
            JumpFamily::Up => *ri + (1.0 - *ri) * ui,
            JumpFamily::Down => *ri - *ri * ui,
        };
    }
}

/// `comp_i(R) = -Σ_j Σ_atoms λ u_i (1 - R_i) z_j R_j + Σ_j Σ_atoms λ u_i R_i z_j (1 - R_j)`.
pub fn compensator(fp: &FreqParams, r: &[f64]) -> Vec<f64> {
    (0..fp.d())
        .map(|i| {
            let mut total = 0.0;
            for (j, atoms) in fp.jump_atoms.iter().enumerate() {
                let zj = fp.z[j];
                for a in atoms.atoms() {
                    let lu = a.weight * a.point[i];
                    total += -lu * (1.0 - r[i]) * zj * r[j] + lu * r[i] * zj * (1.0 - r[j]);
                }
            }
            total
        })
        .collect()
}

/// Euler scheme for the limiting frequency dynamics.
#[derive(Debug, Clone)]
pub struct LimitSde {
    fp: FreqParams,
    /// Flattened `(source j, u, λ)`.
    atoms: Vec<(usize, Vec<f64>, f64)>,
}

impl LimitSde {
    pub fn new(fp: &FreqParams) -> Self {
        let atoms = fp
            .jump_atoms
            .iter()
            .enumerate()
            .flat_map(|(j, m)| m.atoms().iter().map(move |a| (j, a.point.clone(), a.weight)))
            .collect();
        Self { fp: fp.clone(), atoms }
    }

    pub fn params(&self) -> &FreqParams {
        &self.fp
    }

    pub fn step<R: Rng + ?Sized>(&self, r: &mut [f64], h: f64, rng: &mut R) {
        let fp = &self.fp;
        let d = fp.d();
        let comp = compensator(fp, r);
        let mut next = vec![0.0; d];
        for i in 0..d {
            let mut drift = comp[i];
            for j in (0..d).filter(|&j| j != i) {
                drift += fp.drift[(i, j)] * (r[j] - r[i]);
            }
            let mut v = r[i] + h * drift;
            let var = fp.diffusion[i] * r[i] * (1.0 - r[i]);
            if var > 0.0 {
                let xi: f64 = rng.sample(StandardNormal);
                v += (var * h).sqrt() * xi;
            }
            next[i] = v.clamp(0.0, 1.0);
        }
        let frozen = next.clone();
        for (j, u, lambda) in &self.atoms {
            let zj = fp.z[*j];
            let up = poisson_count(rng, zj * frozen[*j] * lambda * h);
            let down = poisson_count(rng, zj * (1.0 - frozen[*j]) * lambda * h);
            for _ in 0..up {
                apply_jump(&mut next, u, JumpFamily::Up);
            }
            for _ in 0..down {
                apply_jump(&mut next, u, JumpFamily::Down);
            }
        }
        r.copy_from_slice(&next);
    }

    fn drive<R: Rng + ?Sized>(&self, r: &mut [f64], horizon: f64, dt: f64, rng: &mut R, mut on_step: impl FnMut(f64, &[f64])) {
        for (t, h) in time_grid(horizon, dt) {
            self.step(r, h, rng);
            on_step(t, r);
        }
    }

    fn check(&self, r0: &[f64], horizon: f64, dt: f64) -> Result<(), FrequencyError> {
        self.fp.check_r(r0)?;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(FrequencyError::Step(dt));
        }
        if !(horizon.is_finite() && horizon >= 0.0) {
            return Err(FrequencyError::Horizon(horizon));
        }
        Ok(())
    }

    pub fn simulate(&self, r0: &[f64], horizon: f64, dt: f64, seed: u64) -> Result<Trajectory<Vec<f64>>, FrequencyError> {
        self.check(r0, horizon, dt)?;
        let mut rng = rng_from_seed(seed);
        let mut traj = Trajectory::new(r0.to_vec(), seed, format!("limit-sde d={} dt={dt}", self.fp.d()));
        let mut r = r0.to_vec();
        self.drive(&mut r, horizon, dt, &mut rng, |t, s| traj.push(t, s.to_vec()));
        Ok(traj)
    }

    pub fn endpoint(&self, r0: &[f64], horizon: f64, dt: f64, rng: &mut SimRng) -> Result<Vec<f64>, FrequencyError> {
        self.check(r0, horizon, dt)?;
        let mut r = r0.to_vec();
        self.drive(&mut r, horizon, dt, rng, |_, _| {});
        Ok(r)
    }
}

pub fn simulate_limit_sde(
    fp: &FreqParams,
    r0: &[f64],
    horizon: f64,
    dt: f64,
    seed: u64,
) -> Result<Trajectory<Vec<f64>>, FrequencyError> {
    LimitSde::new(fp).simulate(r0, horizon, dt, seed)
}

/// Culling scheme settings. `l` is the upper guard rail `L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeqSampleConfig {
    pub n: u32,
    pub eps: f64,
    pub l: f64,
    pub inner_dt: f64,
}

impl SeqSampleConfig {
    /// Guard rails `eps = z_min / 10`, `L = 10 z_max` and the coarsest
    /// admissible inner step.
    pub fn for_level(n: u32, z: &MassLevel) -> Self {
        let zs = z.as_slice();
        let zmin = zs.iter().copied().fold(f64::INFINITY, f64::min);
        let zmax = zs.iter().copied().fold(0.0, f64::max);
        Self {
            n,
            eps: 0.1 * zmin,
            l: 10.0 * zmax,
            inner_dt: 0.1 / f64::from(n.max(1)),
        }
    }

    pub fn validate(&self, z: &MassLevel) -> Result<(), FrequencyError> {
        let bad = |msg: String| Err(FrequencyError::Config(msg));
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        let zs = z.as_slice();
        let zmin = zs.iter().copied().fold(f64::INFINITY, f64::min);
        let zmax = zs.iter().copied().fold(0.0, f64::max);
        if !(self.eps > 0.0 && self.eps < zmin && zmax < self.l) {
            return bad(format!("need 0 < eps < min z <= max z < L, got eps={}, L={}", self.eps, self.l));
        }
        let cap = 1.0 / (10.0 * f64::from(self.n));
        if !(self.inner_dt > 0.0 && self.inner_dt <= cap * (1.0 + 1e-12)) {
            return bad(format!("inner_dt must lie in (0, 1/(10n)] = (0, {cap}], got {}", self.inner_dt));
        }
        Ok(())
    }
}

/// Culling: a rate-`n` Poisson clock, at each tick a fresh `(R, Z)` run from
/// `(R, z)` over `1/n ∧ τ`.
#[derive(Debug, Clone)]
pub struct SequentialSampler {
    pair: PairSimulator,
    z: MassLevel,
    cfg: SeqSampleConfig,
}

impl SequentialSampler {
    pub fn new(p: &BranchingParams, z: &MassLevel, cfg: SeqSampleConfig) -> Result<Self, FrequencyError> {
        z.expect_dim(p.d())?;
        cfg.validate(z)?;
        Ok(Self {
            pair: PairSimulator::new(p, cfg.eps, cfg.l)?,
            z: z.clone(),
            cfg,
        })
    }

    fn skeleton_step<R: Rng + ?Sized>(&self, r: &[f64], rng: &mut R) -> Vec<f64> {
        let duration = 1.0 / f64::from(self.cfg.n);
        self.pair.advance(r, self.z.as_slice(), duration, self.cfg.inner_dt, rng).r
    }

    fn drive<R: Rng + ?Sized>(&self, r0: &[f64], horizon: f64, rng: &mut R, mut on_jump: impl FnMut(f64, &[f64])) -> Vec<f64> {
        let rate = f64::from(self.cfg.n);
        let mut r = r0.to_vec();
        let mut t = 0.0;
        loop {
            t += rng.sample::<f64, _>(Exp1) / rate;
            if t > horizon {
                return r;
            }
            r = self.skeleton_step(&r, rng);
            on_jump(t, &r);
        }
    }

    fn check(&self, r0: &[f64], horizon: f64) -> Result<(), FrequencyError> {
        self.pair.check_start(r0, self.z.as_slice())?;
        if !(horizon.is_finite() && horizon >= 0.0) {
            return Err(FrequencyError::Horizon(horizon));
        }
        Ok(())
    }

    /// `R̄ⁿ` on `[0, horizon]`, one state per skeleton jump.
    pub fn simulate(&self, r0: &[f64], horizon: f64, seed: u64) -> Result<Trajectory<Vec<f64>>, FrequencyError> {
        self.check(r0, horizon)?;
        let mut rng = rng_from_seed(seed);
        let meta = format!(
            "culling n={} eps={} L={} inner_dt={}",
            self.cfg.n, self.cfg.eps, self.cfg.l, self.cfg.inner_dt
        );
        let mut traj = Trajectory::new(r0.to_vec(), seed, meta);
        self.drive(r0, horizon, &mut rng, |t, r| traj.push(t, r.to_vec()));
        Ok(traj)
    }

    pub fn endpoint(&self, r0: &[f64], horizon: f64, rng: &mut SimRng) -> Result<Vec<f64>, FrequencyError> {
        self.check(r0, horizon)?;
        Ok(self.drive(r0, horizon, rng, |_, _| {}))
    }
}

pub fn sequential_sampling(
    p: &BranchingParams,
    z: &MassLevel,
    r0: &[f64],
    cfg: SeqSampleConfig,
    horizon: f64,
    seed: u64,
) -> Result<Trajectory<Vec<f64>>, FrequencyError> {
    SequentialSampler::new(p, z, cfg)?.simulate(r0, horizon, seed)
}

/// `A^{(z)} r^n` as a finite sum over block-counting moves.
pub fn generator_on_monomial(fp: &FreqParams, n: &BlockCounts, r: &[f64]) -> Result<f64, FrequencyError> {
    fp.check_r(r)?;
    let d = fp.d();
    if n.dim() != d {
        return Err(FrequencyError::Dimension {
            expected: d,
            found: n.dim(),
        });
    }
    let n = n.as_slice();
    let base = monomial(r, n);
    let shifted = |k: &[u32], i: usize| {
        let mut m = n.to_vec();
        for (mj, kj) in m.iter_mut().zip(k) {
            *mj -= kj;
        }
        m[i] += 1;
        monomial(r, &m)
    };
    let mut total = 0.0;
    for i in 0..d {
        if n[i] >= 2 {
            let pairs = f64::from(n[i]) * f64::from(n[i] - 1) / 2.0;
            let mut k = vec![0; d];
            k[i] = 2;
            total += fp.diffusion[i] * pairs * (shifted(&k, i) - base);
        }
        if n[i] >= 1 {
            let mut k = vec![0; d];
            k[i] = 1;
            for j in (0..d).filter(|&j| j != i) {
                total += f64::from(n[i]) * fp.migration[(i, j)] * (shifted(&k, j) - base);
            }
        }
    }
    for (i, image) in fp.jump_atoms.iter().enumerate() {
        if image.is_empty() {
            continue;
        }
        for k in SubIndices::new(n) {
            let size: u32 = k.iter().sum();
            if size == 0 || (size == 1 && k[i] == 1) {
                continue;
            }
            let lambda = image.integrate(|u| crate::multiindex::merger_kernel(u, n, &k));
            total += fp.z[i] * multi_binomial(n, &k) * lambda * (shifted(&k, i) - base);
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;
    use crate::params::{Atom, Domain};
    use crate::rng::derive_seed;

    fn two_type(mu2: Vec<Atom>) -> BranchingParams {
        let b = DMatrix::from_row_slice(2, 2, &[-0.5, 0.5, 0.5, -0.5]);
        let mu = vec![
            AtomicMeasure::empty(2, Domain::PositiveOrthant),
            AtomicMeasure::new(2, Domain::PositiveOrthant, mu2).unwrap(),
        ];
        BranchingParams::new(b, vec![1.0, 1.0], mu).unwrap()
    }

    fn level(z: &[f64]) -> MassLevel {
        MassLevel::new(z.to_vec()).unwrap()
    }

    #[test]
    fn build_without_jumps() {
        let fp = build_freq_params(&two_type(vec![]), &level(&[1.0, 2.0])).unwrap();
        assert_eq!(fp.drift[(0, 1)], 0.5 * 2.0);
        assert_eq!(fp.drift[(1, 0)], 0.5 * 0.5);
        assert_eq!(fp.diffusion, vec![2.0, 1.0]);
        assert!(fp.jump_atoms.iter().all(AtomicMeasure::is_empty));
    }

    #[test]
    fn build_with_one_atom() {
        let p = two_type(vec![Atom::new(vec![1.0, 1.0], 1.0)]);
        let fp = build_freq_params(&p, &level(&[1.0, 1.0])).unwrap();
        assert_eq!(fp.jump_atoms[1].atoms()[0].point, vec![0.5, 0.5]);
        assert_abs_diff_eq!(fp.drift[(0, 1)], 0.5 + 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(fp.drift[(1, 0)], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn single_type_has_no_offdiagonal_drift() {
        let mu = AtomicMeasure::new(1, Domain::PositiveOrthant, vec![Atom::new(vec![1.0], 1.0)]).unwrap();
        let p = BranchingParams::new(DMatrix::from_element(1, 1, 0.3), vec![1.0], vec![mu]).unwrap();
        let fp = build_freq_params(&p, &level(&[3.0])).unwrap();
        assert_eq!(fp.drift.len(), 1);
        assert_eq!(fp.drift[(0, 0)], 0.0);
        assert_eq!(fp.diffusion, vec![2.0 / 3.0]);
        assert_eq!(fp.jump_atoms[0].atoms()[0].point, vec![0.25]);
    }

    #[test]
    fn jump_maps() {
        let mut r = vec![0.4, 0.8];
        apply_jump(&mut r, &[0.5, 0.25], JumpFamily::Up);
        assert_abs_diff_eq!(r[0], 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(r[1], 0.85, epsilon = 1e-15);
        let mut r = vec![0.4, 0.8];
        apply_jump(&mut r, &[0.5, 0.25], JumpFamily::Down);
        assert_abs_diff_eq!(r[0], 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(r[1], 0.6, epsilon = 1e-15);
    }

    #[test]
    fn boundaries_are_absorbing_without_migration() {
        let mu = AtomicMeasure::new(2, Domain::PositiveOrthant, vec![Atom::new(vec![1.0, 2.0], 3.0)]).unwrap();
        let p = BranchingParams::new(DMatrix::zeros(2, 2), vec![1.0, 2.0], vec![mu.clone(), mu]).unwrap();
        let fp = build_freq_params(&p, &level(&[1.0, 2.0])).unwrap();
        for r0 in [[0.0, 0.0], [1.0, 1.0]] {
            let tr = simulate_limit_sde(&fp, &r0, 1.0, 1e-2, 5).unwrap();
            assert!(tr.states.iter().all(|s| s[..] == r0[..]));
        }
    }

    #[test]
    fn no_jumps_means_no_compensator() {
        let fp = build_freq_params(&two_type(vec![]), &level(&[1.0, 2.0])).unwrap();
        assert_eq!(compensator(&fp, &[0.3, 0.9]), vec![0.0, 0.0]);
    }

    #[test]
    fn sde_stays_in_cube() {
        let p = two_type(vec![Atom::new(vec![5.0, 9.0], 4.0)]);
        let fp = build_freq_params(&p, &level(&[0.5, 0.5])).unwrap();
        let tr = simulate_limit_sde(&fp, &[0.5, 0.5], 2.0, 1e-2, 9).unwrap();
        assert!(tr.states.iter().flatten().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn generator_examples() {
        let p = BranchingParams::diffusion(DMatrix::zeros(2, 2), vec![1.0, 0.5]).unwrap();
        let fp = build_freq_params(&p, &level(&[1.0, 2.0])).unwrap();
        let g = generator_on_monomial(&fp, &BlockCounts::unit(2, 0), &[0.3, 0.6]).unwrap();
        assert_eq!(g, 0.0);

        let p = BranchingParams::diffusion(DMatrix::zeros(1, 1), vec![1.0]).unwrap();
        let fp = build_freq_params(&p, &level(&[2.0])).unwrap();
        for r in [0.0, 0.25, 0.7, 1.0] {
            let g = generator_on_monomial(&fp, &BlockCounts::new(vec![2]), &[r]).unwrap();
            assert_abs_diff_eq!(g, r - r * r, epsilon = 1e-15);
        }
    }

    #[test]
    fn config_validation() {
        let z = level(&[1.0, 2.0]);
        let cfg = SeqSampleConfig::for_level(8, &z);
        assert!(cfg.validate(&z).is_ok());
        assert!(SeqSampleConfig { inner_dt: 0.1, ..cfg }.validate(&z).is_err());
        assert!(SeqSampleConfig { eps: 1.0, ..cfg }.validate(&z).is_err());
        assert!(SeqSampleConfig { l: 2.0, ..cfg }.validate(&z).is_err());
        assert!(SeqSampleConfig { n: 0, ..cfg }.validate(&z).is_err());
    }

    #[test]
    fn culling_fixed_point_without_noise() {
        let b = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]);
        let p = BranchingParams::diffusion(b, vec![0.0, 0.0]).unwrap();
        let z = level(&[1.0, 1.0]);
        let tr = sequential_sampling(&p, &z, &[0.4, 0.4], SeqSampleConfig::for_level(16, &z), 1.0, 2).unwrap();
        assert!(tr.len() > 1);
        for s in &tr.states {
            assert_abs_diff_eq!(s[0], 0.4, epsilon = 1e-12);
            assert_abs_diff_eq!(s[1], 0.4, epsilon = 1e-12);
        }
    }

    #[test]
    fn culling_tracks_ode_without_noise() {
        let b = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]);
        let p = BranchingParams::diffusion(b, vec![0.0, 0.0]).unwrap();
        let z = level(&[1.0, 1.0]);
        // With z = (1, 1): d(r0 - r1)/dt = -2 (r0 - r1), the sum is conserved.
        let t: f64 = 0.5;
        let gap = (-2.0 * t).exp() * 0.8;
        let exact = [0.5 + gap / 2.0, 0.5 - gap / 2.0];
        let n = 64;
        let sampler = SequentialSampler::new(&p, &z, SeqSampleConfig::for_level(n, &z)).unwrap();
        let reps = 200;
        let mut mean = [0.0; 2];
        for k in 0..reps {
            let mut rng = rng_from_seed(derive_seed(1, k));
            let r = sampler.endpoint(&[0.9, 0.1], t, &mut rng).unwrap();
            mean[0] += r[0] / reps as f64;
            mean[1] += r[1] / reps as f64;
        }
        for (m, e) in mean.iter().zip(exact) {
            assert!((m - e).abs() < 0.05, "{m} vs {e}");
        }
    }
}
