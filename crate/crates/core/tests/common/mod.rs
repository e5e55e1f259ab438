#![allow(dead_code)]

use coalbranch::coalescent::{enumerate_block_transitions, RateSource};
use coalbranch::params::{Atom, AtomicMeasure, BranchingParams, CoalescentParams, Domain};
use coalbranch::{BlockCounts, MassLevel};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_point(rng: &mut ChaCha8Rng, d: usize, hi: f64) -> Vec<f64> {
    loop {
        let p: Vec<f64> = (0..d)
            .map(|_| if rng.random_bool(0.25) { 0.0 } else { rng.random_range(0.05..hi) })
            .collect();
        if p.iter().any(|&x| x > 0.0) {
            return p;
        }
    }
}

fn random_measure(rng: &mut ChaCha8Rng, d: usize, domain: Domain, hi: f64, max_atoms: usize) -> AtomicMeasure {
    let count = rng.random_range(0..=max_atoms);
    let atoms = (0..count)
        .map(|_| Atom::new(random_point(rng, d, hi), rng.random_range(0.1..2.0)))
        .collect();
    AtomicMeasure::new(d, domain, atoms).expect("continuous draws are distinct")
}

/// Valid `(B, c, μ)` with up to two atoms per colony.
pub fn random_branching(rng: &mut ChaCha8Rng, d: usize) -> BranchingParams {
    let b = DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            rng.random_range(-1.0..1.0)
        } else if rng.random_bool(0.2) {
            0.0
        } else {
            rng.random_range(0.0..1.0)
        }
    });
    let c = (0..d)
        .map(|_| if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.0..1.5) })
        .collect();
    let mu = (0..d)
        .map(|_| random_measure(rng, d, Domain::PositiveOrthant, 3.0, 2))
        .collect();
    BranchingParams::new(b, c, mu).unwrap()
}

/// Valid `(ρ, Q)` with every atom inside `[0, 0.95]^d`.
pub fn random_coalescent(rng: &mut ChaCha8Rng, d: usize) -> CoalescentParams {
    let rho = DMatrix::from_fn(d, d, |_, _| {
        if rng.random_bool(0.2) {
            0.0
        } else {
            rng.random_range(0.0..2.0)
        }
    });
    let q = (0..d).map(|_| random_measure(rng, d, Domain::UnitCube, 0.95, 2)).collect();
    CoalescentParams::new(rho, q).unwrap()
}

pub fn random_level(rng: &mut ChaCha8Rng, d: usize, lo: f64, hi: f64) -> MassLevel {
    MassLevel::new((0..d).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

pub fn random_r(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(0.0..=1.0)).collect()
}

fn mono(r: &[f64], n: &[i64]) -> f64 {
    if n.iter().any(|&e| e < 0) {
        return 0.0;
    }
    r.iter().zip(n).map(|(x, &e)| x.powi(e as i32)).product()
}

/// Applies the frequency generator at level `z` to `f(r) = r^n` term by
/// term: drift and diffusion through symbolic derivatives, jumps by
/// evaluating `f` at the displaced points `r + (1 - r) ⊙ u` and `r - r ⊙ u`
/// with `u = w / (w + z)` computed here from the raw atoms.
pub fn raw_generator_monomial(p: &BranchingParams, z: &[f64], n: &[u32], r: &[f64]) -> f64 {
    let d = p.d();
    let n: Vec<i64> = n.iter().map(|&e| i64::from(e)).collect();
    let f = |x: &[f64]| mono(x, &n);
    let grad = |i: usize| {
        let mut m = n.clone();
        m[i] -= 1;
        n[i] as f64 * mono(r, &m)
    };
    let hess = |i: usize| {
        let mut m = n.clone();
        m[i] -= 2;
        (n[i] * (n[i] - 1)) as f64 * mono(r, &m)
    };
    let base = f(r);
    let mut total = 0.0;
    for i in 0..d {
        for j in 0..d {
            if j != i {
                total += p.b()[(i, j)] * z[j] / z[i] * (r[j] - r[i]) * grad(i);
            }
        }
        total += p.c()[i] / z[i] * r[i] * (1.0 - r[i]) * hess(i);
        for atom in p.mu()[i].atoms() {
            let u: Vec<f64> = atom.point.iter().zip(z).map(|(w, zk)| w / (w + zk)).collect();
            let up: Vec<f64> = (0..d).map(|k| r[k] + (1.0 - r[k]) * u[k]).collect();
            let down: Vec<f64> = (0..d).map(|k| r[k] - r[k] * u[k]).collect();
            total += atom.weight * z[i] * r[i] * (f(&up) - base - (1.0 - r[i]) * u[i] * grad(i));
            total += atom.weight * z[i] * (1.0 - r[i]) * (f(&down) - base + r[i] * u[i] * grad(i));
        }
    }
    total
}

/// `Σ_m q_{nm} (r^m - r^n)` over the block-counting moves out of `n`.
pub fn dual_sum(n: &BlockCounts, r: &[f64], source: RateSource<'_>) -> f64 {
    let nn: Vec<i64> = n.as_slice().iter().map(|&e| i64::from(e)).collect();
    let base = mono(r, &nn);
    enumerate_block_transitions(n, source)
        .unwrap()
        .iter()
        .map(|t| {
            let m: Vec<i64> = t.target.as_slice().iter().map(|&e| i64::from(e)).collect();
            t.rate * (mono(r, &m) - base)
        })
        .sum()
}

/// Two colonies with symmetric migration, unit diffusion and one jump atom
/// each; used by the Monte Carlo acceptance checks.
pub fn reference_config() -> (BranchingParams, MassLevel, Vec<f64>, BlockCounts) {
    let b = DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]);
    let mu = vec![
        AtomicMeasure::new(2, Domain::PositiveOrthant, vec![Atom::new(vec![0.8, 0.4], 1.0)]).unwrap(),
        AtomicMeasure::new(2, Domain::PositiveOrthant, vec![Atom::new(vec![0.3, 1.2], 0.8)]).unwrap(),
    ];
    let p = BranchingParams::new(b, vec![1.0, 1.0], mu).unwrap();
    let z = MassLevel::new(vec![1.0, 2.0]).unwrap();
    (p, z, vec![0.3, 0.7], BlockCounts::new(vec![2, 1]))
}

/// Coordinatewise `|a - b| ≤ tol · max(|a|, |b|)`.
pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

/// Same support and weights up to relative `tol`, in any atom order.
pub fn measures_close(a: &AtomicMeasure, b: &AtomicMeasure, tol: f64) -> bool {
    a.len() == b.len()
        && a.atoms().iter().all(|x| {
            b.atoms().iter().any(|y| {
                rel_close(x.weight, y.weight, tol)
                    && x.point.iter().zip(&y.point).all(|(p, q)| rel_close(*p, *q, tol))
            })
        })
}
