use std::path::Path;

use coalbranch::branching::{CsbpSimulator, PairSimulator};
use coalbranch::coalescent::{BlockCountingChain, PartitionChain};
use coalbranch::duality::{duality_check, DualityConfig};
use coalbranch::frequency::{build_freq_params, LimitSde, SequentialSampler};
use coalbranch::params::validate_coalescent;
use coalbranch::rng::derive_seed;
use coalbranch::transform::{h_z, h_z_inverse};
use coalbranch::{
    BlockCounts, DiagonalAnchor, MassLevel, RateSource, SeqSampleConfig, Trajectory, TypedPartition,
};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::args::{CoalescentMode, Command, Direction, FrequencyMode, RunArgs};
use crate::io::{load_any, load_branching, load_coalescent, write_json, write_trajectories, Failure};

pub fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Validate { params, out } => validate(&params, out.as_deref()),
        Command::Transform {
            dir,
            z,
            a,
            input,
            out,
        } => transform(dir, z, a, &input, out.as_deref()),
        Command::SimulateCsbp { params, x0, run, dt } => {
            let p = load_branching(&params)?;
            let sim = CsbpSimulator::new(&p)?;
            replicate(&run, |seed| sim.simulate(&x0, run.horizon, dt, seed))
        }
        Command::SimulatePair {
            params,
            r0,
            z0,
            eps,
            l,
            run,
            dt,
        } => {
            let p = load_branching(&params)?;
            let sim = PairSimulator::new(&p, eps, l)?;
            replicate(&run, |seed| sim.simulate(&r0, &z0, run.horizon, dt, seed))
        }
        Command::SimulateCoalescent {
            mode,
            params,
            z,
            n0,
            types,
            run,
        } => simulate_coalescent(mode, &params, z, n0, types, &run),
        Command::SimulateFrequency {
            mode,
            params,
            z,
            r0,
            run,
            dt,
            n,
            eps,
            l,
            inner_dt,
        } => {
            let p = load_branching(&params)?;
            let z = MassLevel::new(z)?;
            match mode {
                FrequencyMode::Sde => {
                    let sde = LimitSde::new(&build_freq_params(&p, &z)?);
                    replicate(&run, |seed| sde.simulate(&r0, run.horizon, dt, seed))
                }
                FrequencyMode::Culling => {
                    let n = n.ok_or_else(|| Failure::runtime("frequency: culling mode needs --n"))?;
                    let default = SeqSampleConfig::for_level(n, &z);
                    let cfg = SeqSampleConfig {
                        n,
                        eps: eps.unwrap_or(default.eps),
                        l: l.unwrap_or(default.l),
                        inner_dt: inner_dt.unwrap_or(default.inner_dt),
                    };
                    let sampler = SequentialSampler::new(&p, &z, cfg)?;
                    replicate(&run, |seed| sampler.simulate(&r0, run.horizon, seed))
                }
            }
        }
        Command::VerifyDuality {
            params,
            z,
            r,
            n,
            t,
            reps,
            dt,
            seed,
            exact_backward,
            zthreshold,
            out,
        } => {
            let p = load_branching(&params)?;
            let z = MassLevel::new(z)?;
            let cfg = DualityConfig {
                t,
                reps,
                dt,
                seed,
                zthreshold,
                exact_backward,
            };
            let report = duality_check(&p, &z, &r, &BlockCounts::new(n.clone()), &cfg)?;
            let doc = json!({
                "r": r,
                "n": n,
                "z": z.as_slice(),
                "t": t,
                "reps": reps,
                "dt": dt,
                "seed": seed,
                "exact_backward": exact_backward,
                "forward": report.forward,
                "backward": report.backward,
                "zscore": report.zscore,
                "threshold": report.threshold,
                "passed": report.passed,
            });
            write_json(out.as_deref(), &doc)?;
            if report.passed {
                Ok(())
            } else {
                Err(Failure::invalid(format!(
                    "duality: |z| = {:.3} exceeds {}",
                    report.zscore.abs(),
                    report.threshold
                )))
            }
        }
    }
}

fn validate(params: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let p = load_any(params)?;
    let report = p.report();
    let flags: serde_json::Map<_, _> = report.flags.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
    let doc = json!({
        "kind": p.kind(),
        "ok": report.ok,
        "checks": report.checks,
        "flags": flags,
    });
    write_json(out, &doc)?;
    if report.ok {
        Ok(())
    } else {
        Err(Failure::invalid(format!(
            "params: {} fails validation: {}",
            params.display(),
            report.failed().join(", ")
        )))
    }
}

fn transform(
    dir: Direction,
    z: Vec<f64>,
    a: Option<Vec<f64>>,
    input: &Path,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let z = MassLevel::new(z)?;
    match dir {
        Direction::Forward => {
            let p = load_branching(input)?;
            write_json(out, &h_z(&p, &z)?)
        }
        Direction::Inverse => {
            let q = load_coalescent(input)?;
            if validate_coalescent(&q).flag("prop") == Some(false) {
                return Err(Failure::invalid(format!(
                    "transform: {} has an atom with some coordinate equal to 1",
                    input.display()
                )));
            }
            let a = match a {
                Some(a) => DiagonalAnchor::new(a)?,
                None => DiagonalAnchor::zeros(q.d()),
            };
            write_json(out, &h_z_inverse(&q, &z, &a)?)
        }
    }
}

fn simulate_coalescent(
    mode: CoalescentMode,
    params: &Path,
    z: Option<Vec<f64>>,
    n0: Option<Vec<u32>>,
    types: Option<Vec<usize>>,
    run: &RunArgs,
) -> Result<(), Failure> {
    let dual = match z {
        Some(z) => Some((load_branching(params)?, MassLevel::new(z)?)),
        None => None,
    };
    match mode {
        CoalescentMode::Blocks => {
            let n0 = BlockCounts::new(n0.ok_or_else(|| Failure::runtime("coalescent: blocks mode needs --n0"))?);
            let chain = match &dual {
                Some((p, z)) => BlockCountingChain::new(RateSource::Dual { params: p, z })?,
                None => BlockCountingChain::new(RateSource::Coalescent(&load_coalescent(params)?))?,
            };
            replicate(run, |seed| chain.simulate(&n0, run.horizon, seed))
        }
        CoalescentMode::Partition => {
            let types = types.ok_or_else(|| Failure::runtime("coalescent: partition mode needs --types"))?;
            let pi0 = TypedPartition::singletons(&types)?;
            let q = match &dual {
                Some((p, z)) => h_z(p, z)?,
                None => load_coalescent(params)?,
            };
            let chain = PartitionChain::new(&q)?;
            replicate(run, |seed| chain.simulate(&pi0, run.horizon, seed))
        }
    }
}

/// Runs `reps` independent paths, replicate `k` seeded by
/// `derive_seed(seed, k)`, and writes them in replicate order.
fn replicate<S, E>(run: &RunArgs, sim: impl Fn(u64) -> Result<Trajectory<S>, E> + Sync) -> Result<(), Failure>
where
    S: Serialize + Send,
    E: Send,
    Failure: From<E>,
{
    if run.reps == 0 {
        return Err(Failure::runtime("--reps must be at least 1"));
    }
    let paths = (0..run.reps as u64)
        .into_par_iter()
        .map(|k| sim(derive_seed(run.seed, k)))
        .collect::<Result<Vec<_>, E>>()?;
    write_trajectories(run.out.as_deref(), &paths)
}
