use std::fmt::Display;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use coalbranch::params::{validate_branching, validate_coalescent};
use coalbranch::{BranchingParams, CoalescentParams, Trajectory, ValidationReport};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

/// A message for stderr and the process exit status.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn invalid(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl<E: Into<coalbranch::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Self::runtime(e.into().to_string())
    }
}

pub enum AnyParams {
    Branching(BranchingParams),
    Coalescent(CoalescentParams),
}

impl AnyParams {
    pub fn report(&self) -> ValidationReport {
        match self {
            Self::Branching(p) => validate_branching(p),
            Self::Coalescent(p) => validate_coalescent(p),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Branching(_) => "csbp",
            Self::Coalescent(_) => "coalescent",
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::runtime(format!("cannot read {}: {e}", path.display())))
}

fn parse<T: DeserializeOwned>(text: &str, path: &Path) -> Result<T, Failure> {
    let mut de = serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        Failure::runtime(format!(
            "params: malformed JSON in {} at field `{}`: {}",
            path.display(),
            e.path(),
            e.inner()
        ))
    })
}

/// Parses either parameter kind, told apart by the presence of `B` or `rho`.
pub fn load_any(path: &Path) -> Result<AnyParams, Failure> {
    let text = read(path)?;
    let value: Value = parse(&text, path)?;
    let has = |key: &str| value.as_object().is_some_and(|o| o.contains_key(key));
    if has("B") {
        Ok(AnyParams::Branching(parse(&text, path)?))
    } else if has("rho") {
        Ok(AnyParams::Coalescent(parse(&text, path)?))
    } else {
        Err(Failure::runtime(format!(
            "params: malformed JSON in {}: expected field `B` (CSBP) or `rho` (coalescent)",
            path.display()
        )))
    }
}

fn check(report: &ValidationReport, path: &Path) -> Result<(), Failure> {
    if report.ok {
        Ok(())
    } else {
        Err(Failure::invalid(format!(
            "params: {} fails validation: {}",
            path.display(),
            report.failed().join(", ")
        )))
    }
}

/// Parses and validates a CSBP parameter file.
pub fn load_branching(path: &Path) -> Result<BranchingParams, Failure> {
    let p: BranchingParams = parse(&read(path)?, path)?;
    check(&validate_branching(&p), path)?;
    Ok(p)
}

/// Parses and validates a coalescent parameter file.
pub fn load_coalescent(path: &Path) -> Result<CoalescentParams, Failure> {
    let p: CoalescentParams = parse(&read(path)?, path)?;
    check(&validate_coalescent(&p), path)?;
    Ok(p)
}

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    match out {
        Some(path) => File::create(path)
            .map(|f| Box::new(BufWriter::new(f)) as Box<dyn Write>)
            .map_err(|e| Failure::runtime(format!("cannot create {}: {e}", path.display()))),
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn write_error(out: Option<&Path>, e: impl Display) -> Failure {
    let target = out.map_or_else(|| "stdout".to_owned(), |p| p.display().to_string());
    Failure::runtime(format!("cannot write {target}: {e}"))
}

pub fn write_json(out: Option<&Path>, value: &impl Serialize) -> Result<(), Failure> {
    let mut w = sink(out)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| write_error(out, e))?;
    writeln!(w).and_then(|()| w.flush()).map_err(|e| write_error(out, e))
}

/// One row per recorded state, in replicate order then time order.
pub fn write_trajectories<S: Serialize>(out: Option<&Path>, paths: &[Trajectory<S>]) -> Result<(), Failure> {
    let mut w = csv::Writer::from_writer(sink(out)?);
    w.write_record(["rep", "time", "state"]).map_err(|e| write_error(out, e))?;
    for (rep, path) in paths.iter().enumerate() {
        for (time, state) in path.times.iter().zip(&path.states) {
            let state = serde_json::to_string(state).map_err(|e| write_error(out, e))?;
            w.write_record([rep.to_string(), time.to_string(), state])
                .map_err(|e| write_error(out, e))?;
        }
    }
    w.flush().map_err(|e| write_error(out, e))
}
