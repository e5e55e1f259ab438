//! Parameter spaces of both worlds.
//!
//! Every jump or merger measure is a finite [`AtomicMeasure`], so each
//! integral against it is an exact finite sum. A CSBP is described by the
//! triplet `(B, c, μ)` ([`BranchingParams`]) and a multitype Λ-coalescent by
//! the pair `(ρ, Q)` ([`CoalescentParams`]).
//!
//! Construction only checks structure (dimensions, atom invariants). Sign
//! and integrability constraints are reported by [`validate_branching`] and
//! [`validate_coalescent`]; simulators refuse parameters that fail them.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance used when comparing atom coordinates.
pub const ATOM_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamsError {
    #[error("{field}: expected dimension {expected}, found {found}")]
    Dimension {
        field: String,
        expected: usize,
        found: usize,
    },
    #[error("{field}: {reason}")]
    InvalidAtom { field: String, reason: String },
    #[error("{field}: non-finite entry")]
    NonFinite { field: String },
    #[error("measures live on different domains or dimensions")]
    IncompatibleMeasures,
    #[error("at least one probe function is required")]
    NoProbes,
}

/// Support domain of an atomic measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Domain {
    /// `ℝ₊^d \ {0}`, for branching jump measures.
    PositiveOrthant,
    /// `[0,1]^d \ {0}`, for coalescent merger measures.
    UnitCube,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub point: Vec<f64>,
    pub weight: f64,
}

impl Atom {
    pub fn new(point: Vec<f64>, weight: f64) -> Self {
        Self { point, weight }
    }
}

/// Finite sum of weighted point masses.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtomicMeasure {
    dim: usize,
    domain: Domain,
    atoms: Vec<Atom>,
}

impl AtomicMeasure {
    pub fn new(dim: usize, domain: Domain, atoms: Vec<Atom>) -> Result<Self, ParamsError> {
        Self::with_field(dim, domain, atoms, "atoms")
    }

    /// Like [`AtomicMeasure::new`] but errors name atoms as `field[k]`.
    pub(crate) fn with_field(
        dim: usize,
        domain: Domain,
        atoms: Vec<Atom>,
        field: &str,
    ) -> Result<Self, ParamsError> {
        for (k, atom) in atoms.iter().enumerate() {
            let name = format!("{field}[{k}]");
            if atom.point.len() != dim {
                return Err(ParamsError::Dimension {
                    field: format!("{name}.point"),
                    expected: dim,
                    found: atom.point.len(),
                });
            }
            let bad = |reason: &str| ParamsError::InvalidAtom {
                field: name.clone(),
                reason: reason.to_owned(),
            };
            if !(atom.weight.is_finite() && atom.weight > 0.0) {
                return Err(bad("weight must be positive and finite"));
            }
            if atom.point.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(bad("coordinates must be finite and nonnegative"));
            }
            if atom.point.iter().all(|x| *x <= ATOM_TOL) {
                return Err(bad("atom at the origin"));
            }
            if domain == Domain::UnitCube && atom.point.iter().any(|x| *x > 1.0 + ATOM_TOL) {
                return Err(bad("coordinate exceeds 1 on the unit cube"));
            }
            if atoms[..k].iter().any(|other| same_point(&other.point, &atom.point)) {
                return Err(bad("duplicate atom location"));
            }
        }
        Ok(Self { dim, domain, atoms })
    }

    pub fn empty(dim: usize, domain: Domain) -> Self {
        Self {
            dim,
            domain,
            atoms: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.integrate(|_| 1.0)
    }

    /// `Σ_k weight_k · f(point_k)`.
    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.atoms.iter().map(|a| a.weight * f(&a.point)).sum()
    }

    /// Multiplies every weight by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self, ParamsError> {
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom::new(a.point.clone(), a.weight * factor))
            .collect();
        Self::new(self.dim, self.domain, atoms)
    }

    /// Moves every atom through `f`, keeping weights, onto `domain`.
    pub fn map_points<E>(
        &self,
        domain: Domain,
        mut f: impl FnMut(&[f64]) -> Result<Vec<f64>, E>,
    ) -> Result<Self, E>
    where
        E: From<ParamsError>,
    {
        let atoms = self
            .atoms
            .iter()
            .map(|a| Ok(Atom::new(f(&a.point)?, a.weight)))
            .collect::<Result<Vec<_>, E>>()?;
        Ok(Self::new(self.dim, domain, atoms)?)
    }

    /// Union of two measures with disjoint supports.
    pub fn union(&self, other: &Self) -> Result<Self, ParamsError> {
        if self.dim != other.dim || self.domain != other.domain {
            return Err(ParamsError::IncompatibleMeasures);
        }
        let atoms = self.atoms.iter().chain(&other.atoms).cloned().collect();
        Self::new(self.dim, self.domain, atoms)
    }
}

fn same_point(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= ATOM_TOL)
}

/// Free-function form of [`AtomicMeasure::integrate`].
pub fn integrate(m: &AtomicMeasure, f: impl Fn(&[f64]) -> f64) -> f64 {
    m.integrate(f)
}

/// Triplet `(B, c, μ)` of a `d`-type CSBP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BranchingJson", into = "BranchingJson")]
pub struct BranchingParams {
    d: usize,
    b: DMatrix<f64>,
    c: Vec<f64>,
    mu: Vec<AtomicMeasure>,
}

impl BranchingParams {
    pub fn new(b: DMatrix<f64>, c: Vec<f64>, mu: Vec<AtomicMeasure>) -> Result<Self, ParamsError> {
        let d = c.len();
        check_square(&b, d, "B")?;
        check_finite(b.iter(), "B")?;
        check_finite(c.iter(), "c")?;
        check_measures(&mu, d, Domain::PositiveOrthant, "mu")?;
        Ok(Self { d, b, c, mu })
    }

    /// No jumps.
    pub fn diffusion(b: DMatrix<f64>, c: Vec<f64>) -> Result<Self, ParamsError> {
        let d = c.len();
        let mu = vec![AtomicMeasure::empty(d, Domain::PositiveOrthant); d];
        Self::new(b, c, mu)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Drift matrix; `b[(i, j)]` is the rate at which colony `j` produces
    /// mass in colony `i`.
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn mu(&self) -> &[AtomicMeasure] {
        &self.mu
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Pair `(ρ, Q)` of a `d`-type Λ-coalescent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CoalescentJson", into = "CoalescentJson")]
pub struct CoalescentParams {
    d: usize,
    rho: DMatrix<f64>,
    q: Vec<AtomicMeasure>,
}

impl CoalescentParams {
    pub fn new(rho: DMatrix<f64>, q: Vec<AtomicMeasure>) -> Result<Self, ParamsError> {
        let d = q.len();
        check_square(&rho, d, "rho")?;
        check_finite(rho.iter(), "rho")?;
        check_measures(&q, d, Domain::UnitCube, "Q")?;
        Ok(Self { d, rho, q })
    }

    /// Kingman-type coalescent with migration: no multiple mergers.
    pub fn pairwise(rho: DMatrix<f64>) -> Result<Self, ParamsError> {
        let d = rho.nrows();
        Self::new(rho, vec![AtomicMeasure::empty(d, Domain::UnitCube); d])
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// `rho[(i, i)]` is the pairwise merger rate of type-`i` blocks and
    /// `rho[(i, j)]` the rate at which a type-`j` block becomes type `i`.
    pub fn rho(&self) -> &DMatrix<f64> {
        &self.rho
    }

    pub fn q(&self) -> &[AtomicMeasure] {
        &self.q
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

fn check_square(m: &DMatrix<f64>, d: usize, field: &str) -> Result<(), ParamsError> {
    for (found, axis) in [(m.nrows(), "rows"), (m.ncols(), "cols")] {
        if found != d {
            return Err(ParamsError::Dimension {
                field: format!("{field} ({axis})"),
                expected: d,
                found,
            });
        }
    }
    Ok(())
}

fn check_finite<'a>(mut xs: impl Iterator<Item = &'a f64>, field: &str) -> Result<(), ParamsError> {
    if xs.all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(ParamsError::NonFinite {
            field: field.to_owned(),
        })
    }
}

fn check_measures(
    ms: &[AtomicMeasure],
    d: usize,
    domain: Domain,
    field: &str,
) -> Result<(), ParamsError> {
    if ms.len() != d {
        return Err(ParamsError::Dimension {
            field: field.to_owned(),
            expected: d,
            found: ms.len(),
        });
    }
    for (i, m) in ms.iter().enumerate() {
        if m.dim() != d || m.domain() != domain {
            return Err(ParamsError::Dimension {
                field: format!("{field}[{i}]"),
                expected: d,
                found: m.dim(),
            });
        }
    }
    Ok(())
}

// JSON wire formats. Field names are fixed: {"d", "B", "c", "mu"} and
// {"d", "rho", "Q"}; each measure is a list of {"point", "weight"} atoms.

#[derive(Serialize, Deserialize, Clone)]
#[serde(deny_unknown_fields)]
struct BranchingJson {
    d: usize,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    c: Vec<f64>,
    mu: Vec<Vec<Atom>>,
}

#[derive(Serialize, Deserialize, Clone)]
#[serde(deny_unknown_fields)]
struct CoalescentJson {
    d: usize,
    rho: Vec<Vec<f64>>,
    #[serde(rename = "Q")]
    q: Vec<Vec<Atom>>,
}

fn matrix_from_rows(rows: &[Vec<f64>], d: usize, field: &str) -> Result<DMatrix<f64>, ParamsError> {
    if rows.len() != d {
        return Err(ParamsError::Dimension {
            field: field.to_owned(),
            expected: d,
            found: rows.len(),
        });
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != d {
            return Err(ParamsError::Dimension {
                field: format!("{field}[{i}]"),
                expected: d,
                found: row.len(),
            });
        }
    }
    Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

fn measures_from_json(
    lists: Vec<Vec<Atom>>,
    d: usize,
    domain: Domain,
    field: &str,
) -> Result<Vec<AtomicMeasure>, ParamsError> {
    if lists.len() != d {
        return Err(ParamsError::Dimension {
            field: field.to_owned(),
            expected: d,
            found: lists.len(),
        });
    }
    lists
        .into_iter()
        .enumerate()
        .map(|(i, atoms)| AtomicMeasure::with_field(d, domain, atoms, &format!("{field}[{i}]")))
        .collect()
}

impl TryFrom<BranchingJson> for BranchingParams {
    type Error = ParamsError;

    fn try_from(raw: BranchingJson) -> Result<Self, ParamsError> {
        let d = raw.d;
        if raw.c.len() != d {
            return Err(ParamsError::Dimension {
                field: "c".into(),
                expected: d,
                found: raw.c.len(),
            });
        }
        let b = matrix_from_rows(&raw.b, d, "B")?;
        let mu = measures_from_json(raw.mu, d, Domain::PositiveOrthant, "mu")?;
        Self::new(b, raw.c, mu)
    }
}

impl From<BranchingParams> for BranchingJson {
    fn from(p: BranchingParams) -> Self {
        Self {
            d: p.d,
            b: rows_of(&p.b),
            c: p.c,
            mu: p.mu.into_iter().map(|m| m.atoms).collect(),
        }
    }
}

impl TryFrom<CoalescentJson> for CoalescentParams {
    type Error = ParamsError;

    fn try_from(raw: CoalescentJson) -> Result<Self, ParamsError> {
        let d = raw.d;
        let rho = matrix_from_rows(&raw.rho, d, "rho")?;
        let q = measures_from_json(raw.q, d, Domain::UnitCube, "Q")?;
        Self::new(rho, q)
    }
}

impl From<CoalescentParams> for CoalescentJson {
    fn from(p: CoalescentParams) -> Self {
        Self {
            d: p.d,
            rho: rows_of(&p.rho),
            q: p.q.into_iter().map(|m| m.atoms).collect(),
        }
    }
}

/// One named check: `passed` says whether `value` meets `threshold`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

/// Outcome of validating a parameter set. `ok` is the conjunction of all
/// `checks`; `flags` record class memberships that do not affect `ok`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub checks: Vec<Check>,
    pub flags: Vec<(String, bool)>,
}

impl ValidationReport {
    fn from_checks(checks: Vec<Check>, flags: Vec<(String, bool)>) -> Self {
        let ok = checks.iter().all(|c| c.passed);
        Self { ok, checks, flags }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn flag(&self, name: &str) -> Option<bool> {
        self.flags.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn failed(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect()
    }
}

fn at_least(name: String, value: f64, threshold: f64) -> Check {
    Check {
        name,
        value,
        threshold,
        passed: value >= threshold,
    }
}

fn finite(name: String, value: f64) -> Check {
    Check {
        name,
        value,
        threshold: f64::INFINITY,
        passed: value.is_finite(),
    }
}

fn min_offdiag(m: &DMatrix<f64>) -> f64 {
    let d = m.nrows();
    (0..d)
        .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| m[(i, j)])
        .fold(0.0_f64, f64::min)
}

/// Truncation `ξ_j(w) = (1 ∧ |w_j|) sign(w_j)`.
#[inline]
pub fn truncation(x: f64) -> f64 {
    x.abs().min(1.0) * x.signum()
}

/// `∫ (ξ_i(w)² + Σ_{j≠i} ξ_j(w)) μ_i(dw)`.
pub fn branching_integrability(mu_i: &AtomicMeasure, i: usize) -> f64 {
    mu_i.integrate(|w| {
        w.iter()
            .enumerate()
            .map(|(j, &x)| {
                let t = truncation(x);
                if j == i {
                    t * t
                } else {
                    t
                }
            })
            .sum()
    })
}

/// `Σ_j ∫ u_j^{1 + δ_ij} Q_i(du)`.
pub fn coalescent_integrability(q_i: &AtomicMeasure, i: usize) -> f64 {
    q_i.integrate(|u| {
        u.iter()
            .enumerate()
            .map(|(j, &x)| if j == i { x * x } else { x })
            .sum()
    })
}

pub fn validate_branching(p: &BranchingParams) -> ValidationReport {
    let mut checks = vec![
        at_least("offdiag_nonneg".into(), min_offdiag(&p.b), 0.0),
        at_least("c_nonneg".into(), p.c.iter().copied().fold(0.0, f64::min), 0.0),
    ];
    for (i, m) in p.mu.iter().enumerate() {
        checks.push(finite(format!("integrability_mu[{i}]"), branching_integrability(m, i)));
    }
    ValidationReport::from_checks(checks, Vec::new())
}

pub fn validate_coalescent(p: &CoalescentParams) -> ValidationReport {
    let min_rho = p.rho.iter().copied().fold(0.0, f64::min);
    let mut checks = vec![at_least("rho_nonneg".into(), min_rho, 0.0)];
    for (i, m) in p.q.iter().enumerate() {
        checks.push(finite(format!("integrability_q[{i}]"), coalescent_integrability(m, i)));
    }
    let prop = p
        .q
        .iter()
        .all(|m| m.atoms().iter().all(|a| a.point.iter().all(|&x| x < 1.0 - ATOM_TOL)));
    ValidationReport::from_checks(checks, vec![("prop".into(), prop)])
}

/// Largest discrepancy `|∫f dm1 - ∫f dm2|` over the probe family. A lower
/// bound on the bounded-Lipschitz distance when every probe is bounded by 1
/// and 1-Lipschitz.
pub fn bl_distance<F>(m1: &AtomicMeasure, m2: &AtomicMeasure, probes: &[F]) -> Result<f64, ParamsError>
where
    F: Fn(&[f64]) -> f64,
{
    if probes.is_empty() {
        return Err(ParamsError::NoProbes);
    }
    if m1.dim() != m2.dim() || m1.domain() != m2.domain() {
        return Err(ParamsError::IncompatibleMeasures);
    }
    Ok(probes
        .iter()
        .map(|f| (m1.integrate(f) - m2.integrate(f)).abs())
        .fold(0.0, f64::max))
}

pub type Probe = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Constant 1, each `1 ∧ x_j`, and `exp(-|x|)`.
pub fn default_probes(d: usize) -> Vec<Probe> {
    let mut probes: Vec<Probe> = vec![Box::new(|_| 1.0)];
    for j in 0..d {
        probes.push(Box::new(move |x: &[f64]| x[j].min(1.0)));
    }
    probes.push(Box::new(|x: &[f64]| (-x.iter().sum::<f64>()).exp()));
    probes
}

#[cfg(test)]
mod tests {
    use super::*;

    fn measure(domain: Domain, atoms: &[(&[f64], f64)]) -> AtomicMeasure {
        let d = atoms.first().map_or(1, |a| a.0.len());
        AtomicMeasure::new(
            d,
            domain,
            atoms.iter().map(|(p, w)| Atom::new(p.to_vec(), *w)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn integrate_examples() {
        let m = measure(Domain::UnitCube, &[(&[0.5], 2.0)]);
        assert_eq!(integrate(&m, |u| u[0]), 1.0);
        let e = AtomicMeasure::empty(3, Domain::UnitCube);
        assert_eq!(integrate(&e, |_| 7.0), 0.0);
        let m = measure(Domain::UnitCube, &[(&[0.5, 0.25], 1.0), (&[0.2, 0.2], 3.0)]);
        assert!((integrate(&m, |u| u[0] * u[1]) - 0.245).abs() < 1e-15);
    }

    #[test]
    fn atom_invariants() {
        let err = |atoms: Vec<Atom>, domain| AtomicMeasure::new(2, domain, atoms).unwrap_err();
        assert!(matches!(
            err(vec![Atom::new(vec![0.0, 0.0], 1.0)], Domain::UnitCube),
            ParamsError::InvalidAtom { .. }
        ));
        assert!(matches!(
            err(vec![Atom::new(vec![0.5, 0.1], 0.0)], Domain::UnitCube),
            ParamsError::InvalidAtom { .. }
        ));
        assert!(matches!(
            err(vec![Atom::new(vec![1.5, 0.1], 1.0)], Domain::UnitCube),
            ParamsError::InvalidAtom { .. }
        ));
        assert!(matches!(
            err(
                vec![Atom::new(vec![0.5, 0.1], 1.0), Atom::new(vec![0.5, 0.1 + 1e-14], 2.0)],
                Domain::UnitCube
            ),
            ParamsError::InvalidAtom { .. }
        ));
        assert!(matches!(
            err(vec![Atom::new(vec![0.5], 1.0)], Domain::UnitCube),
            ParamsError::Dimension { .. }
        ));
        // 1.5 is fine off the cube.
        AtomicMeasure::new(2, Domain::PositiveOrthant, vec![Atom::new(vec![1.5, 0.1], 1.0)]).unwrap();
    }

    #[test]
    fn validate_branching_examples() {
        let p = BranchingParams::diffusion(DMatrix::from_element(1, 1, -1.0), vec![0.0]).unwrap();
        assert!(validate_branching(&p).ok);

        let b = DMatrix::from_row_slice(2, 2, &[0.0, -0.5, 0.0, 0.0]);
        let p = BranchingParams::diffusion(b, vec![0.0, 0.0]).unwrap();
        let r = validate_branching(&p);
        assert!(!r.ok);
        assert!(!r.check("offdiag_nonneg").unwrap().passed);
        assert_eq!(r.failed(), vec!["offdiag_nonneg"]);

        let mu = measure(Domain::PositiveOrthant, &[(&[2.0], 1.0)]);
        let p = BranchingParams::new(DMatrix::zeros(1, 1), vec![0.0], vec![mu]).unwrap();
        let r = validate_branching(&p);
        assert!(r.ok);
        assert_eq!(r.check("integrability_mu[0]").unwrap().value, 1.0);
    }

    #[test]
    fn negative_diffusion_rejected() {
        let p = BranchingParams::diffusion(DMatrix::zeros(1, 1), vec![-0.1]).unwrap();
        assert_eq!(validate_branching(&p).failed(), vec!["c_nonneg"]);
    }

    #[test]
    fn validate_coalescent_examples() {
        let p = CoalescentParams::pairwise(DMatrix::from_element(1, 1, 1.0)).unwrap();
        let r = validate_coalescent(&p);
        assert!(r.ok);
        assert_eq!(r.flag("prop"), Some(true));

        let q = measure(Domain::UnitCube, &[(&[1.0], 1.0)]);
        let p = CoalescentParams::new(DMatrix::zeros(1, 1), vec![q]).unwrap();
        let r = validate_coalescent(&p);
        assert_eq!(r.flag("prop"), Some(false));
        assert!(r.ok);

        let q1 = measure(Domain::UnitCube, &[(&[0.5, 0.5], 2.0)]);
        let q2 = AtomicMeasure::empty(2, Domain::UnitCube);
        let p = CoalescentParams::new(DMatrix::zeros(2, 2), vec![q1, q2]).unwrap();
        let r = validate_coalescent(&p);
        assert!((r.check("integrability_q[0]").unwrap().value - 1.5).abs() < 1e-15);
    }

    #[test]
    fn coalescent_atom_at_zero_is_an_error() {
        let json = r#"{"d":1,"rho":[[1.0]],"Q":[[{"point":[0.0],"weight":1.0}]]}"#;
        let err = CoalescentParams::from_json(json).unwrap_err();
        assert!(err.to_string().contains("Q[0][0]"), "{err}");
    }

    #[test]
    fn bl_distance_examples() {
        let m1 = measure(Domain::UnitCube, &[(&[0.5], 1.0)]);
        let m2 = measure(Domain::UnitCube, &[(&[0.5], 2.0)]);
        let one = |_: &[f64]| 1.0;
        assert_eq!(bl_distance(&m1, &m1, &[one]).unwrap(), 0.0);
        assert_eq!(bl_distance(&m1, &m2, &[one]).unwrap(), 1.0);
        assert_eq!(bl_distance(&m2, &m1, &[one]).unwrap(), 1.0);
        let none: [fn(&[f64]) -> f64; 0] = [];
        assert_eq!(bl_distance(&m1, &m2, &none), Err(ParamsError::NoProbes));

        let mass = m1.total_mass();
        let mut prev = f64::INFINITY;
        for n in [1.0, 2.0, 4.0, 8.0, 16.0] {
            let scaled = m1.scaled(1.0 + 1.0 / n).unwrap();
            let dist = bl_distance(&m1, &scaled, &[one]).unwrap();
            assert!((dist - mass / n).abs() < 1e-15);
            assert!(dist < prev);
            prev = dist;
        }
    }

    #[test]
    fn json_roundtrip_and_field_names() {
        let json = r#"{"d":2,"B":[[-1.0,0.5],[0.25,0.0]],"c":[1.0,0.5],
            "mu":[[{"point":[1.0,0.5],"weight":2.0}],[]]}"#;
        let p = BranchingParams::from_json(json).unwrap();
        assert_eq!(p.b()[(0, 1)], 0.5);
        assert_eq!(p.b()[(1, 0)], 0.25);
        assert_eq!(p.mu()[0].len(), 1);
        let text = serde_json::to_string(&p).unwrap();
        assert!(text.contains("\"B\"") && text.contains("\"mu\""));
        assert_eq!(BranchingParams::from_json(&text).unwrap(), p);

        let bad = r#"{"d":2,"B":[[-1.0,0.5]],"c":[1.0,0.5],"mu":[[],[]]}"#;
        let err = BranchingParams::from_json(bad).unwrap_err().to_string();
        assert!(err.contains("B"), "{err}");
        let bad = r#"{"d":1,"B":[[0.0]],"c":[1.0],"mu":[[{"point":[1.0],"weight":-1}]]}"#;
        let err = BranchingParams::from_json(bad).unwrap_err().to_string();
        assert!(err.contains("mu[0][0]"), "{err}");
    }
}
