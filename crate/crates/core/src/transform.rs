//! The change of variables `T_z(w) = (w_i / (w_i + z_i))_i` and the
//! bijection `H_z` from CSBP triplets to coalescent pairs.
//!
//! At mass level `z`,
//!
//! ```text
//! ρ_ii = 2 c_i / z_i,    ρ_ij = b_ji z_i / z_j  (j ≠ i),    Q_i = z_i · T_z μ_i
//! ```
//!
//! and the inverse recovers `c`, the off-diagonal of `B` and `μ`; the
//! diagonal of `B` does not enter the coalescent and is supplied as a
//! [`DiagonalAnchor`].

use nalgebra::DMatrix;
use thiserror::Error;

use crate::params::{
    validate_branching, validate_coalescent, AtomicMeasure, BranchingParams, CoalescentParams,
    Domain, ParamsError, ATOM_TOL,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransformError {
    #[error("mass level must have strictly positive finite entries, got {0:?}")]
    InvalidMassLevel(Vec<f64>),
    #[error("diagonal anchor must have finite entries, got {0:?}")]
    InvalidAnchor(Vec<f64>),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("coordinate {index} = {value} lies outside [0, 1); the inverse map diverges")]
    OutsideUnitInterval { index: usize, value: f64 },
    #[error("input parameters fail validation: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Params(#[from] ParamsError),
}

/// Fixed total-mass level `z ∈ (0, ∞)^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct MassLevel(Vec<f64>);

impl MassLevel {
    pub fn new(z: Vec<f64>) -> Result<Self, TransformError> {
        if z.is_empty() || z.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(TransformError::InvalidMassLevel(z));
        }
        Ok(Self(z))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub(crate) fn expect_dim(&self, d: usize) -> Result<(), TransformError> {
        if self.dim() == d {
            Ok(())
        } else {
            Err(TransformError::Dimension {
                expected: d,
                found: self.dim(),
            })
        }
    }
}

impl std::ops::Index<usize> for MassLevel {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Prescribed diagonal of `B` for the inverse map.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalAnchor(Vec<f64>);

impl DiagonalAnchor {
    pub fn new(a: Vec<f64>) -> Result<Self, TransformError> {
        if a.iter().any(|x| !x.is_finite()) {
            return Err(TransformError::InvalidAnchor(a));
        }
        Ok(Self(a))
    }

    pub fn zeros(d: usize) -> Self {
        Self(vec![0.0; d])
    }

    /// The anchor that makes `h_z_inverse(h_z(p))` return `p`.
    pub fn of(p: &BranchingParams) -> Self {
        Self(p.b().diagonal().iter().copied().collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// `T_z(w) = (w_i / (w_i + z_i))_i`, mapping `ℝ₊^d` into `[0, 1)^d`.
pub fn t_z(w: &[f64], z: &MassLevel) -> Vec<f64> {
    w.iter().zip(z.as_slice()).map(|(&w, &z)| w / (w + z)).collect()
}

/// `T_z^{-1}(u) = (z_i u_i / (1 - u_i))_i`, defined for `u ∈ [0, 1)^d`.
pub fn t_z_inverse(u: &[f64], z: &MassLevel) -> Result<Vec<f64>, TransformError> {
    z.expect_dim(u.len())?;
    u.iter()
        .zip(z.as_slice())
        .enumerate()
        .map(|(index, (&u, &z))| {
            if !(0.0..1.0).contains(&u) {
                Err(TransformError::OutsideUnitInterval { index, value: u })
            } else {
                Ok(z * u / (1.0 - u))
            }
        })
        .collect()
}

/// Image measure `T_z μ` on the unit cube; weights are unchanged.
pub fn pushforward(m: &AtomicMeasure, z: &MassLevel) -> Result<AtomicMeasure, TransformError> {
    z.expect_dim(m.dim())?;
    m.map_points(Domain::UnitCube, |w| Ok::<_, TransformError>(t_z(w, z)))
}

/// Image measure `T_z^{-1} Q` on the positive orthant. Fails if an atom has
/// a coordinate equal to 1.
pub fn pullback(m: &AtomicMeasure, z: &MassLevel) -> Result<AtomicMeasure, TransformError> {
    z.expect_dim(m.dim())?;
    m.map_points(Domain::PositiveOrthant, |u| {
        if let Some((index, &value)) = u.iter().enumerate().find(|(_, &x)| x >= 1.0 - ATOM_TOL) {
            return Err(TransformError::OutsideUnitInterval { index, value });
        }
        t_z_inverse(u, z)
    })
}

/// `H_z`: CSBP triplet to coalescent pair.
pub fn h_z(p: &BranchingParams, z: &MassLevel) -> Result<CoalescentParams, TransformError> {
    let report = validate_branching(p);
    if !report.ok {
        return Err(TransformError::InvalidInput(report.failed().join(", ")));
    }
    let d = p.d();
    z.expect_dim(d)?;
    let rho = DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            2.0 * p.c()[i] / z[i]
        } else {
            p.b()[(j, i)] * z[i] / z[j]
        }
    });
    let q = p
        .mu()
        .iter()
        .enumerate()
        .map(|(i, mu)| Ok(pushforward(mu, z)?.scaled(z[i])?))
        .collect::<Result<Vec<_>, TransformError>>()?;
    Ok(CoalescentParams::new(rho, q)?)
}

/// `H_z^{-1}`: coalescent pair (without mass on `{u : some u_i = 1}`) to
/// CSBP triplet with diagonal `a`.
pub fn h_z_inverse(
    p: &CoalescentParams,
    z: &MassLevel,
    a: &DiagonalAnchor,
) -> Result<BranchingParams, TransformError> {
    let report = validate_coalescent(p);
    if !report.ok {
        return Err(TransformError::InvalidInput(report.failed().join(", ")));
    }
    let d = p.d();
    z.expect_dim(d)?;
    if a.as_slice().len() != d {
        return Err(TransformError::Dimension {
            expected: d,
            found: a.as_slice().len(),
        });
    }
    let rho = p.rho();
    let b = DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            a.as_slice()[i]
        } else {
            rho[(j, i)] * z[i] / z[j]
        }
    });
    let c = (0..d).map(|i| z[i] * rho[(i, i)] / 2.0).collect();
    let mu = p
        .q()
        .iter()
        .enumerate()
        .map(|(i, q)| Ok(pullback(q, z)?.scaled(1.0 / z[i])?))
        .collect::<Result<Vec<_>, TransformError>>()?;
    Ok(BranchingParams::new(b, c, mu)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Atom;

    fn z(v: &[f64]) -> MassLevel {
        MassLevel::new(v.to_vec()).unwrap()
    }

    #[test]
    fn t_z_examples() {
        assert_eq!(t_z(&[0.0, 0.0], &z(&[1.0, 3.0])), vec![0.0, 0.0]);
        assert_eq!(t_z(&[1.0, 1.0], &z(&[1.0, 1.0])), vec![0.5, 0.5]);
        assert_eq!(t_z(&[3.0], &z(&[1.0])), vec![0.75]);
    }

    #[test]
    fn t_z_inverse_examples() {
        assert_eq!(t_z_inverse(&[0.0, 0.0], &z(&[1.0, 2.0])).unwrap(), vec![0.0, 0.0]);
        assert_eq!(t_z_inverse(&[0.5], &z(&[2.0])).unwrap(), vec![2.0]);
        assert!(matches!(
            t_z_inverse(&[0.2, 1.0], &z(&[1.0, 1.0])),
            Err(TransformError::OutsideUnitInterval { index: 1, .. })
        ));
    }

    #[test]
    fn mass_level_must_be_positive() {
        assert!(MassLevel::new(vec![1.0, 0.0]).is_err());
        assert!(MassLevel::new(vec![f64::INFINITY]).is_err());
        assert!(MassLevel::new(vec![]).is_err());
    }

    #[test]
    fn pushforward_examples() {
        let e = AtomicMeasure::empty(2, Domain::PositiveOrthant);
        assert!(pushforward(&e, &z(&[1.0, 1.0])).unwrap().is_empty());
        let m = AtomicMeasure::new(2, Domain::PositiveOrthant, vec![Atom::new(vec![1.0, 1.0], 2.0)])
            .unwrap();
        let pf = pushforward(&m, &z(&[1.0, 1.0])).unwrap();
        assert_eq!(pf.domain(), Domain::UnitCube);
        assert_eq!(pf.atoms(), &[Atom::new(vec![0.5, 0.5], 2.0)]);
    }

    #[test]
    fn h_z_examples() {
        let p = BranchingParams::diffusion(DMatrix::zeros(1, 1), vec![1.0]).unwrap();
        let q = h_z(&p, &z(&[2.0])).unwrap();
        assert_eq!(q.rho()[(0, 0)], 1.0);
        assert!(q.q()[0].is_empty());

        let b = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 3.0, 0.0]);
        let p = BranchingParams::diffusion(b, vec![0.0, 0.0]).unwrap();
        let q = h_z(&p, &z(&[2.0, 4.0])).unwrap();
        assert_eq!(q.rho()[(0, 1)], 1.5);
        assert_eq!(q.rho()[(1, 0)], 0.0);

        let mu =
            AtomicMeasure::new(1, Domain::PositiveOrthant, vec![Atom::new(vec![1.0], 1.0)]).unwrap();
        let p = BranchingParams::new(DMatrix::zeros(1, 1), vec![0.0], vec![mu]).unwrap();
        let q = h_z(&p, &z(&[1.0])).unwrap();
        assert_eq!(q.q()[0].atoms(), &[Atom::new(vec![0.5], 1.0)]);
        assert_eq!(validate_coalescent(&q).flag("prop"), Some(true));
    }

    #[test]
    fn h_z_rejects_invalid_input() {
        let b = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 0.0, 0.0]);
        let p = BranchingParams::diffusion(b, vec![0.0, 0.0]).unwrap();
        assert!(matches!(h_z(&p, &z(&[1.0, 1.0])), Err(TransformError::InvalidInput(_))));
        let p = BranchingParams::diffusion(DMatrix::zeros(1, 1), vec![1.0]).unwrap();
        assert!(matches!(h_z(&p, &z(&[1.0, 1.0])), Err(TransformError::Dimension { .. })));
    }

    #[test]
    fn h_z_inverse_examples() {
        let q = CoalescentParams::pairwise(DMatrix::from_element(1, 1, 4.0)).unwrap();
        let a = DiagonalAnchor::new(vec![-0.7]).unwrap();
        let p = h_z_inverse(&q, &z(&[0.5]), &a).unwrap();
        assert_eq!(p.c(), &[1.0]);
        assert_eq!(p.b()[(0, 0)], -0.7);
    }

    #[test]
    fn h_z_inverse_requires_prop() {
        let qm = AtomicMeasure::new(1, Domain::UnitCube, vec![Atom::new(vec![1.0], 1.0)]).unwrap();
        let q = CoalescentParams::new(DMatrix::zeros(1, 1), vec![qm]).unwrap();
        let err = h_z_inverse(&q, &z(&[1.0]), &DiagonalAnchor::zeros(1)).unwrap_err();
        assert!(matches!(err, TransformError::OutsideUnitInterval { .. }));
    }
}
