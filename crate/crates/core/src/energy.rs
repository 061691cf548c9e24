//! Vector energy functionals on discrete measures.

use std::fmt;
use std::sync::Arc;

use serde::{Serialize, Serializer};

use crate::discretize::SphereProblem;
use crate::error::{Result, VepError};
use crate::grid::{CellGrid, DiscreteMeasure, Measure, SignedMeasure};
use crate::kernel::{mutual_energy, pairwise_sum, self_energy};
use crate::problem::{interaction_cholesky, InteractionMatrix};

/// Energy value in `R ∪ {+inf}`. The infinite case is a tag, never a float
/// that could reach linear algebra.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Energy {
    Finite(f64),
    Infinite,
}

impl Energy {
    pub fn is_finite(&self) -> bool {
        matches!(self, Energy::Finite(_))
    }

    /// Finite value, or `None` for `+inf`.
    pub fn finite(&self) -> Option<f64> {
        match *self {
            Energy::Finite(v) => Some(v),
            Energy::Infinite => None,
        }
    }

    /// Value as a float, `+inf` for the infinite tag.
    pub fn to_f64(&self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

impl fmt::Display for Energy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Energy::Finite(v) => write!(f, "{v}"),
            Energy::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Energy {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Energy::Finite(v) => s.serialize_f64(*v),
            Energy::Infinite => s.serialize_str("inf"),
        }
    }
}

fn check_dim(c: &InteractionMatrix, n: usize) -> Result<()> {
    if c.dim() != n {
        return Err(VepError::DimensionMismatch(format!(
            "{n} measures for an interaction matrix of dimension {}",
            c.dim()
        )));
    }
    Ok(())
}

/// `J_0(μ) = sum_ij c_ij I(μ_i, μ_j)`.
pub fn j0(measures: &[&dyn Measure], c: &InteractionMatrix, r: f64) -> Result<Energy> {
    check_dim(c, measures.len())?;
    let d = measures.len();
    let mut terms = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            let cij = c.get(i, j);
            if cij == 0.0 {
                continue;
            }
            let e = mutual_energy(measures[i], measures[j], r)?;
            if !e.is_finite() {
                return Ok(Energy::Infinite);
            }
            terms.push(cij * e);
        }
    }
    Ok(Energy::Finite(pairwise_sum(&terms)))
}

/// `sum_i I(sum_j b_ij μ_j)` with `C = B^t B`.
///
/// Each combination lives on the union of the grids involved, whose kernel
/// reproduces every cross block used by [`j0`].
pub fn j0_cholesky(measures: &[&dyn Measure], c: &InteractionMatrix, r: f64) -> Result<Energy> {
    check_dim(c, measures.len())?;
    let b = interaction_cholesky(c)?;
    let d = measures.len();
    let mut terms = Vec::with_capacity(d);
    for i in 0..d {
        let involved: Vec<usize> = (i..d).filter(|&j| b.get(i, j) != 0.0).collect();
        let grids: Vec<&CellGrid> = involved.iter().map(|&j| measures[j].grid().as_ref()).collect();
        let union = Arc::new(CellGrid::union(&grids)?);
        let weights: Vec<f64> = involved
            .iter()
            .flat_map(|&j| {
                let bij = b.get(i, j);
                measures[j].weights().iter().map(move |w| bij * w)
            })
            .collect();
        let combo = SignedMeasure::new(union, weights)?;
        let e = self_energy(&combo, r)?;
        if !e.is_finite() {
            return Ok(Energy::Infinite);
        }
        terms.push(e);
    }
    Ok(Energy::Finite(pairwise_sum(&terms)))
}

/// Values of `I(μ, ν)` along a decreasing sequence of regularizations.
pub fn regularized_energy_limit_probe(mu: &dyn Measure, nu: &dyn Measure, radii: &[f64]) -> Result<Vec<f64>> {
    if let Some(&r) = radii.iter().find(|r| !(**r >= 0.0)) {
        return Err(VepError::NegativeRegularization(r));
    }
    if radii.windows(2).any(|w| !(w[1] < w[0])) || radii.first().is_some_and(|&r| r > 1.0) {
        return Err(VepError::BadParams(
            "regularization radii must decrease strictly and start at most at 1".into(),
        ));
    }
    radii.iter().map(|&r| mutual_energy(mu, nu, r)).collect()
}

/// `J_0(T*μ) + sum_i ∫ 𝒱_i dT*μ_i` for sphere-side candidates.
pub fn vector_energy(problem: &SphereProblem, candidate: &[DiscreteMeasure]) -> Result<Energy> {
    let d = problem.dim();
    if candidate.len() != d {
        return Err(VepError::DimensionMismatch(format!(
            "{} measures for a problem with {d} components",
            candidate.len()
        )));
    }
    let mut linear = Vec::with_capacity(d);
    let mut infinite = false;
    for (i, mu) in candidate.iter().enumerate() {
        let grid = &problem.grids[i];
        if !mu.grid().same_cells(grid) || mu.grid().side() != grid.side() {
            return Err(VepError::GridMismatch(format!(
                "candidate {i} does not live on the problem grid"
            )));
        }
        let mass = mu.mass();
        let expected = problem.masses[i];
        if (mass - expected).abs() > 1e-12 * expected.max(1.0) {
            return Err(VepError::MassMismatch {
                component: i,
                expected,
                actual: mass,
            });
        }
        if let Some(caps) = &problem.caps[i] {
            for (k, (&w, &cap)) in mu.weights().iter().zip(caps).enumerate() {
                if w > cap * (1.0 + 1e-12) + 1e-15 {
                    return Err(VepError::CapViolation {
                        component: i,
                        cell: k,
                        weight: w,
                        cap,
                    });
                }
            }
        }
        let mut terms = Vec::with_capacity(mu.weights().len());
        for (&w, &v) in mu.weights().iter().zip(&problem.field_values[i]) {
            if w == 0.0 {
                continue;
            }
            if v == f64::INFINITY {
                infinite = true;
            }
            terms.push(w * v);
        }
        linear.push(pairwise_sum(&terms));
    }
    if infinite {
        return Ok(Energy::Infinite);
    }
    let refs: Vec<&dyn Measure> = candidate.iter().map(|m| m as &dyn Measure).collect();
    Ok(match j0(&refs, &problem.interaction, 0.0)? {
        Energy::Finite(q) => Energy::Finite(q + pairwise_sum(&linear)),
        Energy::Infinite => Energy::Infinite,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Cell, Side};
    use approx::assert_relative_eq;
    use num_complex::Complex64;

    fn grid(a: f64, b: f64, n: usize) -> Arc<CellGrid> {
        let h = (b - a) / n as f64;
        let cells = (0..n)
            .map(|k| {
                let (s, e) = (a + h * k as f64, a + h * (k + 1) as f64);
                let z = |x: f64| Complex64::new(x, 0.0);
                Cell::new(0, s - a, e - a, z(s), z(e), z(0.5 * (s + e)))
            })
            .collect();
        Arc::new(CellGrid::new(Side::Plane, 0, cells).unwrap())
    }

    #[test]
    fn j0_examples() {
        let mu = DiscreteMeasure::uniform(grid(-1.0, 1.0, 50), 1.0);
        let i_mu = self_energy(&mu, 0.0).unwrap();
        let one = j0(&[&mu], &InteractionMatrix::identity(1), 0.0).unwrap();
        assert_eq!(one, Energy::Finite(i_mu));
        let two = j0(&[&mu, &mu], &InteractionMatrix::identity(2), 0.0).unwrap();
        assert_relative_eq!(two.to_f64(), 2.0 * i_mu, max_relative = 1e-15);
        let three = j0(&[&mu, &mu, &mu], &InteractionMatrix::tridiagonal_attraction(3), 0.0).unwrap();
        assert_relative_eq!(three.to_f64(), i_mu, max_relative = 1e-12);
    }

    #[test]
    fn cholesky_route_agrees() {
        let c = InteractionMatrix::from_rows(&[vec![1.0, -0.5], vec![-0.5, 1.0]]).unwrap();
        let mu = DiscreteMeasure::uniform(grid(-1.0, 1.0, 40), 1.0);
        let nu = DiscreteMeasure::uniform(grid(0.5, 3.0, 30), 0.7);
        let direct = j0(&[&mu, &nu], &c, 0.0).unwrap().to_f64();
        let chol = j0_cholesky(&[&mu, &nu], &c, 0.0).unwrap().to_f64();
        assert_relative_eq!(direct, chol, max_relative = 1e-10);
    }

    #[test]
    fn probe_rejects_bad_sequences() {
        let mu = DiscreteMeasure::uniform(grid(-1.0, 1.0, 10), 1.0);
        assert!(regularized_energy_limit_probe(&mu, &mu, &[0.1, 1.0]).is_err());
        assert!(regularized_energy_limit_probe(&mu, &mu, &[1.0, -0.1]).is_err());
        let r0 = regularized_energy_limit_probe(&mu, &mu, &[0.0]).unwrap();
        assert_eq!(r0[0], self_energy(&mu, 0.0).unwrap());
    }
}
