//! Inverse stereographic compactification onto the sphere of radius 1/2
//! centred at `(0, 0, 1/2)`.
//!
//! The map sends `0` to the south pole `(0, 0, 0)` and `∞` to the north pole
//! `(0, 0, 1)`. Euclidean distances between image points are the chordal
//! distances `|x - y| / (sqrt(1 + |x|^2) sqrt(1 + |y|^2))`.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::admissibility::{tail_estimate, TailClass};
use crate::error::{Result, VepError};
use crate::grid::{CellGrid, DiscreteMeasure, Side};
use crate::kernel::{kernel_bilinear, pairwise_sum};
use crate::problem::{ExternalField, SupportSet};

/// A point of the complex plane or the point at infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedComplex {
    Finite(Complex64),
    Infinity,
}

impl From<Complex64> for ExtendedComplex {
    fn from(z: Complex64) -> Self {
        ExtendedComplex::Finite(z)
    }
}

/// A point on the sphere `x1^2 + x2^2 + (x3 - 1/2)^2 = 1/4`.
///
/// Besides the Cartesian coordinates the point keeps `1 - x3` computed
/// directly, so that differences between points close to the north pole do
/// not lose their relative accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpherePoint {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
    #[serde(skip)]
    pole_gap: f64,
}

impl SpherePoint {
    pub const NORTH_POLE: SpherePoint = SpherePoint {
        x1: 0.0,
        x2: 0.0,
        x3: 1.0,
        pole_gap: 0.0,
    };

    pub fn coords(&self) -> [f64; 3] {
        [self.x1, self.x2, self.x3]
    }

    /// `1 - x3`, exact to working precision even near the north pole.
    pub fn pole_gap(&self) -> f64 {
        self.pole_gap
    }

    /// Left-hand side minus right-hand side of the sphere equation.
    pub fn sphere_residual(&self) -> f64 {
        self.x1 * self.x1 + self.x2 * self.x2 + (self.x3 - 0.5) * (self.x3 - 0.5) - 0.25
    }

    /// Euclidean distance in R^3.
    pub fn distance(&self, other: &SpherePoint) -> f64 {
        let d1 = self.x1 - other.x1;
        let d2 = self.x2 - other.x2;
        // Near the north pole subtract the gaps instead of the heights.
        let d3 = if self.x3 > 0.5 && other.x3 > 0.5 {
            other.pole_gap - self.pole_gap
        } else {
            self.x3 - other.x3
        };
        (d1 * d1 + d2 * d2 + d3 * d3).sqrt()
    }

    /// Stereographic preimage; `None` at the north pole.
    pub fn to_plane(&self) -> Option<Complex64> {
        if self.pole_gap <= 0.0 {
            None
        } else {
            Some(Complex64::new(self.x1 / self.pole_gap, self.x2 / self.pole_gap))
        }
    }
}

/// Image of `x` under the inverse stereographic map.
pub fn map_point(x: ExtendedComplex) -> SpherePoint {
    match x {
        ExtendedComplex::Infinity => SpherePoint::NORTH_POLE,
        ExtendedComplex::Finite(z) => map_finite(z),
    }
}

pub fn map_finite(z: Complex64) -> SpherePoint {
    let r2 = z.norm_sqr();
    let denom = 1.0 + r2;
    SpherePoint {
        x1: z.re / denom,
        x2: z.im / denom,
        x3: r2 / denom,
        pole_gap: 1.0 / denom,
    }
}

/// Chordal distance between two points of the extended plane.
pub fn chordal_distance(x: ExtendedComplex, y: ExtendedComplex) -> f64 {
    match (x, y) {
        (ExtendedComplex::Infinity, ExtendedComplex::Infinity) => 0.0,
        (ExtendedComplex::Finite(z), ExtendedComplex::Infinity)
        | (ExtendedComplex::Infinity, ExtendedComplex::Finite(z)) => pole_distance(z),
        (ExtendedComplex::Finite(a), ExtendedComplex::Finite(b)) => {
            (a - b).norm() / ((1.0 + a.norm_sqr()).sqrt() * (1.0 + b.norm_sqr()).sqrt())
        }
    }
}

/// `|T(x) - (0, 0, 1)| = 1 / sqrt(1 + |x|^2)`.
pub fn pole_distance(z: Complex64) -> f64 {
    1.0 / (1.0 + z.norm_sqr()).sqrt()
}

/// Push a plane-side measure forward onto the sphere grid built from the
/// same cells. Weights are carried over unchanged.
pub fn push_forward(mu: &DiscreteMeasure, sphere_grid: &Arc<CellGrid>) -> Result<DiscreteMeasure> {
    let plane = mu.grid();
    if plane.side() != Side::Plane || sphere_grid.side() != Side::Sphere {
        return Err(VepError::GridMismatch(
            "push-forward maps a plane grid onto a sphere grid".into(),
        ));
    }
    if !plane.same_cells(sphere_grid) {
        return Err(VepError::GridMismatch(format!(
            "plane grid with {} cells does not match sphere grid with {} cells",
            plane.len(),
            sphere_grid.len()
        )));
    }
    DiscreteMeasure::new(Arc::clone(sphere_grid), mu.weights().to_vec())
}

/// Value of a transformed field at the north pole.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PoleValue {
    /// The support is bounded, the pole is not in its closure.
    Absent,
    Finite(f64),
    PlusInfinity,
}

/// `V_i(x) - (Cm)_i log(1 + |x|^2)` viewed as a field on the image of `Δ_i`,
/// extended to the north pole by its liminf.
#[derive(Debug, Clone)]
pub struct TransformedField {
    field: ExternalField,
    cm: f64,
    north_pole: PoleValue,
    lower_bound: f64,
}

impl TransformedField {
    /// Evaluate at the image of a plane point.
    pub fn eval_plane(&self, x: Complex64) -> f64 {
        let v = self.field.eval(x);
        if v == f64::INFINITY {
            return v;
        }
        v - self.cm * x.norm_sqr().ln_1p()
    }

    /// Evaluate at a sphere point; the pole returns its extended value.
    pub fn eval(&self, p: &SpherePoint) -> f64 {
        match p.to_plane() {
            Some(x) => self.eval_plane(x),
            None => match self.north_pole {
                PoleValue::Finite(v) => v,
                PoleValue::PlusInfinity | PoleValue::Absent => f64::INFINITY,
            },
        }
    }

    /// Recover `V_i(x)` from the transformed value.
    pub fn original(&self, x: Complex64) -> f64 {
        self.eval_plane(x) + self.cm * x.norm_sqr().ln_1p()
    }

    pub fn north_pole(&self) -> PoleValue {
        self.north_pole
    }

    pub fn lower_bound(&self) -> f64 {
        self.lower_bound
    }

    pub fn cm(&self) -> f64 {
        self.cm
    }
}

/// Build the transformed field of one component.
///
/// `samples` are the plane points on which the lower bound is taken (the
/// discretizer passes its cell centres).
pub fn transform_field(
    field: &ExternalField,
    cm: f64,
    support: &SupportSet,
    component: usize,
    samples: &[Complex64],
) -> Result<TransformedField> {
    let north_pole = if support.is_bounded() {
        PoleValue::Absent
    } else {
        let tail = tail_estimate(field, cm, support, component)?;
        match tail.class {
            TailClass::Strong => PoleValue::PlusInfinity,
            TailClass::Weak => {
                if tail.liminf == f64::INFINITY {
                    PoleValue::PlusInfinity
                } else {
                    PoleValue::Finite(tail.liminf)
                }
            }
            TailClass::Inadmissible => return Err(VepError::Inadmissible { component }),
        }
    };
    let mut out = TransformedField {
        field: field.clone(),
        cm,
        north_pole,
        lower_bound: f64::INFINITY,
    };
    let mut lower = match north_pole {
        PoleValue::Finite(v) => v,
        _ => f64::INFINITY,
    };
    for &x in samples {
        lower = lower.min(out.eval_plane(x));
    }
    out.lower_bound = lower;
    Ok(out)
}

/// Both sides of the identity relating mutual energies on the sphere and in
/// the plane, for two plane-side measures.
///
/// The left side is assembled from Euclidean distances between the sphere
/// images of the cells, the right side from plane distances plus the two
/// `log(1 + |x|^2)` moments. Both use the same cells.
pub fn energy_on_sphere_check(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<(f64, f64)> {
    if mu.grid().side() != Side::Plane || nu.grid().side() != Side::Plane {
        return Err(VepError::GridMismatch(
            "energy identity expects plane-side measures".into(),
        ));
    }
    let mu_s = push_forward(mu, &Arc::new(mu.grid().to_sphere()))?;
    let nu_s = push_forward(nu, &Arc::new(nu.grid().to_sphere()))?;
    let lhs = kernel_bilinear(mu_s.grid(), nu_s.grid(), 0.0, mu_s.weights(), nu_s.weights())?;

    let plane = kernel_bilinear(mu.grid(), nu.grid(), 0.0, mu.weights(), nu.weights())?;
    let moment = |m: &DiscreteMeasure| {
        let terms: Vec<f64> = m
            .weights()
            .iter()
            .zip(m.grid().cells())
            .map(|(w, c)| w * c.center.norm_sqr().ln_1p())
            .collect();
        pairwise_sum(&terms)
    };
    let rhs = plane + 0.5 * nu.mass() * moment(mu) + 0.5 * mu.mass() * moment(nu);
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn map_examples() {
        let p = map_finite(c(0.0, 0.0));
        assert_eq!(p.coords(), [0.0, 0.0, 0.0]);
        assert_eq!(map_point(ExtendedComplex::Infinity).coords(), [0.0, 0.0, 1.0]);
        let p = map_finite(c(1.0, 0.0));
        assert_eq!(p.coords(), [0.5, 0.0, 0.5]);
    }

    #[test]
    fn chordal_examples() {
        let zero = ExtendedComplex::Finite(c(0.0, 0.0));
        let one = ExtendedComplex::Finite(c(1.0, 0.0));
        assert_abs_diff_eq!(chordal_distance(zero, one), 1.0 / 2f64.sqrt(), epsilon = 1e-15);
        assert_eq!(chordal_distance(one, one), 0.0);
        assert_eq!(chordal_distance(zero, ExtendedComplex::Infinity), 1.0);
        let far = ExtendedComplex::Finite(c(1e8, 0.0));
        assert_abs_diff_eq!(chordal_distance(zero, far), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn pole_tail_equivalence() {
        for &(re, im) in &[(0.0, 0.0), (3.0, -4.0), (1e5, 2e5), (-0.3, 0.01)] {
            let z = c(re, im);
            let d = map_finite(z).distance(&SpherePoint::NORTH_POLE);
            assert_abs_diff_eq!(d, pole_distance(z), epsilon = 1e-12 * pole_distance(z));
        }
    }

    #[test]
    fn inverse_map_round_trips() {
        let z = c(2.5, -0.75);
        let back = map_finite(z).to_plane().unwrap();
        assert_abs_diff_eq!(back.re, z.re, epsilon = 1e-14);
        assert_abs_diff_eq!(back.im, z.im, epsilon = 1e-14);
        assert!(SpherePoint::NORTH_POLE.to_plane().is_none());
    }
}
