//! Cell grids on the sphere, discretized constraints and the compactified
//! problem.
//!
//! Segments are cut uniformly in their plane parameter. A ray `a + t u` is
//! cut uniformly in the arc length of its spherical image, which for
//! `1 + |a + t u|^2 = (t + β)^2 + δ^2` is
//!
//! ```text
//! s(t) = (atan((t + β) / δ) - atan(β / δ)) / δ,
//! ```
//!
//! and truncated where its chordal distance to the north pole reaches the
//! pole clearance `ε`. Cells are shared among the pieces of a support in
//! proportion to the spherical arc length of each piece.

use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Result, VepError};
use crate::grid::{Cell, CellGrid};
use crate::kernel::pairwise_sum;
use crate::problem::{CholeskyFactor, InteractionMatrix, SupportPiece, SupportSet, UpperConstraint, ValidatedProblem};
use crate::sphere::{transform_field, TransformedField};

pub const MIN_CELLS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOptions {
    /// Cells per component.
    pub cells: usize,
    /// Minimal chordal distance between a cell and the north pole.
    pub pole_clearance: f64,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            cells: 200,
            pole_clearance: 1e-3,
        }
    }
}

/// Arc-length parametrization of the spherical image of a line.
#[derive(Debug, Clone, Copy)]
struct SphereArc {
    beta: f64,
    delta: f64,
}

impl SphereArc {
    fn new(piece: &SupportPiece) -> Self {
        let a = piece.origin();
        let u = piece.direction();
        let beta = (a * u.conj()).re;
        let delta = (1.0 + a.norm_sqr() - beta * beta).max(1.0).sqrt();
        Self { beta, delta }
    }

    fn s(&self, t: f64) -> f64 {
        (((t + self.beta) / self.delta).atan() - (self.beta / self.delta).atan()) / self.delta
    }

    fn t(&self, s: f64) -> f64 {
        self.delta * (self.delta * s + (self.beta / self.delta).atan()).tan() - self.beta
    }

    /// Parameter at which the chordal distance to the pole equals `eps`.
    fn pole_cutoff(&self, eps: f64) -> f64 {
        (1.0 / (eps * eps) - self.delta * self.delta).max(0.0).sqrt() - self.beta
    }
}

/// Parameter range `[0, t_end]` of a piece after pole truncation.
fn piece_extent(piece: &SupportPiece, eps: f64) -> Result<f64> {
    match piece {
        SupportPiece::Segment { .. } => Ok(piece.length()),
        SupportPiece::Ray { a, .. } => {
            let t_end = SphereArc::new(piece).pole_cutoff(eps);
            if !(t_end > 0.0) {
                return Err(VepError::DegenerateSupport(format!(
                    "ray from {a} lies within the pole clearance {eps}"
                )));
            }
            Ok(t_end)
        }
    }
}

/// Split `n` cells in proportion to `lengths`, at least one per piece.
fn apportion(lengths: &[f64], n: usize) -> Vec<usize> {
    let k = lengths.len();
    let total: f64 = lengths.iter().sum();
    let spare = n - k;
    let quotas: Vec<f64> = lengths.iter().map(|l| spare as f64 * l / total).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| {
        let (ri, rj) = (quotas[i] - quotas[i].floor(), quotas[j] - quotas[j].floor());
        rj.total_cmp(&ri).then(i.cmp(&j))
    });
    let assigned: usize = counts.iter().sum();
    for &i in order.iter().take(spare - assigned) {
        counts[i] += 1;
    }
    counts.iter().map(|c| c + 1).collect()
}

/// Plane-side grid of `n` cells on `support`.
pub fn build_grid(support: &SupportSet, n: usize, pole_clearance: f64, component: usize) -> Result<CellGrid> {
    if n < MIN_CELLS {
        return Err(VepError::BadParams(format!("need at least {MIN_CELLS} cells, got {n}")));
    }
    if !(pole_clearance > 0.0 && pole_clearance < 1.0) {
        return Err(VepError::BadParams(format!(
            "pole clearance must lie in (0, 1), got {pole_clearance}"
        )));
    }
    support.validate()?;
    if support.pieces.len() > n {
        return Err(VepError::BadParams(format!(
            "{} pieces need at least as many cells, got {n}",
            support.pieces.len()
        )));
    }
    let extents: Vec<f64> = support
        .pieces
        .iter()
        .map(|p| piece_extent(p, pole_clearance))
        .collect::<Result<_>>()?;
    let arcs: Vec<SphereArc> = support.pieces.iter().map(SphereArc::new).collect();
    let sphere_lengths: Vec<f64> = arcs.iter().zip(&extents).map(|(arc, &t)| arc.s(t)).collect();
    let counts = apportion(&sphere_lengths, n);

    let mut cells = Vec::with_capacity(n);
    for (p, piece) in support.pieces.iter().enumerate() {
        let m = counts[p];
        match piece {
            SupportPiece::Segment { .. } => {
                let len = extents[p];
                for k in 0..m {
                    let t0 = len * k as f64 / m as f64;
                    let t1 = len * (k + 1) as f64 / m as f64;
                    let (a, b) = (piece.at(t0), piece.at(t1));
                    cells.push(Cell::new(p, t0, t1, a, b, piece.at(0.5 * (t0 + t1))));
                }
            }
            SupportPiece::Ray { .. } => {
                let arc = arcs[p];
                let total = sphere_lengths[p];
                let t_at = |k: f64| {
                    if k == 0.0 {
                        0.0
                    } else if k == m as f64 {
                        extents[p]
                    } else {
                        arc.t(total * k / m as f64)
                    }
                };
                for k in 0..m {
                    let (t0, t1) = (t_at(k as f64), t_at((k + 1) as f64));
                    let tc = t_at(k as f64 + 0.5);
                    cells.push(Cell::new(p, t0, t1, piece.at(t0), piece.at(t1), piece.at(tc)));
                }
            }
        }
    }
    CellGrid::new(crate::grid::Side::Plane, component, cells)
}

/// Per-cell caps `density × plane length` for one component.
pub fn discretize_constraint(constraint: &UpperConstraint, grid: &CellGrid, mass: f64) -> Result<Vec<f64>> {
    let density = constraint.density_value();
    if density.is_nan() || density < 0.0 {
        return Err(VepError::InfeasibleConstraint {
            component: constraint.component,
            cap: density,
            mass,
        });
    }
    let caps: Vec<f64> = grid.cells().iter().map(|c| density * c.plane_length).collect();
    let total = pairwise_sum(&caps);
    if total < mass {
        return Err(VepError::InfeasibleConstraint {
            component: constraint.component,
            cap: total,
            mass,
        });
    }
    Ok(caps)
}

/// Plane point with the density of a solved component there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityPoint {
    pub x: Complex64,
    /// Weight per unit plane arc length.
    pub density: f64,
    pub sphere_weight: f64,
}

/// Plane-side densities of cell weights.
pub fn density_to_plane(weights: &[f64], grid: &CellGrid) -> Result<Vec<DensityPoint>> {
    if weights.len() != grid.len() {
        return Err(VepError::DimensionMismatch(format!(
            "{} weights for a grid of {} cells",
            weights.len(),
            grid.len()
        )));
    }
    Ok(grid
        .cells()
        .iter()
        .zip(weights)
        .map(|(c, &w)| DensityPoint {
            x: c.center,
            density: w / c.plane_length,
            sphere_weight: w,
        })
        .collect())
}

/// CSV listing of a grid: cell index, plane preimage endpoints, sphere
/// centre and kernel size.
pub fn grid_csv(grid: &CellGrid) -> String {
    let mut out = String::from("index,piece,t0,t1,start_re,start_im,end_re,end_im,center_x1,center_x2,center_x3,h\n");
    for (k, c) in grid.cells().iter().enumerate() {
        let p = c.sphere_center;
        let _ = writeln!(
            out,
            "{k},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            c.piece,
            c.t0,
            c.t1,
            c.start.re,
            c.start.im,
            c.end.re,
            c.end.im,
            p.x1,
            p.x2,
            p.x3,
            grid.size(k)
        );
    }
    out
}

/// The compactified, discretized problem.
#[derive(Debug, Clone)]
pub struct SphereProblem {
    /// Sphere-side grids, one per component.
    pub grids: Vec<Arc<CellGrid>>,
    /// The same cells seen in the plane.
    pub plane_grids: Vec<Arc<CellGrid>>,
    pub fields: Vec<TransformedField>,
    /// `𝒱_i` at the cell nodes; `+inf` marks an excluded cell.
    pub field_values: Vec<Vec<f64>>,
    /// Per-cell mass bounds, if the component is constrained.
    pub caps: Vec<Option<Vec<f64>>>,
    pub masses: Vec<f64>,
    pub interaction: InteractionMatrix,
    pub cholesky: CholeskyFactor,
    pub cm: Vec<f64>,
    pub options: GridOptions,
}

impl SphereProblem {
    pub fn dim(&self) -> usize {
        self.masses.len()
    }

    pub fn total_cells(&self) -> usize {
        self.grids.iter().map(|g| g.len()).sum()
    }
}

/// Compactify and discretize a validated problem.
pub fn discretize(problem: &ValidatedProblem, options: GridOptions) -> Result<SphereProblem> {
    let spec = problem.spec();
    let d = spec.dim();
    let mut grids = Vec::with_capacity(d);
    let mut plane_grids = Vec::with_capacity(d);
    let mut fields = Vec::with_capacity(d);
    let mut field_values = Vec::with_capacity(d);
    let mut caps = Vec::with_capacity(d);
    for i in 0..d {
        let plane = build_grid(&spec.supports[i], options.cells, options.pole_clearance, i)?;
        let centers: Vec<Complex64> = plane.cells().iter().map(|c| c.center).collect();
        let tf = transform_field(&spec.fields[i], problem.cm()[i], &spec.supports[i], i, &centers)?;
        let values: Vec<f64> = centers.iter().map(|&x| tf.eval_plane(x)).collect();

        let mut component_caps: Option<Vec<f64>> = None;
        for con in spec.constraints.iter().filter(|c| c.component == i) {
            let c = discretize_constraint(con, &plane, spec.masses[i])?;
            component_caps = Some(match component_caps {
                None => c,
                Some(prev) => prev.iter().zip(&c).map(|(a, b)| a.min(*b)).collect(),
            });
        }
        if let Some(c) = &component_caps {
            let usable: Vec<f64> = c
                .iter()
                .zip(&values)
                .filter(|(_, v)| **v < f64::INFINITY)
                .map(|(c, _)| *c)
                .collect();
            let total = pairwise_sum(&usable);
            if total < spec.masses[i] {
                return Err(VepError::InfeasibleConstraint {
                    component: i,
                    cap: total,
                    mass: spec.masses[i],
                });
            }
        }

        grids.push(Arc::new(plane.to_sphere()));
        plane_grids.push(Arc::new(plane));
        fields.push(tf);
        field_values.push(values);
        caps.push(component_caps);
    }
    Ok(SphereProblem {
        grids,
        plane_grids,
        fields,
        field_values,
        caps,
        masses: spec.masses.clone(),
        interaction: spec.interaction.clone(),
        cholesky: problem.cholesky().clone(),
        cm: problem.cm().to_vec(),
        options,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn segment_grid_is_uniform() {
        let g = build_grid(&SupportSet::segment(c(-1.0, 0.0), c(1.0, 0.0)), 8, 1e-3, 0).unwrap();
        for cell in g.cells() {
            assert_abs_diff_eq!(cell.plane_length, 0.25, epsilon = 1e-15);
        }
        assert_eq!(g.cells()[0].start, c(-1.0, 0.0));
        assert_eq!(g.cells()[7].end, c(1.0, 0.0));
    }

    #[test]
    fn ray_grid_has_comparable_chords_and_clears_the_pole() {
        let ray = SupportSet::new(vec![SupportPiece::ray(c(0.0, 0.0), c(1.0, 0.0))]);
        let g = build_grid(&ray, 8, 1e-3, 0).unwrap().to_sphere();
        let sizes: Vec<f64> = (0..g.len()).map(|k| g.size(k)).collect();
        let max = sizes.iter().cloned().fold(0.0, f64::max);
        let min = sizes.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(max / min <= 4.0, "chord ratio {}", max / min);
        let last = g.cells().last().unwrap();
        assert_abs_diff_eq!(crate::sphere::pole_distance(last.end), 1e-3, epsilon = 1e-12);
    }

    #[test]
    fn line_grid_is_symmetric() {
        let g = build_grid(&SupportSet::real_line(), 40, 1e-3, 0).unwrap();
        let (left, right) = g.cells().split_at(20);
        for (a, b) in left.iter().zip(right) {
            assert_eq!(a.center, -b.center);
            assert_eq!(a.plane_length, b.plane_length);
        }
    }

    #[test]
    fn apportion_keeps_total() {
        assert_eq!(apportion(&[1.0, 1.0], 9).iter().sum::<usize>(), 9);
        assert_eq!(apportion(&[1.0, 1e-9, 3.0], 10), vec![3, 1, 6]);
    }

    #[test]
    fn constraint_caps() {
        let g = build_grid(&SupportSet::segment(c(-1.0, 0.0), c(1.0, 0.0)), 8, 1e-3, 0).unwrap();
        let con = |density| UpperConstraint { component: 0, density };
        assert_eq!(discretize_constraint(&con(Some(1.0)), &g, 1.0).unwrap(), vec![0.25; 8]);
        assert!(discretize_constraint(&con(None), &g, 1.0)
            .unwrap()
            .iter()
            .all(|c| c.is_infinite()));
        assert!(matches!(
            discretize_constraint(&con(Some(0.3)), &g, 1.0),
            Err(VepError::InfeasibleConstraint { .. })
        ));
    }

    #[test]
    fn density_examples() {
        let g = build_grid(&SupportSet::segment(c(0.0, 0.0), c(4.0, 0.0)), 8, 1e-3, 0).unwrap();
        let pts = density_to_plane(&[0.125; 8], &g).unwrap();
        assert!(pts.iter().all(|p| (p.density - 0.25).abs() < 1e-15));
        let mass: f64 = pts.iter().zip(g.cells()).map(|(p, c)| p.density * c.plane_length).sum();
        assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-12);
    }
}
