//! Cell grids along supports and the measures they carry.
//!
//! A cell is a straight piece of a support between two plane points. The
//! same cells can be viewed on the plane side (kernel evaluated with plane
//! distances and plane lengths) or on the sphere side (sphere images and
//! chord lengths).

use std::cmp::Ordering;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Result, VepError};
use crate::kernel::pairwise_sum;
use crate::sphere::{map_finite, SpherePoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Plane,
    Sphere,
}

/// One cell of a grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    /// Index of the support piece the cell lies on.
    pub piece: usize,
    /// Arc-length parameters of the cell ends along the piece.
    pub t0: f64,
    pub t1: f64,
    pub start: Complex64,
    pub end: Complex64,
    /// Quadrature node; not necessarily the plane midpoint on rays.
    pub center: Complex64,
    pub sphere_center: SpherePoint,
    pub plane_length: f64,
    /// `|T(start) - T(end)|`
    pub chord: f64,
}

impl Cell {
    pub fn new(piece: usize, t0: f64, t1: f64, start: Complex64, end: Complex64, center: Complex64) -> Self {
        let chord = map_finite(start).distance(&map_finite(end));
        Cell {
            piece,
            t0,
            t1,
            start,
            end,
            center,
            sphere_center: map_finite(center),
            plane_length: (end - start).norm(),
            chord,
        }
    }

    fn same_geometry(&self, other: &Cell) -> bool {
        self.start == other.start && self.end == other.end && self.center == other.center
    }
}

/// Ordered, non-overlapping cells covering (a truncation of) one support.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGrid {
    side: Side,
    component: usize,
    cells: Vec<Cell>,
}

impl CellGrid {
    pub fn new(side: Side, component: usize, cells: Vec<Cell>) -> Result<Self> {
        if cells.is_empty() {
            return Err(VepError::DegenerateSupport("grid without cells".into()));
        }
        if let Some(c) = cells.iter().find(|c| !(c.plane_length > 0.0) || !(c.chord > 0.0)) {
            return Err(VepError::DegenerateSupport(format!(
                "cell [{}, {}] on piece {} has zero length",
                c.t0, c.t1, c.piece
            )));
        }
        Ok(Self { side, component, cells })
    }

    /// Concatenation of several grids on one side.
    pub fn union(grids: &[&CellGrid]) -> Result<Self> {
        let side = grids
            .first()
            .ok_or_else(|| VepError::GridMismatch("union of no grids".into()))?
            .side;
        if grids.iter().any(|g| g.side != side) {
            return Err(VepError::GridMismatch("union of plane and sphere grids".into()));
        }
        let cells = grids.iter().flat_map(|g| g.cells.iter().copied()).collect();
        Self::new(side, grids[0].component, cells)
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn component(&self) -> usize {
        self.component
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    /// True iff both grids consist of the same cells in the same order.
    pub fn same_cells(&self, other: &CellGrid) -> bool {
        self.len() == other.len()
            && self
                .cells
                .iter()
                .zip(&other.cells)
                .all(|(a, b)| a.piece == b.piece && a.same_geometry(b))
    }

    /// Same cells seen on the sphere.
    pub fn to_sphere(&self) -> CellGrid {
        CellGrid {
            side: Side::Sphere,
            ..self.clone()
        }
    }

    /// Same cells seen in the plane.
    pub fn to_plane(&self) -> CellGrid {
        CellGrid {
            side: Side::Plane,
            ..self.clone()
        }
    }

    /// Cell size used by the kernel: plane length or chord length.
    pub fn size(&self, k: usize) -> f64 {
        match self.side {
            Side::Plane => self.cells[k].plane_length,
            Side::Sphere => self.cells[k].chord,
        }
    }

    /// Distance between node `k` of `self` and node `l` of `other`, on the
    /// side of `self`.
    pub fn node_distance(&self, k: usize, other: &CellGrid, l: usize) -> f64 {
        let (a, b) = (&self.cells[k], &other.cells[l]);
        match self.side {
            Side::Plane => (a.center - b.center).norm(),
            Side::Sphere => a.sphere_center.distance(&b.sphere_center),
        }
    }

    /// True iff cell `k` of `self` and cell `l` of `other` are the same cell.
    pub fn identical_cells(&self, k: usize, other: &CellGrid, l: usize) -> bool {
        self.cells[k].same_geometry(&other.cells[l])
    }

    /// Lexicographic order on the cell geometry, used to fix summation order.
    pub(crate) fn geometry_cmp(&self, other: &CellGrid) -> Ordering {
        self.len().cmp(&other.len()).then_with(|| {
            for (a, b) in self.cells.iter().zip(&other.cells) {
                let ord = a
                    .start
                    .re
                    .total_cmp(&b.start.re)
                    .then(a.start.im.total_cmp(&b.start.im))
                    .then(a.end.re.total_cmp(&b.end.re))
                    .then(a.end.im.total_cmp(&b.end.im));
                if ord != Ordering::Equal {
                    return ord;
                }
            }
            Ordering::Equal
        })
    }
}

/// Anything that assigns a weight to every cell of a grid.
pub trait Measure {
    fn grid(&self) -> &Arc<CellGrid>;
    fn weights(&self) -> &[f64];

    /// Total (signed) mass, summed pairwise.
    fn mass(&self) -> f64 {
        pairwise_sum(self.weights())
    }
}

/// Nonnegative weights on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    grid: Arc<CellGrid>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(grid: Arc<CellGrid>, weights: Vec<f64>) -> Result<Self> {
        check_len(&grid, &weights)?;
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(VepError::DimensionMismatch(format!(
                "measure weights must be finite and nonnegative, got {w}"
            )));
        }
        Ok(Self { grid, weights })
    }

    pub fn zero(grid: Arc<CellGrid>) -> Self {
        let n = grid.len();
        Self {
            grid,
            weights: vec![0.0; n],
        }
    }

    /// Mass `m` spread over the cells in proportion to their plane length.
    pub fn uniform(grid: Arc<CellGrid>, mass: f64) -> Self {
        let lengths: Vec<f64> = grid.cells().iter().map(|c| c.plane_length).collect();
        let total = pairwise_sum(&lengths);
        let weights = lengths.iter().map(|l| mass * l / total).collect();
        Self { grid, weights }
    }

    pub fn grid(&self) -> &Arc<CellGrid> {
        &self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mass(&self) -> f64 {
        pairwise_sum(&self.weights)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            Arc::clone(&self.grid),
            self.weights.iter().map(|w| w * factor).collect(),
        )
    }

    /// `self - other` on a common grid.
    pub fn minus(&self, other: &DiscreteMeasure) -> Result<SignedMeasure> {
        if !self.grid.same_cells(&other.grid) || self.grid.side() != other.grid.side() {
            return Err(VepError::GridMismatch(
                "difference of measures on different grids".into(),
            ));
        }
        SignedMeasure::new(
            Arc::clone(&self.grid),
            self.weights.iter().zip(&other.weights).map(|(a, b)| a - b).collect(),
        )
    }
}

impl Measure for DiscreteMeasure {
    fn grid(&self) -> &Arc<CellGrid> {
        &self.grid
    }

    fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Finite real weights on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedMeasure {
    grid: Arc<CellGrid>,
    weights: Vec<f64>,
}

impl SignedMeasure {
    pub fn new(grid: Arc<CellGrid>, weights: Vec<f64>) -> Result<Self> {
        check_len(&grid, &weights)?;
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(VepError::DimensionMismatch("signed weights must be finite".into()));
        }
        Ok(Self { grid, weights })
    }
}

impl Measure for SignedMeasure {
    fn grid(&self) -> &Arc<CellGrid> {
        &self.grid
    }

    fn weights(&self) -> &[f64] {
        &self.weights
    }
}

fn check_len(grid: &CellGrid, weights: &[f64]) -> Result<()> {
    if grid.len() != weights.len() {
        return Err(VepError::DimensionMismatch(format!(
            "{} weights for a grid of {} cells",
            weights.len(),
            grid.len()
        )));
    }
    Ok(())
}
