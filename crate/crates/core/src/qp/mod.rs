//! The discretized energy as a quadratic program
//!
//! ```text
//! minimize  E(w) = w^t A w + b^t w
//! subject to  0 <= w <= cap,  sum over component i of w = m_i,
//! ```
//!
//! where `A` has blocks `c_ij K_ij` and `b` holds the transformed fields at
//! the cell nodes. Cells whose field value is `+inf` are not variables.

mod oracle;
mod projection;
mod solver;

use std::ops::Range;

use rayon::prelude::*;

pub use oracle::{brute_force_minimize, multi_start_endpoints, project_capped_simplex_sorted, reference_minimize};
pub use projection::project_capped_simplex;
pub use solver::{kkt_residual, kkt_summary, solve, KktSummary, Solution, SolveOptions};

use crate::discretize::SphereProblem;
use crate::error::{Result, VepError};
use crate::kernel::{dot, kernel_entry, pairwise_sum};

/// Variables of one component.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentBlock {
    pub range: Range<usize>,
    pub mass: f64,
    /// Grid cell of each variable.
    pub cells: Vec<usize>,
    pub grid_len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyQP {
    n: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    caps: Vec<f64>,
    components: Vec<ComponentBlock>,
}

impl EnergyQP {
    /// Build a QP directly from its data; `a` is row-major `n x n`.
    pub fn from_parts(a: Vec<f64>, b: Vec<f64>, caps: Vec<f64>, components: Vec<ComponentBlock>) -> Result<Self> {
        let n = b.len();
        if a.len() != n * n || caps.len() != n {
            return Err(VepError::DimensionMismatch("QP data sizes disagree".into()));
        }
        let mut next = 0;
        for (i, c) in components.iter().enumerate() {
            if c.range.start != next || c.range.is_empty() || c.cells.len() != c.range.len() {
                return Err(VepError::DimensionMismatch(format!("bad variable block {i}")));
            }
            next = c.range.end;
        }
        if next != n {
            return Err(VepError::DimensionMismatch(
                "variable blocks do not cover the QP".into(),
            ));
        }
        for k in 0..n {
            for l in 0..k {
                if a[k * n + l] != a[l * n + k] {
                    return Err(VepError::NotSymmetric { row: k, col: l });
                }
            }
        }
        Ok(Self {
            n,
            a,
            b,
            caps,
            components,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[ComponentBlock] {
        &self.components
    }

    pub fn a(&self, k: usize, l: usize) -> f64 {
        self.a[k * self.n + l]
    }

    pub fn a_row(&self, k: usize) -> &[f64] {
        &self.a[k * self.n..(k + 1) * self.n]
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn caps(&self) -> &[f64] {
        &self.caps
    }

    /// `A v`, rows in parallel, each row summed sequentially.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n).into_par_iter().map(|k| dot(self.a_row(k), v)).collect()
    }

    /// `w^t A w + b^t w`.
    pub fn objective(&self, w: &[f64]) -> f64 {
        let aw = self.apply(w);
        let terms: Vec<f64> = (0..self.n).map(|k| w[k] * aw[k] + self.b[k] * w[k]).collect();
        pairwise_sum(&terms)
    }

    /// `2 A w + b`.
    pub fn gradient(&self, w: &[f64]) -> Vec<f64> {
        self.apply(w).iter().zip(&self.b).map(|(aw, b)| 2.0 * aw + b).collect()
    }

    /// Scatter variables to full per-component grid weights.
    pub fn expand(&self, w: &[f64]) -> Vec<Vec<f64>> {
        self.expand_with(w, 0.0)
    }

    pub(crate) fn expand_with(&self, w: &[f64], fill: f64) -> Vec<Vec<f64>> {
        self.components
            .iter()
            .map(|c| {
                let mut full = vec![fill; c.grid_len];
                for (v, &cell) in c.range.clone().zip(&c.cells) {
                    full[cell] = w[v];
                }
                full
            })
            .collect()
    }

    /// Gather full grid weights into variables. Mass on excluded cells is
    /// rejected.
    pub fn restrict(&self, full: &[Vec<f64>]) -> Result<Vec<f64>> {
        if full.len() != self.dim() {
            return Err(VepError::DimensionMismatch("one weight vector per component".into()));
        }
        let mut w = vec![0.0; self.n];
        for (i, (c, f)) in self.components.iter().zip(full).enumerate() {
            if f.len() != c.grid_len {
                return Err(VepError::DimensionMismatch(format!(
                    "component {i} has {} cells",
                    c.grid_len
                )));
            }
            for (v, &cell) in c.range.clone().zip(&c.cells) {
                w[v] = f[cell];
            }
            let mut used = vec![false; c.grid_len];
            for &k in &c.cells {
                used[k] = true;
            }
            if f.iter().zip(&used).any(|(x, u)| !u && *x != 0.0) {
                return Err(VepError::DimensionMismatch(format!(
                    "component {i} puts mass on excluded cells"
                )));
            }
        }
        Ok(w)
    }
}

/// Assemble the QP of a discretized problem.
pub fn assemble(problem: &SphereProblem) -> Result<EnergyQP> {
    let d = problem.dim();
    let mut components = Vec::with_capacity(d);
    let mut next = 0;
    for i in 0..d {
        let cells: Vec<usize> = problem.field_values[i]
            .iter()
            .enumerate()
            .filter(|(_, v)| **v < f64::INFINITY)
            .map(|(k, _)| k)
            .collect();
        if cells.is_empty() {
            return Err(VepError::ExcludedAllCells { component: i });
        }
        let range = next..next + cells.len();
        next = range.end;
        components.push(ComponentBlock {
            range,
            mass: problem.masses[i],
            cells,
            grid_len: problem.grids[i].len(),
        });
    }
    let n = next;
    let mut a = vec![0.0; n * n];
    for i in 0..d {
        for j in i..d {
            let cij = problem.interaction.get(i, j);
            let (gi, gj) = (&problem.grids[i], &problem.grids[j]);
            let (bi, bj) = (&components[i], &components[j]);
            let rows: Vec<Vec<f64>> = bi
                .cells
                .par_iter()
                .map(|&k| {
                    bj.cells
                        .iter()
                        .map(|&l| {
                            let dist = if gi.identical_cells(k, gj, l) {
                                0.0
                            } else {
                                gi.node_distance(k, gj, l)
                            };
                            cij * kernel_entry(dist, gi.size(k), gj.size(l), 0.0)
                        })
                        .collect()
                })
                .collect();
            for (p, row) in rows.iter().enumerate() {
                for (q, &v) in row.iter().enumerate() {
                    let (r, c) = (bi.range.start + p, bj.range.start + q);
                    a[r * n + c] = v;
                    a[c * n + r] = v;
                }
            }
        }
    }
    let mut b = Vec::with_capacity(n);
    let mut caps = Vec::with_capacity(n);
    for (i, c) in components.iter().enumerate() {
        for &k in &c.cells {
            b.push(problem.field_values[i][k]);
            caps.push(problem.caps[i].as_ref().map_or(f64::INFINITY, |cap| cap[k]));
        }
    }
    Ok(EnergyQP {
        n,
        a,
        b,
        caps,
        components,
    })
}
