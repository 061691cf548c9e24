//! Cell-averaged logarithmic kernel, mutual energies and potentials.
//!
//! Entry `(k, l)` of a kernel block approximates the mean of
//! `log 1/|s - t|` over `s` in cell `k` and `t` in cell `l`:
//!
//! * distinct nodes: `-log d` at the node distance `d`,
//! * coincident nodes: `3/2 - log sqrt(h_k h_l)`, the exact mean over a
//!   straight cell of length `h` when the cells are the same,
//! * regularized kernel `r > 0`: `-1/2 log(d^2 + r^2)` everywhere.

use std::cmp::Ordering;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Result, VepError};
use crate::grid::{CellGrid, Measure, Side};

/// Sum with a fixed binary-tree topology.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 16;
    if xs.len() <= LEAF {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        acc
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

/// Dense kernel values between two grids, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelBlock {
    rows: usize,
    cols: usize,
    r: f64,
    data: Vec<f64>,
}

impl KernelBlock {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn regularization(&self) -> f64 {
        self.r
    }

    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.data[k * self.cols + l]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.cols..(k + 1) * self.cols]
    }

    /// `K v`; each row is summed sequentially.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols, "vector length does not match kernel block");
        (0..self.rows).into_par_iter().map(|k| dot(self.row(k), v)).collect()
    }

    /// `u^t K v`.
    pub fn bilinear(&self, u: &[f64], v: &[f64]) -> f64 {
        assert_eq!(u.len(), self.rows, "vector length does not match kernel block");
        let kv = self.apply(v);
        let terms: Vec<f64> = u.iter().zip(&kv).map(|(a, b)| a * b).collect();
        pairwise_sum(&terms)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// Kernel entry for two cells at node distance `d` with sizes `hk`, `hl`.
pub fn kernel_entry(d: f64, hk: f64, hl: f64, r: f64) -> f64 {
    if r > 0.0 {
        -0.5 * (d * d + r * r).ln()
    } else if d > 0.0 {
        -d.ln()
    } else {
        1.5 - 0.5 * (hk * hl).ln()
    }
}

/// Assemble the kernel block between two grids on the same side.
pub fn kernel_matrix(gi: &CellGrid, gj: &CellGrid, r: f64) -> Result<KernelBlock> {
    if !(r >= 0.0) {
        return Err(VepError::NegativeRegularization(r));
    }
    if gi.side() != gj.side() {
        return Err(VepError::GridMismatch(
            "kernel between a plane grid and a sphere grid".into(),
        ));
    }
    let (rows, cols) = (gi.len(), gj.len());
    let data: Vec<f64> = (0..rows)
        .into_par_iter()
        .flat_map_iter(|k| {
            let hk = gi.size(k);
            (0..cols).map(move |l| {
                let d = if gi.identical_cells(k, gj, l) {
                    0.0
                } else {
                    gi.node_distance(k, gj, l)
                };
                kernel_entry(d, hk, gj.size(l), r)
            })
        })
        .collect();
    Ok(KernelBlock { rows, cols, r, data })
}

/// `u^t K v` for the kernel between two grids, without storing the block.
pub fn kernel_bilinear(gi: &CellGrid, gj: &CellGrid, r: f64, u: &[f64], v: &[f64]) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(VepError::NegativeRegularization(r));
    }
    if gi.side() != gj.side() {
        return Err(VepError::GridMismatch(
            "kernel between a plane grid and a sphere grid".into(),
        ));
    }
    if u.len() != gi.len() || v.len() != gj.len() {
        return Err(VepError::DimensionMismatch("weights do not match the grids".into()));
    }
    let terms: Vec<f64> = (0..gi.len())
        .into_par_iter()
        .map(|k| {
            if u[k] == 0.0 {
                return 0.0;
            }
            let hk = gi.size(k);
            let mut acc = 0.0;
            for (l, &vl) in v.iter().enumerate() {
                let d = if gi.identical_cells(k, gj, l) {
                    0.0
                } else {
                    gi.node_distance(k, gj, l)
                };
                acc += kernel_entry(d, hk, gj.size(l), r) * vl;
            }
            u[k] * acc
        })
        .collect();
    Ok(pairwise_sum(&terms))
}

fn orientation(a: &dyn Measure, b: &dyn Measure) -> Ordering {
    let (wa, wb) = (a.weights(), b.weights());
    wa.len()
        .cmp(&wb.len())
        .then_with(|| {
            wa.iter()
                .zip(wb)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| *o != Ordering::Equal)
                .unwrap_or(Ordering::Equal)
        })
        .then_with(|| a.grid().geometry_cmp(b.grid()))
}

/// `I(μ, ν)` with kernel regularization `r`.
///
/// The pair is put into a canonical order before summing, so the result is
/// bitwise symmetric in its arguments.
pub fn mutual_energy(mu: &dyn Measure, nu: &dyn Measure, r: f64) -> Result<f64> {
    let (a, b) = if orientation(mu, nu) == Ordering::Greater {
        (nu, mu)
    } else {
        (mu, nu)
    };
    kernel_bilinear(a.grid(), b.grid(), r, a.weights(), b.weights())
}

/// `I(μ) = I(μ, μ)`.
pub fn self_energy(mu: &dyn Measure, r: f64) -> Result<f64> {
    mutual_energy(mu, mu, r)
}

/// Antiderivative of `log sqrt(τ^2 + d^2)` in `τ`.
fn log_antiderivative(tau: f64, d: f64) -> f64 {
    if d == 0.0 {
        if tau == 0.0 {
            0.0
        } else {
            tau * tau.abs().ln() - tau
        }
    } else {
        0.5 * (tau * (tau * tau + d * d).ln() - 2.0 * tau + 2.0 * d * (tau / d).atan())
    }
}

/// Mean of `log 1/|x - s|` over `s` on the straight cell from `a` to `b`.
pub fn cell_average_log(x: Complex64, a: Complex64, b: Complex64) -> f64 {
    let len = (b - a).norm();
    let e = (b - a) / len;
    let rel = (x - a) * e.conj();
    let (p, d) = (rel.re, rel.im.abs());
    -(log_antiderivative(len - p, d) - log_antiderivative(-p, d)) / len
}

/// `U^μ(x) = ∫ log 1/|x - t| dμ(t)` at plane points, each cell's weight
/// spread uniformly along the cell.
pub fn potential(mu: &dyn Measure, points: &[Complex64]) -> Result<Vec<f64>> {
    if mu.grid().side() != Side::Plane {
        return Err(VepError::GridMismatch("potential expects a plane-side measure".into()));
    }
    let cells = mu.grid().cells();
    let w = mu.weights();
    Ok(points
        .par_iter()
        .map(|&x| {
            let terms: Vec<f64> = cells
                .iter()
                .zip(w)
                .map(|(c, &wk)| {
                    if wk == 0.0 {
                        0.0
                    } else {
                        wk * cell_average_log(x, c.start, c.end)
                    }
                })
                .collect();
            pairwise_sum(&terms)
        })
        .collect())
}

/// Potential of the pushed-forward measure at the north pole.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NorthPolePotential {
    /// `sum_c w_c 1/2 log(1 + |x_c|^2)`
    pub value: f64,
    /// Tail contributions over dyadic shells `2^k <= |x| < 2^(k+1)` do not
    /// decay geometrically, so the value would keep growing as the grid is
    /// extended toward infinity.
    pub divergent: bool,
}

/// `U^{T*μ}(0, 0, 1)`, using `|T(x) - (0, 0, 1)| = 1 / sqrt(1 + |x|^2)`.
pub fn north_pole_potential(mu: &dyn Measure) -> NorthPolePotential {
    let cells = mu.grid().cells();
    let terms: Vec<f64> = cells
        .iter()
        .zip(mu.weights())
        .map(|(c, w)| w * 0.5 * c.center.norm_sqr().ln_1p())
        .collect();
    let value = pairwise_sum(&terms);

    let mut shells: Vec<f64> = Vec::new();
    for (c, t) in cells.iter().zip(&terms) {
        let radius = c.center.norm();
        if radius >= 2.0 && *t != 0.0 {
            let k = radius.log2().floor() as usize;
            if shells.len() <= k {
                shells.resize(k + 1, 0.0);
            }
            shells[k] += t.abs();
        }
    }
    let top: Vec<f64> = shells.iter().rev().take(4).copied().collect();
    let divergent = top.len() == 4 && top.iter().all(|&t| t > 0.0) && {
        // geometric mean of the last three shell-to-shell ratios
        let ratio = (top[0] / top[3]).powf(1.0 / 3.0);
        ratio >= 0.8
    };
    NorthPolePotential { value, divergent }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Cell, DiscreteMeasure};
    use approx::assert_abs_diff_eq;
    use std::sync::Arc;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn segment_grid(a: f64, b: f64, n: usize) -> Arc<CellGrid> {
        let h = (b - a) / n as f64;
        let cells = (0..n)
            .map(|k| {
                let (s, e) = (a + h * k as f64, a + h * (k + 1) as f64);
                Cell::new(0, s - a, e - a, c(s, 0.0), c(e, 0.0), c(0.5 * (s + e), 0.0))
            })
            .collect();
        Arc::new(CellGrid::new(Side::Plane, 0, cells).unwrap())
    }

    #[test]
    fn entry_examples() {
        assert_eq!(kernel_entry(1.0, 1.0, 1.0, 0.0), 0.0);
        assert_eq!(kernel_entry(0.0, 1.0, 1.0, 1.0), 0.0);
        assert_abs_diff_eq!(kernel_entry(0.0, 0.1, 0.1, 0.0), 3.802585092994046, epsilon = 1e-12);
        assert!(matches!(
            kernel_matrix(&segment_grid(0.0, 1.0, 2), &segment_grid(0.0, 1.0, 2), -1.0),
            Err(VepError::NegativeRegularization(_))
        ));
    }

    #[test]
    fn uniform_energy_on_interval() {
        let mu = DiscreteMeasure::uniform(segment_grid(-1.0, 1.0, 400), 1.0);
        let e = self_energy(&mu, 0.0).unwrap();
        assert_abs_diff_eq!(e, 1.5 - 2f64.ln(), epsilon = 5e-3);
        let zero = DiscreteMeasure::zero(Arc::clone(mu.grid()));
        assert_eq!(mutual_energy(&mu, &zero, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn potential_examples() {
        let mu = DiscreteMeasure::uniform(segment_grid(-1.0, 1.0, 400), 1.0);
        let u = potential(&mu, &[c(0.0, 0.0), c(10.0, 0.0)]).unwrap();
        assert_abs_diff_eq!(u[0], 1.0, epsilon = 1e-12);
        let exact = -0.5 * (11.0 * 11f64.ln() - 9.0 * 9f64.ln() - 2.0);
        assert_abs_diff_eq!(u[1], exact, epsilon = 1e-10);

        let tiny = DiscreteMeasure::uniform(segment_grid(-1e-6, 1e-6, 1), 1.0);
        let u = potential(&tiny, &[c(0.6, 0.8)]).unwrap();
        assert_abs_diff_eq!(u[0], 0.0, epsilon = 1e-11);
    }

    #[test]
    fn north_pole_examples() {
        let point = |x: f64| {
            let g = Arc::new(
                CellGrid::new(
                    Side::Plane,
                    0,
                    vec![Cell::new(0, 0.0, 1e-9, c(x, 0.0), c(x + 1e-9, 0.0), c(x, 0.0))],
                )
                .unwrap(),
            );
            DiscreteMeasure::new(g, vec![1.0]).unwrap()
        };
        assert_eq!(north_pole_potential(&point(0.0)).value, 0.0);
        assert_abs_diff_eq!(
            north_pole_potential(&point(3f64.sqrt())).value,
            2f64.ln(),
            epsilon = 1e-15
        );

        let mu = DiscreteMeasure::uniform(segment_grid(-1.0, 1.0, 2000), 1.0);
        let np = north_pole_potential(&mu);
        let exact = 0.5 * (2f64.ln() - 2.0 + std::f64::consts::FRAC_PI_2);
        assert_abs_diff_eq!(np.value, exact, epsilon = 1e-6);
        assert!(!np.divergent);
    }

    #[test]
    fn north_pole_divergence_flag() {
        // Point masses at 2^k + 1/2. Weights 2^-k converge, weights 1/k^2 do not.
        let grid = |n: usize| {
            let cells = (1..=n)
                .map(|k| {
                    let x = 2f64.powi(k as i32) + 0.5;
                    Cell::new(0, x, x + 1e-3, c(x, 0.0), c(x + 1e-3, 0.0), c(x, 0.0))
                })
                .collect();
            Arc::new(CellGrid::new(Side::Plane, 0, cells).unwrap())
        };
        let fast: Vec<f64> = (1..=30).map(|k| 0.5f64.powi(k)).collect();
        let slow: Vec<f64> = (1..=30).map(|k| 1.0 / (k * k) as f64).collect();
        assert!(!north_pole_potential(&DiscreteMeasure::new(grid(30), fast).unwrap()).divergent);
        assert!(north_pole_potential(&DiscreteMeasure::new(grid(30), slow).unwrap()).divergent);
    }

    #[test]
    fn pairwise_sum_matches_naive_on_small_input() {
        let xs: Vec<f64> = (0..100).map(|k| k as f64).collect();
        assert_eq!(pairwise_sum(&xs), 4950.0);
    }
}
