//! Spectral projected gradient with exact line search.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::projection::project_component;
use super::EnergyQP;
use crate::error::{Result, VepError};
use crate::kernel::{dot, pairwise_sum};

/// Full gradient refresh interval, bounding drift of the running update.
const REFRESH: usize = 50;
const ALPHA_MIN: f64 = 1e-12;
const ALPHA_MAX: f64 = 1e12;
/// Step used when the last step showed no positive curvature.
const ALPHA_FALLBACK: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Target KKT residual.
    pub tol: f64,
    pub max_iter: usize,
    /// `None` starts from mass spread uniformly over the variables, `Some`
    /// from a seeded random feasible point.
    pub seed: Option<u64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 200_000,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    /// Weights per component on the full grid; excluded cells carry 0.
    pub weights: Vec<Vec<f64>>,
    pub energy: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `2 sum_j c_ij (K_ij w_j) + 𝒱_i` per cell; `+inf` on excluded cells.
    pub effective_potentials: Vec<Vec<f64>>,
    /// Per-component constants `F_i`.
    pub multipliers: Vec<f64>,
    /// Objective after each accepted step, starting with the initial point.
    pub energy_history: Vec<f64>,
}

impl Solution {
    /// `MaxIterExceeded` unless the run reached its tolerance.
    pub fn check_converged(&self) -> Result<()> {
        if self.converged {
            Ok(())
        } else {
            Err(VepError::MaxIterExceeded {
                iterations: self.iterations,
                residual: self.kkt_residual,
            })
        }
    }

    pub fn masses(&self) -> Vec<f64> {
        self.weights.iter().map(|w| pairwise_sum(w)).collect()
    }
}

/// Per-component optimality data at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct KktSummary {
    /// Largest half-gap `(U_i - L_i) / 2` over components, where `U_i` is the
    /// largest gradient entry on cells with `w > 0` and `L_i` the smallest on
    /// cells with `w < cap`.
    pub residual: f64,
    /// `F_i = (L_i + U_i) / 2`.
    pub multipliers: Vec<f64>,
}

pub fn kkt_summary(qp: &EnergyQP, w: &[f64], g: &[f64]) -> KktSummary {
    let mut residual: f64 = 0.0;
    let mut multipliers = Vec::with_capacity(qp.dim());
    for c in qp.components() {
        let mut lower = f64::INFINITY;
        let mut upper = f64::NEG_INFINITY;
        for k in c.range.clone() {
            if w[k] < qp.caps()[k] {
                lower = lower.min(g[k]);
            }
            if w[k] > 0.0 {
                upper = upper.max(g[k]);
            }
        }
        let (f, r) = if lower == f64::INFINITY {
            (upper, 0.0)
        } else if upper == f64::NEG_INFINITY {
            (lower, 0.0)
        } else {
            (0.5 * (lower + upper), (0.5 * (upper - lower)).max(0.0))
        };
        residual = residual.max(r);
        multipliers.push(f);
    }
    KktSummary { residual, multipliers }
}

/// KKT residual of a feasible point; zero iff the discrete first-order
/// conditions hold.
pub fn kkt_residual(qp: &EnergyQP, w: &[f64]) -> f64 {
    kkt_summary(qp, w, &qp.gradient(w)).residual
}

fn initial_point(qp: &EnergyQP, seed: Option<u64>) -> Result<Vec<f64>> {
    let mut w = vec![0.0; qp.len()];
    let mut rng = seed.map(ChaCha8Rng::seed_from_u64);
    for (i, c) in qp.components().iter().enumerate() {
        let n = c.range.len();
        let raw: Vec<f64> = match rng.as_mut() {
            None => vec![c.mass / n as f64; n],
            Some(r) => {
                let draws: Vec<f64> = (0..n).map(|_| -r.gen::<f64>().max(1e-300).ln()).collect();
                let total = pairwise_sum(&draws);
                draws.iter().map(|x| c.mass * x / total).collect()
            }
        };
        let p = project_component(i, &raw, &qp.caps()[c.range.clone()], c.mass)?;
        w[c.range.clone()].copy_from_slice(&p);
    }
    Ok(w)
}

fn initial_step(qp: &EnergyQP) -> f64 {
    let diag = (0..qp.len()).map(|k| qp.a(k, k).abs()).fold(0.0, f64::max);
    if diag > 0.0 {
        (0.5 / diag).clamp(ALPHA_MIN, ALPHA_MAX)
    } else {
        1.0
    }
}

/// Minimize the QP.
///
/// Each iteration projects `w - α (g - F)` per component, with `α` the
/// Barzilai–Borwein step of the previous iteration, and moves along the
/// resulting direction with the exact minimizing step capped at 1. When that
/// direction stalls on a fresh gradient a two-cell exchange is taken
/// instead. Every accepted step has a negative exact objective change, so
/// the recorded energies are nonincreasing. A run that stops at `max_iter`
/// returns its last iterate with `converged = false`.
pub fn solve(qp: &EnergyQP, opts: &SolveOptions) -> Result<Solution> {
    if !(opts.tol > 0.0) {
        return Err(VepError::BadParams(format!(
            "tolerance must be positive, got {}",
            opts.tol
        )));
    }
    let n = qp.len();
    let mut w = initial_point(qp, opts.seed)?;
    let mut g = qp.gradient(&w);
    let mut energy = qp.objective(&w);
    let mut history = vec![energy];
    let mut alpha = initial_step(qp);
    let mut since_refresh = 0;
    let mut iterations = 0;
    let mut converged = false;
    let mut v = vec![0.0; n];
    let mut dir = vec![0.0; n];

    loop {
        let kkt = kkt_summary(qp, &w, &g);
        if kkt.residual <= opts.tol {
            if since_refresh == 0 {
                converged = true;
                break;
            }
            g = qp.gradient(&w);
            since_refresh = 0;
            continue;
        }
        if iterations >= opts.max_iter {
            break;
        }

        let mut gd_terms = Vec::with_capacity(qp.dim());
        for (i, c) in qp.components().iter().enumerate() {
            let f = kkt.multipliers[i];
            let r = c.range.clone();
            for k in r.clone() {
                v[k] = w[k] - alpha * (g[k] - f);
            }
            let p = project_component(i, &v[r.clone()], &qp.caps()[r.clone()], c.mass)?;
            let mut acc = 0.0;
            for (k, pk) in r.zip(p) {
                dir[k] = pk - w[k];
                acc += (g[k] - f) * dir[k];
            }
            gd_terms.push(acc);
        }
        let gd = pairwise_sum(&gd_terms);
        if !(gd < 0.0) {
            if since_refresh != 0 {
                g = qp.gradient(&w);
                since_refresh = 0;
                continue;
            }
            match pair_step(qp, &mut w, &g) {
                Some(change) => {
                    iterations += 1;
                    energy += change;
                    history.push(energy);
                    g = qp.gradient(&w);
                    continue;
                }
                None => break,
            }
        }

        let ad = qp.apply(&dir);
        let dad = dot(&dir, &ad);
        let lambda = if dad > 0.0 { (-gd / (2.0 * dad)).min(1.0) } else { 1.0 };
        for k in 0..n {
            let next = if lambda == 1.0 {
                w[k] + dir[k]
            } else {
                w[k] + lambda * dir[k]
            };
            w[k] = next.clamp(0.0, qp.caps()[k]);
        }
        iterations += 1;
        since_refresh += 1;
        if since_refresh >= REFRESH {
            g = qp.gradient(&w);
            since_refresh = 0;
        } else {
            for k in 0..n {
                g[k] += 2.0 * lambda * ad[k];
            }
        }
        energy += lambda * gd + lambda * lambda * dad;
        history.push(energy);

        let dd = dot(&dir, &dir);
        alpha = if dad > 0.0 {
            (dd / (2.0 * dad)).clamp(ALPHA_MIN, ALPHA_MAX)
        } else {
            ALPHA_FALLBACK
        };
    }

    Ok(solution_from(qp, &w, iterations, converged, opts.tol, history))
}

/// Move mass from the cell with the largest gradient among `w > 0` to the
/// one with the smallest among `w < cap`, in the component with the largest
/// KKT gap, with the exact step. Used when the projected direction is lost in
/// rounding. Returns the objective change, negative, or `None` if no pair
/// decreases the objective.
fn pair_step(qp: &EnergyQP, w: &mut [f64], g: &[f64]) -> Option<f64> {
    let mut best: Option<(f64, usize, usize)> = None;
    for c in qp.components() {
        let (mut lo, mut hi) = (None::<usize>, None::<usize>);
        for k in c.range.clone() {
            if w[k] < qp.caps()[k] && lo.is_none_or(|j| g[k] < g[j]) {
                lo = Some(k);
            }
            if w[k] > 0.0 && hi.is_none_or(|j| g[k] > g[j]) {
                hi = Some(k);
            }
        }
        if let (Some(j), Some(k)) = (lo, hi) {
            let gap = g[k] - g[j];
            if j != k && gap > 0.0 && best.is_none_or(|b| gap > b.0) {
                best = Some((gap, j, k));
            }
        }
    }
    let (gap, j, k) = best?;
    let curvature = qp.a(j, j) + qp.a(k, k) - 2.0 * qp.a(j, k);
    let room = w[k].min(qp.caps()[j] - w[j]);
    let t = if curvature > 0.0 {
        (gap / (2.0 * curvature)).min(room)
    } else {
        room
    };
    if !(t > 0.0) {
        return None;
    }
    let change = -t * gap + t * t * curvature;
    if !(change < 0.0) {
        return None;
    }
    if t == w[k] {
        w[j] += w[k];
        w[k] = 0.0;
    } else {
        w[j] += t;
        w[k] -= t;
    }
    w[j] = w[j].min(qp.caps()[j]);
    Some(change)
}

pub(crate) fn solution_from(
    qp: &EnergyQP,
    w: &[f64],
    iterations: usize,
    converged: bool,
    tol: f64,
    energy_history: Vec<f64>,
) -> Solution {
    let g = qp.gradient(w);
    let kkt = kkt_summary(qp, w, &g);
    Solution {
        weights: qp.expand(w),
        energy: qp.objective(w),
        kkt_residual: kkt.residual,
        iterations,
        converged: converged || kkt.residual <= tol,
        effective_potentials: qp.expand_with(&g, f64::INFINITY),
        multipliers: kkt.multipliers,
        energy_history,
    }
}
