//! Reference minimizers used to check the solver.
//!
//! They share nothing with [`super::solve`] beyond the QP data and the KKT
//! certificate: projection is by a breakpoint sweep instead of bisection,
//! and the iterations are fixed-step projected gradient or FISTA.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::solver::{kkt_summary, solution_from, Solution};
use super::EnergyQP;
use crate::error::{Result, VepError};

pub const BRUTE_FORCE_MAX_CELLS: usize = 60;
const RANDOM_STARTS: usize = 32;
const ORACLE_SEED: u64 = 0x5EED_0A11;

/// Projection onto `{0 <= w <= cap, sum w = m}` by sweeping the breakpoints
/// of `λ ↦ sum clamp(v - λ, 0, cap)` from the right.
pub fn project_capped_simplex_sorted(v: &[f64], cap: &[f64], m: f64) -> Result<Vec<f64>> {
    let total: f64 = cap.iter().sum();
    if v.is_empty() || !(total >= m) {
        return Err(VepError::InfeasibleConstraint {
            component: 0,
            cap: total,
            mass: m,
        });
    }
    // (λ, coordinate, enters) with enters = true at v_k, false at v_k - cap_k
    let mut events: Vec<(f64, usize, bool)> = Vec::with_capacity(2 * v.len());
    for (k, (&x, &c)) in v.iter().zip(cap).enumerate() {
        if c == 0.0 {
            continue;
        }
        events.push((x, k, true));
        if c.is_finite() {
            events.push((x - c, k, false));
        }
    }
    events.sort_by(|a, b| b.0.total_cmp(&a.0));

    let (mut s, mut active, mut saturated) = (0.0, 0usize, 0.0);
    let mut lambda = None;
    let mut i = 0;
    while i < events.len() {
        let at = events[i].0;
        if s - active as f64 * at + saturated >= m {
            lambda = Some((s + saturated - m) / active as f64);
            break;
        }
        while i < events.len() && events[i].0 == at {
            let (_, k, enters) = events[i];
            if enters {
                s += v[k];
                active += 1;
            } else {
                s -= v[k];
                active -= 1;
                saturated += cap[k];
            }
            i += 1;
        }
    }
    let lambda = match lambda {
        Some(l) => l,
        None if active > 0 => (s + saturated - m) / active as f64,
        None => {
            return Err(VepError::InfeasibleConstraint {
                component: 0,
                cap: total,
                mass: m,
            })
        }
    };
    Ok(v.iter().zip(cap).map(|(x, c)| (x - lambda).clamp(0.0, *c)).collect())
}

fn project_all(qp: &EnergyQP, v: &[f64]) -> Result<Vec<f64>> {
    let mut w = vec![0.0; v.len()];
    for c in qp.components() {
        let r = c.range.clone();
        let p = project_capped_simplex_sorted(&v[r.clone()], &qp.caps()[r.clone()], c.mass)?;
        w[r].copy_from_slice(&p);
    }
    Ok(w)
}

/// Twice the largest eigenvalue of `A` on per-component zero-sum vectors,
/// by power iteration, inflated by 10%.
fn lipschitz_bound(qp: &EnergyQP) -> f64 {
    let center = |x: &mut [f64]| {
        for c in qp.components() {
            let mean = x[c.range.clone()].iter().sum::<f64>() / c.range.len() as f64;
            for k in c.range.clone() {
                x[k] -= mean;
            }
        }
    };
    let norm = |x: &[f64]| x.iter().map(|t| t * t).sum::<f64>().sqrt();
    let mut x: Vec<f64> = (0..qp.len()).map(|k| (k as f64 * 0.618).fract() - 0.5).collect();
    center(&mut x);
    let mut rho: f64 = 0.0;
    for _ in 0..200 {
        let nx = norm(&x);
        if nx == 0.0 {
            break;
        }
        let mut y = qp.apply(&x);
        center(&mut y);
        rho = rho.max(norm(&y) / nx);
        let ny = norm(&y);
        if ny == 0.0 {
            break;
        }
        x = y.iter().map(|t| t / ny).collect();
    }
    if rho > 0.0 {
        2.0 * 1.1 * rho
    } else {
        1.0
    }
}

fn projected_gradient(qp: &EnergyQP, start: Vec<f64>, step: f64, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let mut w = start;
    for _ in 0..max_iter {
        let g = qp.gradient(&w);
        if kkt_summary(qp, &w, &g).residual <= tol {
            break;
        }
        let v: Vec<f64> = w.iter().zip(&g).map(|(x, gk)| x - step * gk).collect();
        w = project_all(qp, &v)?;
    }
    Ok(w)
}

fn starts(qp: &EnergyQP) -> Result<Vec<Vec<f64>>> {
    let n = qp.len();
    let mut rng = ChaCha8Rng::seed_from_u64(ORACLE_SEED);
    let mut out = Vec::with_capacity(RANDOM_STARTS + n);
    for _ in 0..RANDOM_STARTS {
        let v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let mut scaled = vec![0.0; n];
        for c in qp.components() {
            let total: f64 = v[c.range.clone()].iter().sum();
            for k in c.range.clone() {
                scaled[k] = c.mass * v[k] / total;
            }
        }
        out.push(project_all(qp, &scaled)?);
    }
    // one start per cell, with its component's mass pushed onto that cell
    for k in 0..n {
        let mut v = vec![0.0; n];
        for c in qp.components() {
            if c.range.contains(&k) {
                v[k] = c.mass * c.range.len() as f64;
            }
        }
        out.push(project_all(qp, &v)?);
    }
    Ok(out)
}

/// Endpoints of fixed-step projected gradient from 32 seeded random starts
/// followed by one vertex-biased start per cell.
pub fn multi_start_endpoints(qp: &EnergyQP) -> Result<Vec<Vec<f64>>> {
    if qp.len() > BRUTE_FORCE_MAX_CELLS {
        return Err(VepError::BadParams(format!(
            "brute force is limited to {BRUTE_FORCE_MAX_CELLS} cells, got {}",
            qp.len()
        )));
    }
    let step = 1.0 / lipschitz_bound(qp);
    starts(qp)?
        .into_iter()
        .map(|s| projected_gradient(qp, s, step, 1e-12, 200_000))
        .collect()
}

/// Best endpoint of [`multi_start_endpoints`].
pub fn brute_force_minimize(qp: &EnergyQP) -> Result<Solution> {
    let ends = multi_start_endpoints(qp)?;
    let best = ends
        .iter()
        .min_by(|a, b| qp.objective(a).total_cmp(&qp.objective(b)))
        .expect("at least one start");
    Ok(solution_from(qp, best, 0, false, 1e-10, Vec::new()))
}

/// FISTA with gradient restarts from the uniform point, for grids too large
/// for [`brute_force_minimize`].
pub fn reference_minimize(qp: &EnergyQP, tol: f64, max_iter: usize) -> Result<Solution> {
    let n = qp.len();
    let step = 1.0 / lipschitz_bound(qp);
    let mut uniform = vec![0.0; n];
    for c in qp.components() {
        for k in c.range.clone() {
            uniform[k] = c.mass / c.range.len() as f64;
        }
    }
    let mut x = project_all(qp, &uniform)?;
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let gy = qp.gradient(&y);
        let v: Vec<f64> = y.iter().zip(&gy).map(|(a, g)| a - step * g).collect();
        let x_next = project_all(qp, &v)?;
        // restart when the momentum points uphill
        let uphill: f64 = (0..n).map(|k| gy[k] * (x_next[k] - x[k])).sum();
        let t_next = if uphill > 0.0 {
            1.0
        } else {
            0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt())
        };
        let beta = if uphill > 0.0 { 0.0 } else { (t - 1.0) / t_next };
        y = (0..n).map(|k| x_next[k] + beta * (x_next[k] - x[k])).collect();
        x = x_next;
        t = t_next;
        if iterations % 25 == 0 && kkt_summary(qp, &x, &qp.gradient(&x)).residual <= tol {
            break;
        }
    }
    Ok(solution_from(qp, &x, iterations, false, tol, Vec::new()))
}
