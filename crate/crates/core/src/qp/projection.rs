//! Euclidean projection onto `{0 <= w <= cap, sum w = m}`.

use crate::error::{Result, VepError};
use crate::kernel::pairwise_sum;

const BISECTION_STEPS: usize = 200;

fn clamped_mass(v: &[f64], cap: &[f64], lambda: f64) -> f64 {
    let mut acc = 0.0;
    for (x, c) in v.iter().zip(cap) {
        acc += (x - lambda).clamp(0.0, *c);
    }
    acc
}

/// Project `v` onto the capped simplex of mass `m`. `cap` entries may be
/// `+inf`.
///
/// Bisection on the shift `λ` of `w = clamp(v - λ, 0, cap)` keeps the lower
/// end of the bracket, then `λ` is solved exactly on the free coordinates.
pub fn project_capped_simplex(v: &[f64], cap: &[f64], m: f64) -> Result<Vec<f64>> {
    project_component(0, v, cap, m)
}

pub(crate) fn project_component(component: usize, v: &[f64], cap: &[f64], m: f64) -> Result<Vec<f64>> {
    assert_eq!(v.len(), cap.len(), "projection needs one cap per coordinate");
    let total_cap = pairwise_sum(cap);
    if v.is_empty() || !(total_cap >= m) || cap.iter().any(|c| !(*c >= 0.0)) {
        return Err(VepError::InfeasibleConstraint {
            component,
            cap: total_cap,
            mass: m,
        });
    }
    let vmin = v.iter().copied().fold(f64::INFINITY, f64::min);
    let vmax = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut lo, mut hi) = (vmin - m, vmax);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if clamped_mass(v, cap, mid) >= m {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let mut free_sum = 0.0;
    let mut free = 0usize;
    let mut capped = 0.0;
    for (x, c) in v.iter().zip(cap) {
        let y = x - lo;
        if y >= *c {
            capped += c;
        } else if y > 0.0 {
            free_sum += x;
            free += 1;
        }
    }
    let lambda = if free > 0 {
        (free_sum + capped - m) / free as f64
    } else {
        lo
    };
    let mut w: Vec<f64> = v.iter().zip(cap).map(|(x, c)| (x - lambda).clamp(0.0, *c)).collect();

    // Put the rounding residue on the coordinate with the most room.
    let err = m - pairwise_sum(&w);
    if err != 0.0 {
        let room = |k: usize| if err > 0.0 { cap[k] - w[k] } else { w[k] };
        if let Some(k) = (0..w.len()).max_by(|&a, &b| room(a).total_cmp(&room(b)).then(b.cmp(&a))) {
            w[k] = (w[k] + err).clamp(0.0, cap[k]);
        }
    }
    Ok(w)
}
