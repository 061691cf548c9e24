//! Exact rational evaluation of `Cm`.
//!
//! Problem data such as `2/3` or `-1/2` arrive as doubles. Each double is
//! replaced by the continued-fraction convergent with the smallest
//! denominator whose correctly rounded quotient is that same double, and the
//! products `c_ij m_j` are then summed without rounding.

use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedMul, ToPrimitive, Zero};

use crate::problem::InteractionMatrix;

pub type Rational = Ratio<i128>;

const MAX_DENOMINATOR: i128 = 1_000_000;
const EXACT_INT: f64 = 9_007_199_254_740_992.0;

/// Smallest-denominator fraction `p/q` with `q <= 1e6` whose nearest double
/// is `x`.
pub fn rationalize(x: f64) -> Option<Rational> {
    if !x.is_finite() || x.abs() >= EXACT_INT {
        return None;
    }
    let (mut h_prev, mut h) = (1i128, x.floor() as i128);
    let (mut k_prev, mut k) = (0i128, 1i128);
    let mut rest = x - x.floor();
    loop {
        if (h as f64) / (k as f64) == x {
            return Some(Rational::new(h, k));
        }
        if rest == 0.0 {
            return None;
        }
        let inv = 1.0 / rest;
        let a = inv.floor();
        rest = inv - a;
        let a = a as i128;
        let h_next = a.checked_mul(h)?.checked_add(h_prev)?;
        let k_next = a.checked_mul(k)?.checked_add(k_prev)?;
        if k_next > MAX_DENOMINATOR || (h_next as f64).abs() >= EXACT_INT {
            return None;
        }
        (h_prev, h, k_prev, k) = (h, h_next, k, k_next);
    }
}

/// `Cm` in exact arithmetic, or `None` if some entry does not rationalize
/// or an intermediate overflows.
pub fn exact_cm(c: &InteractionMatrix, masses: &[f64]) -> Option<Vec<Rational>> {
    let d = c.dim();
    let m: Vec<Rational> = masses.iter().map(|&x| rationalize(x)).collect::<Option<_>>()?;
    (0..d)
        .map(|i| {
            let mut acc = Rational::zero();
            for (j, mj) in m.iter().enumerate() {
                let cij = rationalize(c.get(i, j))?;
                acc = acc.checked_add(&cij.checked_mul(mj)?)?;
            }
            Some(acc)
        })
        .collect()
}

pub fn to_f64(q: &Rational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}
