//! Growth classification of the external fields at infinity.
//!
//! For a component with unbounded support the quantity of interest is
//! `D_i(x) = V_i(x) - (Cm)_i log(1 + |x|^2)`. The component is weakly
//! admissible when `D_i` is bounded below near infinity, and satisfies the
//! strong growth condition when `V_i / log(1 + |x|^2)` diverges.
//!
//! A declared growth term takes precedence. Otherwise `D_i` is sampled at
//! `|x| = 2^k`, `k = 4..=40`, on every unbounded ray, and the minimum over
//! the rays is examined over the last eight samples.

use serde::{Serialize, Serializer};

use crate::error::{Result, VepError};
use crate::problem::{DeclaredGrowth, ExternalField, SupportPiece, SupportSet, ValidatedProblem};

const FIRST_EXPONENT: i32 = 4;
const LAST_EXPONENT: i32 = 40;
const WINDOW: usize = 8;
const STABLE_SPREAD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum AdmissibilityClass {
    #[serde(rename = "bounded-support")]
    BoundedSupport,
    #[serde(rename = "strong")]
    Strong,
    #[serde(rename = "weak")]
    Weak,
    #[serde(rename = "inadmissible")]
    Inadmissible,
}

impl AdmissibilityClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            AdmissibilityClass::BoundedSupport => "bounded-support",
            AdmissibilityClass::Strong => "strong",
            AdmissibilityClass::Weak => "weak",
            AdmissibilityClass::Inadmissible => "inadmissible",
        }
    }
}

/// Class of the tail of one unbounded component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailClass {
    Strong,
    Weak,
    Inadmissible,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimateSource {
    Declared,
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailEstimate {
    pub class: TailClass,
    /// Estimate of `liminf D_i`; `+inf` for strong tails, `-inf` when
    /// unbounded below.
    pub liminf: f64,
    pub source: EstimateSource,
}

fn serialize_extended<S: Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        None => s.serialize_none(),
        Some(x) if *x == f64::INFINITY => s.serialize_str("inf"),
        Some(x) if *x == f64::NEG_INFINITY => s.serialize_str("-inf"),
        Some(x) => s.serialize_f64(*x),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentAdmissibility {
    pub component: usize,
    pub class: AdmissibilityClass,
    /// `None` for bounded supports.
    #[serde(serialize_with = "serialize_extended")]
    pub liminf: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<EstimateSource>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    #[serde(rename = "Cm")]
    pub cm: Vec<f64>,
    pub components: Vec<ComponentAdmissibility>,
    /// Worst class over the components.
    pub class: AdmissibilityClass,
}

impl AdmissibilityReport {
    pub fn is_admissible(&self) -> bool {
        self.class != AdmissibilityClass::Inadmissible
    }
}

/// Classify the tail of `field` on the unbounded support `support`.
pub fn tail_estimate(field: &ExternalField, cm: f64, support: &SupportSet, component: usize) -> Result<TailEstimate> {
    if let Some(growth) = field.declared_growth {
        return Ok(declared_estimate(growth, cm));
    }
    sampled_estimate(field, cm, support, component)
}

fn declared_estimate(growth: DeclaredGrowth, cm: f64) -> TailEstimate {
    let (class, liminf) = match growth {
        DeclaredGrowth::Superlog => (TailClass::Strong, f64::INFINITY),
        DeclaredGrowth::Log {
            coefficient,
            remainder_liminf,
        } => {
            let slack = 1e-12 * cm.abs().max(1.0);
            if coefficient > cm + slack {
                (TailClass::Weak, f64::INFINITY)
            } else if coefficient >= cm - slack {
                (TailClass::Weak, remainder_liminf)
            } else {
                (TailClass::Inadmissible, f64::NEG_INFINITY)
            }
        }
    };
    TailEstimate {
        class,
        liminf,
        source: EstimateSource::Declared,
    }
}

fn sampled_estimate(field: &ExternalField, cm: f64, support: &SupportSet, component: usize) -> Result<TailEstimate> {
    let rays: Vec<&SupportPiece> = support.rays().collect();
    let mut ratio = Vec::new();
    let mut tail = Vec::new();
    for k in FIRST_EXPONENT..=LAST_EXPONENT {
        let t = 2f64.powi(k);
        let mut r_min = f64::INFINITY;
        let mut d_min = f64::INFINITY;
        for ray in &rays {
            let x = ray.at(t);
            let log = x.norm_sqr().ln_1p();
            let v = field.eval(x);
            r_min = r_min.min(v / log);
            d_min = d_min.min(v - cm * log);
        }
        ratio.push(r_min);
        tail.push(d_min);
    }
    let n = tail.len();
    let last = |xs: &[f64]| xs[n - WINDOW..].to_vec();
    let increasing = |xs: &[f64]| xs.windows(2).all(|w| w[1] > w[0]);
    let decreasing = |xs: &[f64]| xs.windows(2).all(|w| w[1] < w[0]);

    let ratio_tail = last(&ratio);
    if increasing(&ratio_tail) && ratio_tail[WINDOW - 1] >= 2.0 * ratio_tail[0] {
        return Ok(TailEstimate {
            class: TailClass::Strong,
            liminf: f64::INFINITY,
            source: EstimateSource::Sampled,
        });
    }

    let d_tail = last(&tail);
    if d_tail.iter().all(|v| *v == f64::INFINITY) {
        return Ok(TailEstimate {
            class: TailClass::Weak,
            liminf: f64::INFINITY,
            source: EstimateSource::Sampled,
        });
    }
    if increasing(&d_tail) && d_tail[WINDOW - 1] - d_tail[0] >= 1.0 {
        return Ok(TailEstimate {
            class: TailClass::Weak,
            liminf: f64::INFINITY,
            source: EstimateSource::Sampled,
        });
    }
    let mut running = Vec::with_capacity(n);
    let mut m = f64::INFINITY;
    for &v in &tail {
        m = m.min(v);
        running.push(m);
    }
    let running_tail = last(&running);
    let spread = running_tail[0] - running_tail[WINDOW - 1];
    if spread.is_finite() && spread <= STABLE_SPREAD {
        let liminf = d_tail.iter().copied().fold(f64::INFINITY, f64::min);
        return Ok(TailEstimate {
            class: TailClass::Weak,
            liminf,
            source: EstimateSource::Sampled,
        });
    }
    if decreasing(&d_tail) {
        return Ok(TailEstimate {
            class: TailClass::Inadmissible,
            liminf: f64::NEG_INFINITY,
            source: EstimateSource::Sampled,
        });
    }
    Err(VepError::UnclassifiableField {
        component,
        reason: format!(
            "V - (Cm) log(1+|x|^2) neither stabilizes nor decreases monotonically at |x| = 2^{}..2^{LAST_EXPONENT}",
            LAST_EXPONENT - WINDOW as i32 + 1
        ),
    })
}

/// Admissibility report for a validated problem.
pub fn classify_admissibility(problem: &ValidatedProblem) -> Result<AdmissibilityReport> {
    let spec = problem.spec();
    let cm = problem.cm().to_vec();
    let mut components = Vec::with_capacity(spec.dim());
    for i in 0..spec.dim() {
        let support = &spec.supports[i];
        let entry = if support.is_bounded() {
            ComponentAdmissibility {
                component: i,
                class: AdmissibilityClass::BoundedSupport,
                liminf: None,
                source: None,
            }
        } else {
            let tail = tail_estimate(&spec.fields[i], cm[i], support, i)?;
            ComponentAdmissibility {
                component: i,
                class: match tail.class {
                    TailClass::Strong => AdmissibilityClass::Strong,
                    TailClass::Weak => AdmissibilityClass::Weak,
                    TailClass::Inadmissible => AdmissibilityClass::Inadmissible,
                },
                liminf: Some(tail.liminf),
                source: Some(tail.source),
            }
        };
        components.push(entry);
    }
    let class = components
        .iter()
        .map(|c| c.class)
        .max()
        .unwrap_or(AdmissibilityClass::BoundedSupport);
    Ok(AdmissibilityReport { cm, components, class })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::FieldKind;
    fn line() -> SupportSet {
        SupportSet::real_line()
    }

    #[test]
    fn sampled_classes() {
        let quad = ExternalField::new(FieldKind::Poly {
            coeffs: vec![0.0, 0.0, 1.0],
        });
        assert_eq!(tail_estimate(&quad, 1.0, &line(), 0).unwrap().class, TailClass::Strong);

        let log = ExternalField::new(FieldKind::LogQuad {
            log_coef: 1.0,
            quad_coef: 0.0,
            constant: 0.0,
        });
        let t = tail_estimate(&log, 1.0, &line(), 0).unwrap();
        assert_eq!((t.class, t.liminf), (TailClass::Weak, 0.0));

        let t = tail_estimate(&ExternalField::zero(), 1.0, &line(), 0).unwrap();
        assert_eq!(t.class, TailClass::Inadmissible);

        let t = tail_estimate(&ExternalField::zero(), 0.0, &line(), 0).unwrap();
        assert_eq!((t.class, t.liminf), (TailClass::Weak, 0.0));

        let twice = ExternalField::new(FieldKind::LogQuad {
            log_coef: 2.0,
            quad_coef: 0.0,
            constant: 0.0,
        });
        let t = tail_estimate(&twice, 1.0, &line(), 0).unwrap();
        assert_eq!((t.class, t.liminf), (TailClass::Weak, f64::INFINITY));
    }

    #[test]
    fn oscillating_tail_is_unclassifiable() {
        let table = ExternalField::new(FieldKind::Table {
            coordinate: crate::problem::TableCoordinate::Abs,
            abscissae: (0..=45).map(|k| 2f64.powi(k)).collect(),
            values: (0..=45).map(|k| if k % 2 == 0 { 0.0 } else { -(k as f64) }).collect(),
            outside: None,
        });
        assert!(matches!(
            tail_estimate(&table, 0.0, &line(), 3),
            Err(VepError::UnclassifiableField { component: 3, .. })
        ));
    }

    #[test]
    fn declared_growth_overrides_sampling() {
        let f = ExternalField::zero().with_growth(DeclaredGrowth::Log {
            coefficient: 1.0,
            remainder_liminf: -2.0,
        });
        let t = tail_estimate(&f, 1.0, &line(), 0).unwrap();
        assert_eq!(
            (t.class, t.liminf, t.source),
            (TailClass::Weak, -2.0, EstimateSource::Declared)
        );
        let t = tail_estimate(&f, 1.5, &line(), 0).unwrap();
        assert_eq!(t.class, TailClass::Inadmissible);
        let t = tail_estimate(&f, 0.5, &line(), 0).unwrap();
        assert_eq!((t.class, t.liminf), (TailClass::Weak, f64::INFINITY));
    }
}
