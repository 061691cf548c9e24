//! Built-in problems.
//!
//! * `two-matrix`: the three-component problem of the two-matrix model with
//!   `C` tridiagonal (1 on the diagonal, -1/2 next to it), masses
//!   `(1, 2/3, 1/3)` on `(R, iR, R)`. `V_1 = x^4/4 + t x^2/2`, `V_2 = 0`,
//!   `V_3` a compactly supported bump and a constant density cap `sigma` on
//!   the second component. The potentials are representative choices, not
//!   the data of any particular matrix model.
//! * `toeplitz`: banded Toeplitz data for `p, q >= 1` with `d = p + q - 1`,
//!   masses `(1/q, …, (q-1)/q, 1, (p-1)/p, …, 1/p)` and no fields. Component
//!   `q` lives on `[-1, 1]`, the others on the two rays from `±1` outward,
//!   in place of the symbol curves.
//! * `scalar-quadratic`: `V = x^2` on `R`.
//! * `scalar-weak`: `V = log(1 + x^2)` on `R`.
//! * `scalar-compact`: `V = 0` on `[-1, 1]`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::Serialize;

use crate::admissibility::{classify_admissibility, AdmissibilityClass, AdmissibilityReport};
use crate::discretize::{discretize, GridOptions};
use crate::error::{Result, VepError};
use crate::problem::{
    validate_spec, DeclaredGrowth, ExternalField, FieldKind, InteractionMatrix, ProblemSpec, SupportPiece, SupportSet,
    UpperConstraint,
};
use crate::qp::{assemble, solve, SolveOptions};

pub type Params = BTreeMap<String, f64>;

pub const BUILTINS: [&str; 5] = [
    "two-matrix",
    "toeplitz",
    "scalar-quadratic",
    "scalar-weak",
    "scalar-compact",
];

/// Name, parameters and expected overall class of a builtin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioInfo {
    pub name: &'static str,
    pub summary: &'static str,
    /// Parameter names with their defaults.
    pub params: BTreeMap<&'static str, f64>,
    pub expected_class: AdmissibilityClass,
}

pub fn describe(name: &str) -> Result<ScenarioInfo> {
    let info = match name {
        "two-matrix" => ScenarioInfo {
            name: "two-matrix",
            summary: "three-component two-matrix model, masses (1, 2/3, 1/3) on (R, iR, R)",
            params: BTreeMap::from([("t", 0.0), ("sigma", 1.0)]),
            expected_class: AdmissibilityClass::Weak,
        },
        "toeplitz" => ScenarioInfo {
            name: "toeplitz",
            summary: "banded Toeplitz data, tridiagonal C, no external fields",
            params: BTreeMap::from([("p", 2.0), ("q", 2.0)]),
            expected_class: AdmissibilityClass::Weak,
        },
        "scalar-quadratic" => ScenarioInfo {
            name: "scalar-quadratic",
            summary: "V(x) = x^2 on the real line; semicircle on [-sqrt 2, sqrt 2]",
            params: BTreeMap::new(),
            expected_class: AdmissibilityClass::Strong,
        },
        "scalar-weak" => ScenarioInfo {
            name: "scalar-weak",
            summary: "V(x) = log(1 + x^2) on the real line",
            params: BTreeMap::new(),
            expected_class: AdmissibilityClass::Weak,
        },
        "scalar-compact" => ScenarioInfo {
            name: "scalar-compact",
            summary: "no field on [-1, 1]; equilibrium energy log 2",
            params: BTreeMap::new(),
            expected_class: AdmissibilityClass::BoundedSupport,
        },
        other => return Err(VepError::UnknownScenario(other.to_string())),
    };
    Ok(info)
}

fn resolve(info: &ScenarioInfo, given: &Params) -> Result<BTreeMap<&'static str, f64>> {
    let mut out = info.params.clone();
    for (k, v) in given {
        match info.params.keys().find(|name| **name == k.as_str()) {
            Some(name) => {
                out.insert(name, *v);
            }
            None => {
                return Err(VepError::BadParams(format!(
                    "scenario `{}` has no parameter `{k}`",
                    info.name
                )))
            }
        }
    }
    Ok(out)
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn positive_integer(name: &str, v: f64) -> Result<usize> {
    if v.fract() == 0.0 && (1.0..=64.0).contains(&v) {
        Ok(v as usize)
    } else {
        Err(VepError::BadParams(format!(
            "`{name}` must be an integer in 1..=64, got {v}"
        )))
    }
}

/// Problem data of a builtin.
pub fn load_builtin(name: &str, params: &Params) -> Result<ProblemSpec> {
    let info = describe(name)?;
    let p = resolve(&info, params)?;
    let spec = match name {
        "two-matrix" => {
            let t = p["t"];
            let sigma = p["sigma"];
            if !t.is_finite() {
                return Err(VepError::BadParams(format!("`t` must be finite, got {t}")));
            }
            if !(sigma > 0.0) {
                return Err(VepError::BadParams(format!("`sigma` must be positive, got {sigma}")));
            }
            let v1 = ExternalField::new(FieldKind::Poly {
                coeffs: vec![0.0, 0.0, 0.5 * t, 0.0, 0.25],
            })
            .with_growth(DeclaredGrowth::Superlog);
            let v3 = ExternalField::new(FieldKind::Bump {
                center: c(0.0, 0.0),
                radius: 1.0,
                height: 1.0,
            })
            .with_growth(DeclaredGrowth::Log {
                coefficient: 0.0,
                remainder_liminf: 0.0,
            });
            ProblemSpec {
                interaction: InteractionMatrix::tridiagonal_attraction(3),
                supports: vec![
                    SupportSet::real_line(),
                    SupportSet::imaginary_line(),
                    SupportSet::real_line(),
                ],
                fields: vec![v1, ExternalField::zero(), v3],
                masses: vec![1.0, 2.0 / 3.0, 1.0 / 3.0],
                constraints: vec![UpperConstraint {
                    component: 1,
                    density: sigma.is_finite().then_some(sigma),
                }],
            }
        }
        "toeplitz" => {
            let pp = positive_integer("p", p["p"])?;
            let q = positive_integer("q", p["q"])?;
            let d = pp + q - 1;
            let mut masses = Vec::with_capacity(d);
            masses.extend((1..q).map(|k| k as f64 / q as f64));
            masses.push(1.0);
            masses.extend((1..pp).rev().map(|k| k as f64 / pp as f64));
            let outward = SupportSet::new(vec![
                SupportPiece::ray(c(-1.0, 0.0), c(-1.0, 0.0)),
                SupportPiece::ray(c(1.0, 0.0), c(1.0, 0.0)),
            ]);
            let supports = (0..d)
                .map(|i| {
                    if i == q - 1 {
                        SupportSet::segment(c(-1.0, 0.0), c(1.0, 0.0))
                    } else {
                        outward.clone()
                    }
                })
                .collect();
            ProblemSpec {
                interaction: InteractionMatrix::tridiagonal_attraction(d),
                supports,
                fields: vec![ExternalField::zero(); d],
                masses,
                constraints: vec![],
            }
        }
        "scalar-quadratic" => scalar(
            SupportSet::real_line(),
            FieldKind::Poly {
                coeffs: vec![0.0, 0.0, 1.0],
            },
        ),
        "scalar-weak" => scalar(
            SupportSet::real_line(),
            FieldKind::LogQuad {
                log_coef: 1.0,
                quad_coef: 0.0,
                constant: 0.0,
            },
        ),
        "scalar-compact" => scalar(SupportSet::segment(c(-1.0, 0.0), c(1.0, 0.0)), FieldKind::Zero),
        _ => unreachable!("describe rejects unknown names"),
    };
    Ok(spec)
}

fn scalar(support: SupportSet, field: FieldKind) -> ProblemSpec {
    ProblemSpec {
        interaction: InteractionMatrix::identity(1),
        supports: vec![support],
        fields: vec![ExternalField::new(field)],
        masses: vec![1.0],
        constraints: vec![],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveSummary {
    pub energy: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub masses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub name: String,
    pub admissibility: AdmissibilityReport,
    pub cells: usize,
    pub pole_clearance: f64,
    pub solve: SolveSummary,
    /// Energy with half the pole clearance, for problems with unbounded
    /// supports.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy_half_clearance: Option<f64>,
}

/// Classify, discretize and solve a builtin.
pub fn scenario_report(name: &str, params: &Params, grid: GridOptions, opts: &SolveOptions) -> Result<ScenarioReport> {
    let validated = validate_spec(load_builtin(name, params)?)?;
    let admissibility = classify_admissibility(&validated)?;
    let run = |g: GridOptions| -> Result<SolveSummary> {
        let qp = assemble(&discretize(&validated, g)?)?;
        let s = solve(&qp, opts)?;
        Ok(SolveSummary {
            energy: s.energy,
            kkt_residual: s.kkt_residual,
            iterations: s.iterations,
            converged: s.converged,
            masses: s.masses(),
        })
    };
    let solve_summary = run(grid)?;
    let unbounded = validated.spec().supports.iter().any(|s| !s.is_bounded());
    let energy_half_clearance = if unbounded {
        Some(
            run(GridOptions {
                pole_clearance: 0.5 * grid.pole_clearance,
                ..grid
            })?
            .energy,
        )
    } else {
        None
    };
    Ok(ScenarioReport {
        name: name.to_string(),
        admissibility,
        cells: grid.cells,
        pole_clearance: grid.pole_clearance,
        solve: solve_summary,
        energy_half_clearance,
    })
}
