//! JSON problem files.
//!
//! ```json
//! {
//!   "d": 1,
//!   "C": [1.0],
//!   "supports": [[{"type": "ray", "a": [0, 0], "b_or_u": [1, 0]},
//!                 {"type": "ray", "a": [0, 0], "b_or_u": [-1, 0]}]],
//!   "fields": [{"kind": "poly", "coeffs": [0, 0, 1]}],
//!   "masses": [1.0],
//!   "constraints": []
//! }
//! ```
//!
//! `C` is row-major, flat or nested. Each support is one piece or a list of
//! pieces. Complex numbers are `[re, im]`.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Result, VepError};
use crate::problem::{ExternalField, InteractionMatrix, ProblemSpec, SupportPiece, SupportSet, UpperConstraint};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    d: usize,
    #[serde(rename = "C")]
    c: Value,
    supports: Vec<RawSupport>,
    fields: Vec<ExternalField>,
    masses: Vec<f64>,
    #[serde(default)]
    constraints: Vec<UpperConstraint>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawSupport {
    Piece(SupportPiece),
    Pieces(Vec<SupportPiece>),
}

#[derive(Debug, Serialize)]
struct ProblemOut<'a> {
    d: usize,
    #[serde(rename = "C")]
    c: &'a [f64],
    supports: &'a [SupportSet],
    fields: &'a [ExternalField],
    masses: &'a [f64],
    constraints: &'a [UpperConstraint],
}

fn parse_matrix(d: usize, c: Value) -> Result<InteractionMatrix> {
    let bad = |e: serde_json::Error| VepError::Parse(format!("C: {e}"));
    let entries: Vec<f64> = match &c {
        Value::Array(rows) if rows.iter().all(Value::is_array) && !rows.is_empty() => {
            let rows: Vec<Vec<f64>> = serde_json::from_value(c).map_err(bad)?;
            if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                return Err(VepError::DimensionMismatch(format!("C must be {d} x {d}")));
            }
            rows.concat()
        }
        _ => serde_json::from_value(c).map_err(bad)?,
    };
    InteractionMatrix::new(d, entries)
}

/// Parse a problem file. Structural errors are `Parse`, size mismatches
/// `DimensionMismatch`; the result still needs [`crate::validate_spec`].
pub fn parse_problem(text: &str) -> Result<ProblemSpec> {
    let raw: RawProblem = serde_json::from_str(text).map_err(|e| VepError::Parse(e.to_string()))?;
    let interaction = parse_matrix(raw.d, raw.c)?;
    let supports = raw
        .supports
        .into_iter()
        .map(|s| match s {
            RawSupport::Piece(p) => SupportSet::new(vec![p]),
            RawSupport::Pieces(p) => SupportSet::new(p),
        })
        .collect();
    Ok(ProblemSpec {
        interaction,
        supports,
        fields: raw.fields,
        masses: raw.masses,
        constraints: raw.constraints,
    })
}

/// Pretty-printed problem file; [`parse_problem`] reads it back unchanged.
pub fn problem_to_json(spec: &ProblemSpec) -> Result<String> {
    let out = ProblemOut {
        d: spec.dim(),
        c: spec.interaction.entries(),
        supports: &spec.supports,
        fields: &spec.fields,
        masses: &spec.masses,
        constraints: &spec.constraints,
    };
    serde_json::to_string_pretty(&out).map_err(|e| VepError::Parse(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{load_builtin, Params, BUILTINS};

    #[test]
    fn builtins_round_trip() {
        for name in BUILTINS {
            let spec = load_builtin(name, &Params::new()).unwrap();
            let back = parse_problem(&problem_to_json(&spec).unwrap()).unwrap();
            assert_eq!(back, spec, "{name}");
        }
    }

    #[test]
    fn accepts_nested_matrix_and_single_pieces() {
        let text = r#"{
            "d": 2, "C": [[2, 1], [1, 2]],
            "supports": [{"type": "segment", "a": [-1, 0], "b_or_u": [1, 0]},
                         {"type": "ray", "a": [2, 0], "b_or_u": [1, 0]}],
            "fields": [{"kind": "zero"}, {"kind": "logquad", "log_coef": 2}],
            "masses": [1, 0.5]
        }"#;
        let spec = parse_problem(text).unwrap();
        assert_eq!(spec.interaction.entries(), &[2.0, 1.0, 1.0, 2.0]);
        assert!(spec.supports[0].is_bounded());
        assert!(spec.constraints.is_empty());
    }

    #[test]
    fn errors() {
        assert!(matches!(parse_problem("{"), Err(VepError::Parse(_))));
        let text = r#"{"d": 2, "C": [1, 0, 0], "supports": [], "fields": [], "masses": []}"#;
        assert!(matches!(parse_problem(text), Err(VepError::DimensionMismatch(_))));
        let text = r#"{"d": 1, "C": [1], "supports": [], "fields": [{"kind": "spline"}], "masses": [1]}"#;
        assert!(matches!(parse_problem(text), Err(VepError::Parse(_))));
    }
}
