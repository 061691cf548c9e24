//! Problem data: interaction matrix, supports, external fields, masses and
//! upper constraints, together with validation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VepError};
use crate::exact;

/// Symmetric `d x d` interaction matrix, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl InteractionMatrix {
    pub fn new(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if dim == 0 || entries.len() != dim * dim {
            return Err(VepError::DimensionMismatch(format!(
                "interaction matrix of dimension {dim} needs {} entries, got {}",
                dim * dim,
                entries.len()
            )));
        }
        for i in 0..dim {
            for j in 0..i {
                if entries[i * dim + j] != entries[j * dim + i] {
                    return Err(VepError::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(Self { dim, entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(VepError::DimensionMismatch("interaction matrix must be square".into()));
        }
        Self::new(dim, rows.concat())
    }

    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = 1.0;
        }
        Self { dim, entries }
    }

    /// Tridiagonal matrix with 1 on the diagonal and -1/2 next to it.
    pub fn tridiagonal_attraction(dim: usize) -> Self {
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = 1.0;
            if i + 1 < dim {
                entries[i * dim + i + 1] = -0.5;
                entries[(i + 1) * dim + i] = -0.5;
            }
        }
        Self { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// `x^t C x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.dim {
            let mut row = 0.0;
            for j in 0..self.dim {
                row += self.get(i, j) * x[j];
            }
            acc += x[i] * row;
        }
        acc
    }

    /// The matrix `(c_ij m_i m_j)`.
    pub fn scaled_by_masses(&self, masses: &[f64]) -> Self {
        let d = self.dim;
        let mut entries = self.entries.clone();
        for i in 0..d {
            for j in 0..d {
                entries[i * d + j] *= masses[i] * masses[j];
            }
        }
        Self { dim: d, entries }
    }
}

/// Upper-triangular `B` with positive diagonal and `C = B^t B`.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor {
    dim: usize,
    upper: Vec<f64>,
}

impl CholeskyFactor {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.upper[i * self.dim + j]
    }

    /// `B^t B`, row-major.
    pub fn reconstruct(&self) -> Vec<f64> {
        let d = self.dim;
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let mut s = 0.0;
                for k in 0..=i.min(j) {
                    s += self.get(k, i) * self.get(k, j);
                }
                out[i * d + j] = s;
            }
        }
        out
    }

    /// `|B x|^2`.
    pub fn norm_sqr_of_image(&self, x: &[f64]) -> f64 {
        let d = self.dim;
        (0..d)
            .map(|i| {
                let bx: f64 = (i..d).map(|j| self.get(i, j) * x[j]).sum();
                bx * bx
            })
            .sum()
    }
}

/// Cholesky factorization `C = B^t B` with `B` upper triangular.
pub fn interaction_cholesky(c: &InteractionMatrix) -> Result<CholeskyFactor> {
    let d = c.dim();
    let mut b = vec![0.0; d * d];
    for j in 0..d {
        // Column j of B from column j of C.
        for i in 0..j {
            let mut s = c.get(i, j);
            for k in 0..i {
                s -= b[k * d + i] * b[k * d + j];
            }
            b[i * d + j] = s / b[i * d + i];
        }
        let mut s = c.get(j, j);
        for k in 0..j {
            s -= b[k * d + j] * b[k * d + j];
        }
        if !(s > 0.0) {
            return Err(VepError::NotPositiveDefinite { pivot: j, value: s });
        }
        b[j * d + j] = s.sqrt();
    }
    Ok(CholeskyFactor { dim: d, upper: b })
}

/// One affine piece of a support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum SupportPiece {
    /// `{a + t (b - a) : t in [0, 1]}`
    Segment {
        a: Complex64,
        #[serde(rename = "b_or_u")]
        b: Complex64,
    },
    /// `{a + t u : t >= 0}` with `|u| = 1`
    Ray {
        a: Complex64,
        #[serde(rename = "b_or_u")]
        u: Complex64,
    },
}

impl SupportPiece {
    pub fn segment(a: Complex64, b: Complex64) -> Self {
        SupportPiece::Segment { a, b }
    }

    pub fn ray(a: Complex64, u: Complex64) -> Self {
        SupportPiece::Ray { a, u }
    }

    pub fn origin(&self) -> Complex64 {
        match *self {
            SupportPiece::Segment { a, .. } | SupportPiece::Ray { a, .. } => a,
        }
    }

    /// Unit direction of the piece.
    pub fn direction(&self) -> Complex64 {
        match *self {
            SupportPiece::Segment { a, b } => (b - a) / (b - a).norm(),
            SupportPiece::Ray { u, .. } => u,
        }
    }

    /// Arc length; infinite for rays.
    pub fn length(&self) -> f64 {
        match *self {
            SupportPiece::Segment { a, b } => (b - a).norm(),
            SupportPiece::Ray { .. } => f64::INFINITY,
        }
    }

    /// Point at arc-length parameter `s`.
    pub fn at(&self, s: f64) -> Complex64 {
        self.origin() + self.direction() * s
    }

    pub fn is_bounded(&self) -> bool {
        matches!(self, SupportPiece::Segment { .. })
    }

    fn validate(&self) -> Result<()> {
        let finite = |z: Complex64| z.re.is_finite() && z.im.is_finite();
        match *self {
            SupportPiece::Segment { a, b } => {
                if !finite(a) || !finite(b) {
                    return Err(VepError::DegenerateSupport("non-finite segment endpoint".into()));
                }
                if (b - a).norm() <= 0.0 {
                    return Err(VepError::DegenerateSupport(format!(
                        "segment collapses to the point {a}"
                    )));
                }
            }
            SupportPiece::Ray { a, u } => {
                if !finite(a) || !finite(u) {
                    return Err(VepError::DegenerateSupport("non-finite ray data".into()));
                }
                if (u.norm() - 1.0).abs() > 1e-9 {
                    return Err(VepError::DegenerateSupport(format!(
                        "ray direction {u} is not a unit vector"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Finite union of segments and rays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SupportSet {
    pub pieces: Vec<SupportPiece>,
}

impl SupportSet {
    pub fn new(pieces: Vec<SupportPiece>) -> Self {
        Self { pieces }
    }

    pub fn segment(a: Complex64, b: Complex64) -> Self {
        Self::new(vec![SupportPiece::segment(a, b)])
    }

    /// The line through the origin with direction `u`, as two rays.
    pub fn line(u: Complex64) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        Self::new(vec![SupportPiece::ray(zero, -u), SupportPiece::ray(zero, u)])
    }

    pub fn real_line() -> Self {
        Self::line(Complex64::new(1.0, 0.0))
    }

    pub fn imaginary_line() -> Self {
        Self::line(Complex64::new(0.0, 1.0))
    }

    pub fn is_bounded(&self) -> bool {
        self.pieces.iter().all(SupportPiece::is_bounded)
    }

    pub fn rays(&self) -> impl Iterator<Item = &SupportPiece> {
        self.pieces.iter().filter(|p| !p.is_bounded())
    }

    pub fn total_length(&self) -> f64 {
        self.pieces.iter().map(SupportPiece::length).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.pieces.is_empty() {
            return Err(VepError::DegenerateSupport("support has no pieces".into()));
        }
        self.pieces.iter().try_for_each(SupportPiece::validate)
    }

    /// Sample points used for finiteness and lower-bound checks.
    pub fn sample_points(&self, per_piece: usize) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(per_piece * self.pieces.len());
        for piece in &self.pieces {
            for k in 0..per_piece {
                let frac = (k as f64 + 0.5) / per_piece as f64;
                let s = match piece {
                    SupportPiece::Segment { .. } => frac * piece.length(),
                    // tan spreads the samples out to |x| ~ 1e3
                    SupportPiece::Ray { .. } => (frac * 1.5697963).tan(),
                };
                out.push(piece.at(s));
            }
        }
        out
    }
}

/// Which real coordinate a tabulated field is indexed by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TableCoordinate {
    #[default]
    Re,
    Im,
    Abs,
}

/// How an external field is evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FieldKind {
    Zero,
    /// `Re(sum_k coeffs[k] x^k)`
    Poly {
        coeffs: Vec<f64>,
    },
    /// `log_coef log(1+|x|^2) + quad_coef |x|^2 + constant`
    LogQuad {
        #[serde(default)]
        log_coef: f64,
        #[serde(default)]
        quad_coef: f64,
        #[serde(default)]
        constant: f64,
    },
    /// Piecewise-linear interpolation; `outside: null` means `+inf` off the table.
    Table {
        #[serde(default)]
        coordinate: TableCoordinate,
        abscissae: Vec<f64>,
        values: Vec<f64>,
        #[serde(default)]
        outside: Option<f64>,
    },
    /// `height (1 - (|x - center| / radius)^2)^2` inside the disc, 0 outside.
    Bump {
        center: Complex64,
        radius: f64,
        height: f64,
    },
    Sum {
        terms: Vec<FieldKind>,
    },
}

impl FieldKind {
    pub fn eval(&self, x: Complex64) -> f64 {
        match self {
            FieldKind::Zero => 0.0,
            FieldKind::Poly { coeffs } => {
                let mut acc = Complex64::new(0.0, 0.0);
                for &a in coeffs.iter().rev() {
                    acc = acc * x + a;
                }
                acc.re
            }
            FieldKind::LogQuad {
                log_coef,
                quad_coef,
                constant,
            } => {
                let r2 = x.norm_sqr();
                log_coef * r2.ln_1p() + quad_coef * r2 + constant
            }
            FieldKind::Table {
                coordinate,
                abscissae,
                values,
                outside,
            } => {
                let s = match coordinate {
                    TableCoordinate::Re => x.re,
                    TableCoordinate::Im => x.im,
                    TableCoordinate::Abs => x.norm(),
                };
                let n = abscissae.len();
                if n == 0 || s < abscissae[0] || s > abscissae[n - 1] {
                    return outside.unwrap_or(f64::INFINITY);
                }
                let k = abscissae.partition_point(|&a| a <= s).clamp(1, n.max(2) - 1);
                if n == 1 {
                    return values[0];
                }
                let (x0, x1) = (abscissae[k - 1], abscissae[k]);
                let (y0, y1) = (values[k - 1], values[k]);
                if x1 == x0 {
                    y1
                } else {
                    y0 + (y1 - y0) * (s - x0) / (x1 - x0)
                }
            }
            FieldKind::Bump { center, radius, height } => {
                let q = (x - center).norm() / radius;
                if q >= 1.0 {
                    0.0
                } else {
                    let t = 1.0 - q * q;
                    height * t * t
                }
            }
            FieldKind::Sum { terms } => terms.iter().map(|t| t.eval(x)).sum(),
        }
    }

    fn check(&self) -> std::result::Result<(), String> {
        match self {
            FieldKind::Table { abscissae, values, .. } => {
                if abscissae.len() != values.len() {
                    return Err("table abscissae and values differ in length".into());
                }
                if abscissae.windows(2).any(|w| !(w[0] <= w[1])) {
                    return Err("table abscissae must be sorted".into());
                }
                Ok(())
            }
            FieldKind::Bump { radius, .. } if !(*radius > 0.0) => Err("bump radius must be positive".into()),
            FieldKind::Sum { terms } => terms.iter().try_for_each(FieldKind::check),
            _ => Ok(()),
        }
    }
}

/// Symbolic leading behaviour of a field at infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum DeclaredGrowth {
    /// `V(x) / log(1 + |x|^2) -> +inf`
    Superlog,
    /// `V(x) = coefficient log(1 + |x|^2) + lower order`, with
    /// `liminf (V - coefficient log(1 + |x|^2)) = remainder_liminf`.
    Log {
        coefficient: f64,
        #[serde(default)]
        remainder_liminf: f64,
    },
}

/// Lower semi-continuous external field `V_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalField {
    #[serde(flatten)]
    pub kind: FieldKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_growth: Option<DeclaredGrowth>,
}

impl ExternalField {
    pub fn new(kind: FieldKind) -> Self {
        Self {
            kind,
            declared_growth: None,
        }
    }

    pub fn zero() -> Self {
        Self::new(FieldKind::Zero)
    }

    pub fn with_growth(mut self, growth: DeclaredGrowth) -> Self {
        self.declared_growth = Some(growth);
        self
    }

    /// Value in `R ∪ {+inf}`; NaN is mapped to `+inf`.
    pub fn eval(&self, x: Complex64) -> f64 {
        let v = self.kind.eval(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }
}

/// Upper constraint `μ_j <= σ_j` with `σ_j` given by a constant density with
/// respect to arc length. `density: None` means unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpperConstraint {
    pub component: usize,
    pub density: Option<f64>,
}

impl UpperConstraint {
    pub fn density_value(&self) -> f64 {
        self.density.unwrap_or(f64::INFINITY)
    }
}

/// Declarative problem definition.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub interaction: InteractionMatrix,
    pub supports: Vec<SupportSet>,
    pub fields: Vec<ExternalField>,
    pub masses: Vec<f64>,
    pub constraints: Vec<UpperConstraint>,
}

impl ProblemSpec {
    pub fn dim(&self) -> usize {
        self.interaction.dim()
    }
}

/// A problem that passed validation, with its Cholesky factor and `Cm`.
#[derive(Debug, Clone)]
pub struct ValidatedProblem {
    spec: ProblemSpec,
    cholesky: CholeskyFactor,
    cm: Vec<f64>,
    cm_exact: Option<Vec<exact::Rational>>,
}

impl ValidatedProblem {
    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn cholesky(&self) -> &CholeskyFactor {
        &self.cholesky
    }

    /// `(Cm)_i = sum_j c_ij m_j`.
    pub fn cm(&self) -> &[f64] {
        &self.cm
    }

    /// `Cm` in exact rational arithmetic, when every entry of `C` and `m` is
    /// the double nearest to a small-denominator fraction.
    pub fn cm_exact(&self) -> Option<&[exact::Rational]> {
        self.cm_exact.as_deref()
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }
}

/// Floating-point `Cm`.
pub fn compute_cm(c: &InteractionMatrix, masses: &[f64]) -> Vec<f64> {
    (0..c.dim())
        .map(|i| (0..c.dim()).map(|j| c.get(i, j) * masses[j]).sum())
        .collect()
}

/// Check every invariant of the problem data.
pub fn validate_spec(spec: ProblemSpec) -> Result<ValidatedProblem> {
    let d = spec.dim();
    if spec.supports.len() != d || spec.fields.len() != d || spec.masses.len() != d {
        return Err(VepError::DimensionMismatch(format!(
            "d = {d} but got {} supports, {} fields, {} masses",
            spec.supports.len(),
            spec.fields.len(),
            spec.masses.len()
        )));
    }
    let cholesky = interaction_cholesky(&spec.interaction)?;
    for (i, &m) in spec.masses.iter().enumerate() {
        if !(m > 0.0) || !m.is_finite() {
            return Err(VepError::NonPositiveMass { component: i, mass: m });
        }
    }
    for support in &spec.supports {
        support.validate()?;
    }
    for (i, (field, support)) in spec.fields.iter().zip(&spec.supports).enumerate() {
        field
            .kind
            .check()
            .map_err(|reason| VepError::InvalidField { component: i, reason })?;
        let finite = support
            .sample_points(64)
            .into_iter()
            .any(|x| field.eval(x) < f64::INFINITY);
        if !finite {
            return Err(VepError::InvalidField {
                component: i,
                reason: "field is +inf on every sample point of its support".into(),
            });
        }
    }
    for con in &spec.constraints {
        if con.component >= d {
            return Err(VepError::DimensionMismatch(format!(
                "constraint on component {} but d = {d}",
                con.component
            )));
        }
        let density = con.density_value();
        if density.is_nan() || density < 0.0 {
            return Err(VepError::InfeasibleConstraint {
                component: con.component,
                cap: density,
                mass: spec.masses[con.component],
            });
        }
        let cap = density * spec.supports[con.component].total_length();
        let cap = if cap.is_nan() { 0.0 } else { cap };
        if cap < spec.masses[con.component] {
            return Err(VepError::InfeasibleConstraint {
                component: con.component,
                cap,
                mass: spec.masses[con.component],
            });
        }
    }

    let cm_exact = exact::exact_cm(&spec.interaction, &spec.masses);
    let cm = match &cm_exact {
        Some(q) => q.iter().map(exact::to_f64).collect(),
        None => compute_cm(&spec.interaction, &spec.masses),
    };
    Ok(ValidatedProblem {
        spec,
        cholesky,
        cm,
        cm_exact,
    })
}
