//! Weakly admissible vector equilibrium problems for the logarithmic kernel.
//!
//! A problem couples `d` measures `μ_1, …, μ_d` through a symmetric positive
//! definite interaction matrix `C` and minimizes
//!
//! ```text
//! sum_ij c_ij I(μ_i, μ_j) + sum_i ∫ V_i dμ_i
//! ```
//!
//! over measures of prescribed masses `m_i` carried by closed sets `Δ_i ⊂ C`,
//! possibly below upper constraints `σ_j`. Supports may be unbounded as long
//! as every `V_i - (Cm)_i log(1 + |x|^2)` is bounded below. Such problems are
//! mapped onto the sphere of radius 1/2 by inverse stereographic projection,
//! where they become ordinary problems on a compact set, discretized by cell
//! grids and solved as a convex quadratic program over capped simplices.
//!
//! The usual pipeline is
//!
//! 1. [`problem::validate_spec`] and [`admissibility::classify_admissibility`],
//! 2. [`discretize::discretize`] to build a [`discretize::SphereProblem`],
//! 3. [`qp::assemble`] and [`qp::solve`].
//!
//! [`scenarios`] provides ready-made problems.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod admissibility;
pub mod discretize;
pub mod energy;
pub mod error;
pub mod exact;
pub mod grid;
pub mod io;
pub mod kernel;
pub mod problem;
pub mod qp;
pub mod scenarios;
pub mod sphere;

pub use admissibility::{classify_admissibility, AdmissibilityClass, AdmissibilityReport};
pub use discretize::{discretize, GridOptions, SphereProblem};
pub use energy::{j0, j0_cholesky, vector_energy, Energy};
pub use error::{Result, VepError};
pub use grid::{CellGrid, DiscreteMeasure, Measure, Side, SignedMeasure};
pub use kernel::{kernel_matrix, mutual_energy, KernelBlock};
pub use problem::{
    validate_spec, DeclaredGrowth, ExternalField, FieldKind, InteractionMatrix, ProblemSpec, SupportPiece, SupportSet,
    UpperConstraint, ValidatedProblem,
};
pub use qp::{assemble, solve, EnergyQP, Solution, SolveOptions};
pub use sphere::{chordal_distance, map_point, ExtendedComplex, SpherePoint};
