//! The solver against the multi-start brute-force minimizer on small grids.

use vep_core::qp::{brute_force_minimize, kkt_residual, multi_start_endpoints};
use vep_core::scenarios::{load_builtin, Params};
use vep_core::*;

fn small_qp(name: &str, params: &Params, cells: usize) -> EnergyQP {
    let v = validate_spec(load_builtin(name, params).unwrap()).unwrap();
    let sp = discretize(
        &v,
        GridOptions {
            cells,
            pole_clearance: 0.02,
        },
    )
    .unwrap();
    assemble(&sp).unwrap()
}

fn agree(qp: &EnergyQP) {
    let oracle = brute_force_minimize(qp).unwrap();
    let s = solve(
        qp,
        &SolveOptions {
            tol: 1e-11,
            ..SolveOptions::default()
        },
    )
    .unwrap();
    assert!(s.converged, "residual {}", s.kkt_residual);
    assert!(
        (s.energy - oracle.energy).abs() <= 1e-9 * oracle.energy.abs().max(1.0),
        "solver {} oracle {}",
        s.energy,
        oracle.energy
    );
    let diff = s
        .weights
        .iter()
        .flatten()
        .zip(oracle.weights.iter().flatten())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(diff <= 1e-6, "weights differ by {diff}");
}

#[test]
fn scalar_compact_matches_brute_force() {
    agree(&small_qp("scalar-compact", &Params::new(), 24));
}

#[test]
fn scalar_quadratic_matches_brute_force() {
    agree(&small_qp("scalar-quadratic", &Params::new(), 24));
}

#[test]
fn capped_two_matrix_matches_brute_force() {
    let params = Params::from([("sigma".to_string(), 0.3)]);
    agree(&small_qp("two-matrix", &params, 12));
}

#[test]
fn toeplitz_matches_brute_force() {
    agree(&small_qp("toeplitz", &Params::new(), 12));
}

#[test]
fn multi_start_endpoints_coincide() {
    let qp = small_qp("scalar-weak", &Params::new(), 16);
    let ends = multi_start_endpoints(&qp).unwrap();
    let first = &ends[0];
    for e in &ends {
        assert!(kkt_residual(&qp, e) <= 1e-10);
        let diff = e.iter().zip(first).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff <= 1e-6, "endpoints differ by {diff}");
    }
}

#[test]
fn brute_force_rejects_large_grids() {
    let qp = small_qp("scalar-compact", &Params::new(), 100);
    assert!(matches!(brute_force_minimize(&qp), Err(VepError::BadParams(_))));
}

#[test]
fn refinement_is_cauchy_for_the_compact_case() {
    let energies: Vec<f64> = [100, 200, 400, 800]
        .iter()
        .map(|&n| {
            let qp = small_qp("scalar-compact", &Params::new(), n);
            solve(&qp, &SolveOptions::default()).unwrap().energy
        })
        .collect();
    // the limit is log 2, approached from below
    for pair in energies.windows(2) {
        assert!(pair[0] < pair[1] && pair[1] < 2f64.ln(), "energies {energies:?}");
    }
    let gaps: Vec<f64> = energies.windows(2).map(|w| w[1] - w[0]).collect();
    for pair in gaps.windows(2) {
        assert!(pair[1] < pair[0], "gaps {gaps:?}");
    }
}
