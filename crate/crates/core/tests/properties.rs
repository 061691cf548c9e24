use std::sync::Arc;

use num_complex::Complex64;
use proptest::prelude::*;

use vep_core::admissibility::tail_estimate;
use vep_core::discretize::build_grid;
use vep_core::kernel::self_energy;
use vep_core::problem::{compute_cm, interaction_cholesky};
use vep_core::qp::{project_capped_simplex, project_capped_simplex_sorted, ComponentBlock};
use vep_core::scenarios::{load_builtin, Params};
use vep_core::sphere::{push_forward, transform_field};
use vep_core::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn point() -> impl Strategy<Value = Complex64> {
    (-6.0f64..6.0, 0.0f64..std::f64::consts::TAU).prop_map(|(e, t)| Complex64::from_polar(10f64.powf(e), t))
}

fn spd(d: usize) -> impl Strategy<Value = InteractionMatrix> {
    prop::collection::vec(-1.0f64..1.0, d * d).prop_map(move |m| {
        let mut a = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                a[i * d + j] = (0..d).map(|k| m[i * d + k] * m[j * d + k]).sum::<f64>();
            }
            a[i * d + i] += 0.5;
        }
        for i in 0..d {
            for j in 0..i {
                a[i * d + j] = a[j * d + i];
            }
        }
        InteractionMatrix::new(d, a).unwrap()
    })
}

fn grid(a: f64, len: f64, n: usize) -> Arc<CellGrid> {
    Arc::new(build_grid(&SupportSet::segment(c(a, 0.0), c(a + len, 0.0)), n, 1e-3, 0).unwrap())
}

fn measure(grid: &Arc<CellGrid>, raw: &[f64], mass: f64) -> DiscreteMeasure {
    let total: f64 = raw.iter().sum();
    DiscreteMeasure::new(Arc::clone(grid), raw.iter().map(|x| mass * x / total).collect()).unwrap()
}

/// Single-component QP with random positive definite `A` and caps.
fn random_qp(raw: &[f64], b: &[f64], caps: &[f64], mass: f64) -> EnergyQP {
    let n = b.len();
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = (0..n).map(|k| raw[i * n + k] * raw[j * n + k]).sum::<f64>();
        }
    }
    for i in 0..n {
        for j in 0..i {
            a[i * n + j] = a[j * n + i];
        }
    }
    let block = ComponentBlock {
        range: 0..n,
        mass,
        cells: (0..n).collect(),
        grid_len: n,
    };
    EnergyQP::from_parts(a, b.to_vec(), caps.to_vec(), vec![block]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn metric_identity(x in point(), y in point()) {
        let oracle = (x - y).norm() / ((1.0 + x.norm_sqr()).sqrt() * (1.0 + y.norm_sqr()).sqrt());
        let got = chordal_distance(x.into(), y.into());
        prop_assert!((got - oracle).abs() <= 1e-12 * oracle);
        let direct = map_point(x.into()).distance(&map_point(y.into()));
        prop_assert!((direct - oracle).abs() <= 1e-12 * oracle);
    }

    #[test]
    fn images_lie_on_the_sphere(x in point()) {
        let p = map_point(x.into());
        prop_assert!(p.sphere_residual().abs() <= 1e-15);
        prop_assert!((p.pole_gap() - 1.0 / (1.0 + x.norm_sqr())).abs() <= 1e-15 * p.pole_gap().max(1e-300) + 1e-300);
        let back = p.to_plane().unwrap();
        prop_assert!((back - x).norm() <= 1e-12 * x.norm().max(1.0));
    }

    #[test]
    fn push_forward_is_linear(raw_a in prop::collection::vec(0.01f64..1.0, 12), raw_b in prop::collection::vec(0.01f64..1.0, 12), s in 0.1f64..3.0, t in 0.1f64..3.0) {
        let g = grid(-2.0, 3.0, 12);
        let sphere = Arc::new(g.to_sphere());
        let (mu, nu) = (measure(&g, &raw_a, 1.0), measure(&g, &raw_b, 1.0));
        let mix = DiscreteMeasure::new(Arc::clone(&g), mu.weights().iter().zip(nu.weights()).map(|(a, b)| s * a + t * b).collect()).unwrap();
        let lhs = push_forward(&mix, &sphere).unwrap();
        let (pm, pn) = (push_forward(&mu, &sphere).unwrap(), push_forward(&nu, &sphere).unwrap());
        for k in 0..12 {
            prop_assert!((lhs.weights()[k] - (s * pm.weights()[k] + t * pn.weights()[k])).abs() <= 1e-15);
        }
    }

    #[test]
    fn transformed_field_round_trips(x in -1e4f64..1e4, quad in 0.0f64..2.0, cm in 0.0f64..1.5) {
        let field = ExternalField::new(FieldKind::Poly { coeffs: vec![0.3, 0.0, quad, 0.0, 0.25] });
        let t = transform_field(&field, cm, &SupportSet::real_line(), 0, &[c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        let v = field.eval(c(x, 0.0));
        prop_assert!((t.original(c(x, 0.0)) - v).abs() <= 1e-12 * v.abs().max(1.0));
    }

    #[test]
    fn cholesky_reconstructs(m in (1usize..6).prop_flat_map(spd), x in prop::collection::vec(-2.0f64..2.0, 6)) {
        let b = interaction_cholesky(&m).unwrap();
        let d = m.dim();
        let back = b.reconstruct();
        for (r, e) in back.iter().zip(m.entries()) {
            prop_assert!((r - e).abs() <= 1e-12 * e.abs().max(1.0));
        }
        let q = m.quadratic_form(&x[..d]);
        prop_assert!((b.norm_sqr_of_image(&x[..d]) - q).abs() <= 1e-12 * q.abs().max(1.0));
    }

    #[test]
    fn cm_is_linear(m in spd(4), a in prop::collection::vec(0.1f64..2.0, 4), b in prop::collection::vec(0.1f64..2.0, 4), s in 0.1f64..3.0) {
        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| s * x + y).collect();
        let (ca, cb, cmix) = (compute_cm(&m, &a), compute_cm(&m, &b), compute_cm(&m, &mix));
        for i in 0..4 {
            prop_assert!((cmix[i] - (s * ca[i] + cb[i])).abs() <= 1e-12 * cmix[i].abs().max(1.0));
        }
    }

    #[test]
    fn declared_growth_decides_the_class(quad in 0.0f64..3.0, log_coef in 0.0f64..3.0, cm in 0.0f64..2.0) {
        let growth = DeclaredGrowth::Log { coefficient: 1.0, remainder_liminf: 0.0 };
        let plain = ExternalField::zero().with_growth(growth);
        let other = ExternalField::new(FieldKind::LogQuad { log_coef, quad_coef: quad, constant: 0.0 }).with_growth(growth);
        let support = SupportSet::real_line();
        let a = tail_estimate(&plain, cm, &support, 0).unwrap();
        let b = tail_estimate(&other, cm, &support, 0).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn zero_mass_energy_is_nonnegative(raw_a in prop::collection::vec(0.01f64..1.0, 20), raw_b in prop::collection::vec(0.01f64..1.0, 20), a in -3.0f64..3.0, len in 0.1f64..8.0) {
        let g = grid(a, len, 20);
        let diff = measure(&g, &raw_a, 1.0).minus(&measure(&g, &raw_b, 1.0)).unwrap();
        prop_assert!(self_energy(&diff, 0.0).unwrap() >= -1e-12);
    }

    #[test]
    fn convexity_identity(cm in spd(2), raw in prop::collection::vec(0.01f64..1.0, 4 * 10), t in 0.05f64..0.95) {
        let grids = [grid(-1.0, 2.0, 10), grid(0.5, 3.0, 10)];
        let mk = |off: usize| -> Vec<DiscreteMeasure> {
            (0..2).map(|i| measure(&grids[i], &raw[off + 10 * i..off + 10 * i + 10], 1.0 + i as f64)).collect()
        };
        let (mu, nu) = (mk(0), mk(20));
        let energy = |ms: &[&dyn Measure]| j0(ms, &cm, 0.0).unwrap().to_f64();
        let mix: Vec<DiscreteMeasure> = mu.iter().zip(&nu).map(|(a, b)| {
            DiscreteMeasure::new(Arc::clone(a.grid()), a.weights().iter().zip(b.weights()).map(|(x, y)| t * x + (1.0 - t) * y).collect()).unwrap()
        }).collect();
        let diff: Vec<SignedMeasure> = mu.iter().zip(&nu).map(|(a, b)| a.minus(b).unwrap()).collect();
        let lhs = energy(&[&mix[0], &mix[1]]);
        let rhs = t * energy(&[&mu[0], &mu[1]]) + (1.0 - t) * energy(&[&nu[0], &nu[1]]) - t * (1.0 - t) * energy(&[&diff[0], &diff[1]]);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
    }

    #[test]
    fn energy_scales_quadratically(raw_a in prop::collection::vec(0.01f64..1.0, 16), raw_b in prop::collection::vec(0.01f64..1.0, 16), s in 0.1f64..5.0) {
        let (ga, gb) = (grid(-1.0, 2.0, 16), grid(1.5, 1.0, 16));
        let (mu, nu) = (measure(&ga, &raw_a, 1.0), measure(&gb, &raw_b, 1.0));
        let base = mutual_energy(&mu, &nu, 0.0).unwrap();
        let scaled = mutual_energy(&mu.scaled(s).unwrap(), &nu.scaled(s).unwrap(), 0.0).unwrap();
        prop_assert!((scaled - s * s * base).abs() <= 1e-12 * (s * s * base).abs().max(1.0));
    }

    #[test]
    fn projection_matches_sorted_sweep(v in prop::collection::vec(-5.0f64..5.0, 1..40), cap_seed in prop::collection::vec(0.0f64..1.0, 40), m in 0.01f64..3.0, capped in any::<bool>()) {
        let n = v.len();
        let mut caps: Vec<f64> = if capped { cap_seed[..n].iter().map(|x| 0.2 * x).collect() } else { vec![f64::INFINITY; n] };
        let total: f64 = caps.iter().sum();
        if total < 1.01 * m {
            caps.iter_mut().for_each(|c| *c += 1.01 * m / n as f64);
        }
        let a = project_capped_simplex(&v, &caps, m).unwrap();
        let b = project_capped_simplex_sorted(&v, &caps, m).unwrap();
        let mass: f64 = a.iter().sum();
        prop_assert!((mass - m).abs() <= 1e-12 * m.max(1.0));
        for k in 0..n {
            prop_assert!(a[k] >= 0.0 && a[k] <= caps[k]);
            prop_assert!((a[k] - b[k]).abs() <= 1e-10);
        }
    }

    #[test]
    fn objective_is_midpoint_convex(raw in prop::collection::vec(-1.0f64..1.0, 64), b in prop::collection::vec(-1.0f64..1.0, 8), x in prop::collection::vec(0.0f64..1.0, 8), y in prop::collection::vec(0.0f64..1.0, 8)) {
        let qp = random_qp(&raw, &b, &[f64::INFINITY; 8], 1.0);
        let wx = project_capped_simplex(&x, qp.caps(), 1.0).unwrap();
        let wy = project_capped_simplex(&y, qp.caps(), 1.0).unwrap();
        let mid: Vec<f64> = wx.iter().zip(&wy).map(|(p, q)| 0.5 * (p + q)).collect();
        let lhs = qp.objective(&mid);
        let rhs = 0.5 * (qp.objective(&wx) + qp.objective(&wy));
        prop_assert!(lhs <= rhs + 1e-12 * rhs.abs().max(1.0));
    }

    #[test]
    fn solver_history_decreases(raw in prop::collection::vec(-1.0f64..1.0, 100), b in prop::collection::vec(-1.0f64..1.0, 10), seed in any::<u64>()) {
        let qp = random_qp(&raw, &b, &[0.3; 10], 1.0);
        let s = solve(&qp, &SolveOptions { seed: Some(seed), ..SolveOptions::default() }).unwrap();
        prop_assert!(s.converged);
        for pair in s.energy_history.windows(2) {
            prop_assert!(pair[1] <= pair[0], "{:e} -> {:e} len {}", pair[0], pair[1], s.energy_history.len());
        }
        let last = *s.energy_history.last().unwrap();
        prop_assert!((last - s.energy).abs() <= 1e-10 * s.energy.abs().max(1.0));
    }

    #[test]
    fn toeplitz_cm_in_floating_point(p in 1usize..=6, q in 1usize..=6) {
        let params = Params::from([("p".to_string(), p as f64), ("q".to_string(), q as f64)]);
        let spec = load_builtin("toeplitz", &params).unwrap();
        let cm = compute_cm(&spec.interaction, &spec.masses);
        let peak = 1.0 - (q as f64 - 1.0) / (2.0 * q as f64) - (p as f64 - 1.0) / (2.0 * p as f64);
        for (i, x) in cm.iter().enumerate() {
            let want = if i == q - 1 { peak } else { 0.0 };
            prop_assert!((x - want).abs() <= 1e-14, "p={} q={} i={} got {}", p, q, i, x);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// The QP objective and the energy functional evaluated from measures
    /// agree.
    #[test]
    fn objective_matches_vector_energy(seed in any::<u64>(), name in prop::sample::select(vec!["two-matrix", "scalar-weak", "toeplitz"])) {
        let v = validate_spec(load_builtin(name, &Params::new()).unwrap()).unwrap();
        let sp = discretize(&v, GridOptions { cells: 16, pole_clearance: 0.01 }).unwrap();
        let qp = assemble(&sp).unwrap();
        let s = solve(&qp, &SolveOptions { seed: Some(seed), max_iter: 3, tol: 1e-8 }).unwrap();
        let candidate: Vec<DiscreteMeasure> = s.weights.iter().zip(&sp.grids).map(|(w, g)| DiscreteMeasure::new(Arc::clone(g), w.clone()).unwrap()).collect();
        let e = vector_energy(&sp, &candidate).unwrap().to_f64();
        prop_assert!((e - s.energy).abs() <= 1e-10 * e.abs().max(1.0), "{} vs {}", e, s.energy);
    }
}
