use jumpmg::adapt::{self, AdaptConfig, Method, Problem};
use jumpmg::fem::{self, SparseOperator};
use jumpmg::hierarchy::decompose;
use jumpmg::precond::{build_spaces, Cycle, DensePreconditioner, Identity};
use jumpmg::solver;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn dense_solve(a: &SparseOperator, b: &[f64]) -> Vec<f64> {
    let chol = a.to_dense().cholesky().unwrap();
    let mut x = chol.solve(&DVector::from_column_slice(b));
    for _ in 0..3 {
        x += chol.solve(&DVector::from_vec(a.residual(b, x.as_slice())));
    }
    x.as_slice().to_vec()
}

fn rel_energy_error(a: &SparseOperator, x: &[f64], exact: &[f64]) -> f64 {
    let d: Vec<f64> = x.iter().zip(exact).map(|(p, q)| p - q).collect();
    fem::energy_norm(a, &d).unwrap() / fem::energy_norm(a, exact).unwrap()
}

fn jump_instance(eps: f64, steps: usize) -> (Problem, adapt::Discretization) {
    let problem = Problem::jump(eps, 8).unwrap();
    let config = AdaptConfig {
        max_dof: usize::MAX,
        max_iterations: Some(steps),
        ..AdaptConfig::default()
    };
    let mesh = adapt::adaptive_solve(&problem, &config).unwrap().pop().unwrap().mesh;
    let disc = problem.discretize(&mesh).unwrap();
    (problem, disc)
}

#[test]
fn two_distinct_eigenvalues_need_two_steps() {
    let a = SparseOperator::from_diagonal(&[1.0, 2.0, 1.0, 2.0]);
    let (x, report) = solver::cg(&a, &[1.0, -3.0, 0.5, 2.0], &[0.0; 4], 1e-10, 100).unwrap();
    assert!(report.converged);
    assert!(report.iterations <= 2);
    assert!((x[1] + 1.5).abs() < 1e-14);
}

#[test]
fn exact_inverse_takes_one_step() {
    let (_, disc) = jump_instance(1e-2, 3);
    let inv = DensePreconditioner(disc.a.to_dense().try_inverse().unwrap());
    let x0 = vec![0.0; disc.num_dofs()];
    let (_, report) = solver::pcg(&disc.a, &disc.b, &inv, &x0, 1e-10, 100).unwrap();
    assert_eq!(report.iterations, 1);
    let (_, report) = solver::stationary_iterate(&disc.a, &disc.b, &inv, &x0, 1e-10, 100).unwrap();
    assert_eq!(report.iterations, 1);
}

#[test]
fn identity_takes_one_step() {
    let a = SparseOperator::identity(5);
    let (x, report) = solver::cg(&a, &[1.0, 2.0, 3.0, 4.0, 5.0], &[0.0; 5], 1e-10, 100).unwrap();
    assert_eq!(report.iterations, 1);
    assert_eq!(x, vec![1.0, 2.0, 3.0, 4.0, 5.0]);
}

#[test]
fn zero_right_hand_side_takes_no_steps() {
    let a = SparseOperator::from_diagonal(&[1.0, 4.0]);
    let (x, report) = solver::cg(&a, &[0.0, 0.0], &[0.0, 0.0], 1e-10, 100).unwrap();
    assert_eq!(report.iterations, 0);
    assert!(report.converged);
    assert!(report.history.is_empty());
    assert_eq!(x, vec![0.0, 0.0]);
}

#[test]
fn wide_spectrum_needs_many_steps() {
    // a 2x2 system would terminate after two steps, so spread the
    // eigenvalues of a larger diagonal over [1, 1e6]
    let n = 60;
    let d: Vec<f64> = (0..n).map(|i| 10f64.powf(6.0 * i as f64 / (n - 1) as f64)).collect();
    let a = SparseOperator::from_diagonal(&d);
    let (x, report) = solver::cg(&a, &vec![1.0; n], &vec![0.0; n], 1e-10, 1000).unwrap();
    assert!(report.converged);
    assert!(report.iterations >= 10, "{} iterations", report.iterations);
    for (xi, di) in x.iter().zip(&d) {
        assert!((xi * di - 1.0).abs() < 1e-6);
    }
}

#[test]
fn history_matches_iterations() {
    let (problem, disc) = jump_instance(1e-4, 4);
    let spec = disc.preconditioner(&problem.initial).unwrap();
    for method in Method::ALL {
        let (_, report) = adapt::solve_with(method, &disc.a, &disc.b, Some(&spec), 1e-10, 5000).unwrap();
        assert!(report.converged, "{method}");
        assert_eq!(report.history.len(), report.iterations);
        let csv = report.history_csv();
        assert_eq!(csv.lines().count(), report.iterations + 1);
        let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(json["iterations"], report.iterations);
    }
}

#[test]
fn multilevel_solutions_match_direct_solve() {
    for eps in [1.0, 1e-4, 1e-6] {
        let (problem, disc) = jump_instance(eps, 6);
        assert!(disc.num_dofs() <= 3000);
        let spec = disc.preconditioner(&problem.initial).unwrap();
        let exact = dense_solve(&disc.a, &disc.b);
        for method in [Method::TpsBpxCg, Method::TpsMgCg, Method::TpsMg] {
            let (x, report) = adapt::solve_with(method, &disc.a, &disc.b, Some(&spec), 1e-10, 1000).unwrap();
            assert!(report.converged);
            let err = rel_energy_error(&disc.a, &x, &exact);
            assert!(err <= 1e-8, "{method} at eps {eps}: {err:e}");
        }
    }
}

#[test]
fn pcg_needs_no_more_steps_than_stationary() {
    for (eps, steps) in [(1.0, 3), (1e-4, 5), (1e-6, 8)] {
        let (problem, disc) = jump_instance(eps, steps);
        let spec = disc.preconditioner(&problem.initial).unwrap();
        let (_, pcg) = adapt::solve_with(Method::TpsMgCg, &disc.a, &disc.b, Some(&spec), 1e-10, 1000).unwrap();
        let (_, mg) = adapt::solve_with(Method::TpsMg, &disc.a, &disc.b, Some(&spec), 1e-10, 1000).unwrap();
        assert!(pcg.iterations <= mg.iterations, "eps {eps}: {} > {}", pcg.iterations, mg.iterations);
    }
}

#[test]
fn half_inverse_halves_the_error() {
    let (_, disc) = jump_instance(1e-2, 2);
    let half = DensePreconditioner(disc.a.to_dense().try_inverse().unwrap() * 0.5);
    let exact = dense_solve(&disc.a, &disc.b);
    let mut errors = Vec::new();
    let x0 = vec![0.0; disc.num_dofs()];
    solver::stationary_observed(&disc.a, &disc.b, &half, &x0, 1e-10, 100, &mut |_, u| {
        errors.push(rel_energy_error(&disc.a, u, &exact))
    })
    .unwrap();
    for w in errors.windows(2).take(12) {
        assert!((w[1] / w[0] - 0.5).abs() < 1e-6, "{errors:?}");
    }
}

#[test]
fn nonpositive_curvature_is_reported() {
    let a = SparseOperator::from_diagonal(&[1.0, -1.0]);
    assert!(solver::cg(&a, &[0.0, 1.0], &[0.0, 0.0], 1e-10, 10).is_err());
    let a = SparseOperator::from_diagonal(&[1.0, 1.0]);
    assert!(solver::cg(&a, &[1.0], &[0.0, 0.0], 1e-10, 10).is_err());
    assert!(solver::cg(&a, &[1.0, 1.0], &[0.0, 0.0], 0.0, 10).is_err());
}

#[test]
fn divergent_stationary_iteration_stops_unconverged() {
    let a = SparseOperator::from_diagonal(&[1.0, 1.0]);
    let (_, report) = solver::stationary_iterate(&a, &[1.0, 1.0], &|r: &[f64]| r.iter().map(|x| 3.0 * x).collect(), &[0.0, 0.0], 1e-10, 100)
        .unwrap();
    assert!(!report.converged);
    assert!(report.iterations < 100);
}

#[test]
fn vcycle_pcg_stays_within_maxit() {
    let (problem, disc) = jump_instance(1e-4, 4);
    let spec = disc.preconditioner(&problem.initial).unwrap();
    let x0 = vec![0.0; disc.num_dofs()];
    let (_, report) = solver::pcg(&disc.a, &disc.b, &spec.bound(Cycle::VCycle), &x0, 1e-30, 3).unwrap();
    assert_eq!(report.iterations, 3);
    assert!(!report.converged);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn iterations_do_not_depend_on_scaling(c in 1e-6f64..1e6, seed in 0u64..100) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = 30;
        let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let spd = &m * m.transpose() + DMatrix::identity(n, n) * 0.1;
        let triplets: Vec<_> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| (i, j, spd[(i, j)])).collect();
        let a = SparseOperator::from_triplets(n, &triplets);
        let ca = a.scaled(c);
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let cb: Vec<f64> = b.iter().map(|x| c * x).collect();
        let x0 = vec![0.0; n];
        let (_, r1) = solver::pcg(&a, &b, &Identity, &x0, 1e-8, 1000).unwrap();
        let (_, r2) = solver::pcg(&ca, &cb, &Identity, &x0, 1e-8, 1000).unwrap();
        prop_assert!(r1.converged && r2.converged);
        prop_assert!((r1.iterations as i64 - r2.iterations as i64).abs() <= 1, "{} vs {}", r1.iterations, r2.iterations);
    }

    #[test]
    fn power_of_two_scaling_is_exact(k in -20i32..20) {
        let (problem, disc) = jump_instance(1e-4, 3);
        let (seq, groups) = decompose(&disc.mesh, &problem.initial).unwrap();
        let c = 2f64.powi(k);
        let ca = disc.a.scaled(c);
        let cb: Vec<f64> = disc.b.iter().map(|x| c * x).collect();
        let spec = build_spaces(&seq, &groups, &disc.dofs, &disc.a).unwrap();
        let cspec = build_spaces(&seq, &groups, &disc.dofs, &ca).unwrap();
        let x0 = vec![0.0; disc.num_dofs()];
        let (_, r1) = solver::pcg(&disc.a, &disc.b, &spec.bound(Cycle::VCycle), &x0, 1e-10, 1000).unwrap();
        let (_, r2) = solver::pcg(&ca, &cb, &cspec.bound(Cycle::VCycle), &x0, 1e-10, 1000).unwrap();
        prop_assert_eq!(r1.iterations, r2.iterations);
    }
}
