use jumpmg::adapt::{self, AdaptConfig, Problem};
use jumpmg::fem::SparseOperator;
use jumpmg::precond::{assemble_explicit, Cycle, DensePreconditioner, Identity};
use jumpmg::solver;
use jumpmg::spectral::{self, SpectrumMethod, SpectrumReport};
use nalgebra::DMatrix;

fn instance(eps: f64, max_dof: usize) -> (Problem, adapt::Discretization) {
    let problem = Problem::jump(eps, 8).unwrap();
    let config = AdaptConfig {
        max_dof,
        ..AdaptConfig::default()
    };
    let mesh = adapt::adaptive_solve(&problem, &config).unwrap().pop().unwrap().mesh;
    let disc = problem.discretize(&mesh).unwrap();
    (problem, disc)
}

#[test]
fn exact_inverse_has_unit_spectrum() {
    let (_, disc) = instance(1e-2, 300);
    let inv = disc.a.to_dense().try_inverse().unwrap();
    let s = spectral::dense_spectrum(&disc.a, &inv).unwrap();
    assert_eq!(s.method, SpectrumMethod::Dense);
    assert!(s.eigenvalues.iter().all(|l| (l - 1.0).abs() < 1e-10));
    assert_eq!(s.m_candidates, 0);

    let ritz = spectral::lanczos_ritz(&disc.a, &DensePreconditioner(inv), 50, 1).unwrap();
    assert_eq!(ritz.len(), 1);
    assert!((ritz[0] - 1.0).abs() < 1e-10);
}

#[test]
fn diagonal_with_identity() {
    let a = SparseOperator::from_diagonal(&[2.0, 1.0]);
    let s = spectral::dense_spectrum(&a, &DMatrix::identity(2, 2)).unwrap();
    assert!((s.eigenvalues[0] - 1.0).abs() < 1e-15);
    assert!((s.eigenvalues[1] - 2.0).abs() < 1e-15);
}

#[test]
fn indefinite_operator_is_rejected() {
    let a = SparseOperator::from_diagonal(&[1.0, -1.0]);
    assert!(spectral::dense_spectrum(&a, &DMatrix::identity(2, 2)).is_err());
    let a = SparseOperator::from_diagonal(&[1.0, 1.0]);
    assert!(spectral::dense_spectrum(&a, &DMatrix::identity(3, 3)).is_err());
}

#[test]
fn spectrum_is_invariant_under_opposite_scaling() {
    let (problem, disc) = instance(1e-4, 400);
    let spec = disc.preconditioner(&problem.initial).unwrap();
    let b = assemble_explicit(&spec, Cycle::Bpx, 3000).unwrap();
    let s = spectral::dense_spectrum(&disc.a, &b).unwrap();
    for c in [1e-3, 7.0, 1e5] {
        let t = spectral::dense_spectrum(&disc.a.scaled(c), &(&b / c)).unwrap();
        for (x, y) in s.eigenvalues.iter().zip(&t.eigenvalues) {
            assert!((x - y).abs() <= 1e-10 * x, "{x} vs {y} at c = {c}");
        }
    }
}

#[test]
fn lanczos_matches_dense_extremes() {
    let (problem, disc) = instance(1e-4, 500);
    let n = disc.num_dofs();
    assert!((400..=700).contains(&n), "{n} dofs");
    let spec = disc.preconditioner(&problem.initial).unwrap();
    for cycle in [Cycle::Bpx, Cycle::VCycle] {
        let dense = spectral::dense_spectrum(&disc.a, &assemble_explicit(&spec, cycle, 3000).unwrap()).unwrap();
        let lz = spectral::lanczos_extremes(&disc.a, &spec.bound(cycle), 3, 200, 5).unwrap();
        assert_eq!(lz.method, SpectrumMethod::Lanczos);
        assert!((lz.min() - dense.min()).abs() <= 1e-6 * dense.min(), "{cycle:?} min");
        assert!((lz.max() - dense.max()).abs() <= 1e-6 * dense.max(), "{cycle:?} max");
    }
}

#[test]
fn ritz_extremes_widen_with_more_steps() {
    let (problem, disc) = instance(1e-6, 800);
    let spec = disc.preconditioner(&problem.initial).unwrap();
    let mut last = (f64::INFINITY, 0.0);
    for iters in [2, 5, 10, 20, 40, 80] {
        let ritz = spectral::lanczos_ritz(&disc.a, &spec.bound(Cycle::Bpx), iters, 3).unwrap();
        let (lo, hi) = (ritz[0], *ritz.last().unwrap());
        assert!(lo <= last.0 * (1.0 + 1e-12), "min grew at {iters} steps");
        assert!(hi >= last.1 * (1.0 - 1e-12), "max shrank at {iters} steps");
        last = (lo, hi);
    }
}

#[test]
fn vcycle_spectrum_is_bounded_by_one_for_moderate_jumps() {
    for eps in [1.0, 1e-2] {
        let (problem, disc) = instance(eps, 600);
        let spec = disc.preconditioner(&problem.initial).unwrap();
        let b = assemble_explicit(&spec, Cycle::VCycle, 3000).unwrap();
        let s = spectral::dense_spectrum(&disc.a, &b).unwrap();
        assert!(s.max() <= 1.0 + 1e-10, "eps {eps}: {}", s.max());
        assert!(s.min() > 0.0);
    }
}

#[test]
fn jump_spectrum_has_at_most_two_outliers() {
    for eps in [1e-4, 1e-6] {
        let (problem, disc) = instance(eps, 1500);
        let spec = disc.preconditioner(&problem.initial).unwrap();
        let b = assemble_explicit(&spec, Cycle::Bpx, 3000).unwrap();
        let s = spectral::dense_spectrum(&disc.a, &b).unwrap();
        assert!(s.m_candidates <= 2);
        assert!(s.min() > 0.0);
    }
}

#[test]
fn condition_numbers_from_definition() {
    let s = SpectrumReport::new(vec![1e-6, 1.0, 2.0], SpectrumMethod::Dense);
    let (k, k0) = spectral::condition_numbers(&s, 0).unwrap();
    assert_eq!(k, k0);
    assert!(spectral::condition_numbers(&s, 3).is_err());
    assert_eq!(s.m_candidates, 1);
    assert_eq!(s.to_csv().lines().count(), 4);
}

#[test]
fn bound_special_cases() {
    let s = SpectrumReport::new(vec![0.5, 1.0, 4.0], SpectrumMethod::Dense);
    let k: f64 = 8.0;
    let rate = (k.sqrt() - 1.0) / (k.sqrt() + 1.0);
    for steps in 1..6 {
        let b = spectral::pcg_bound(&s, 0, steps).unwrap();
        assert!((b - 2.0 * rate.powi(steps as i32)).abs() < 1e-15);
    }
    let flat = SpectrumReport::new(vec![1e-3, 2.0, 2.0], SpectrumMethod::Dense);
    assert_eq!(spectral::pcg_bound(&flat, 1, 2).unwrap(), 0.0);
    assert!(spectral::pcg_bound(&flat, 1, 1).is_err());
    assert!((spectral::k_factor(&s, 1).unwrap() - 7.0).abs() < 1e-14);
}

#[test]
fn bound_holds_on_synthetic_system() {
    let eig = [1e-6, 1.0, 2.0];
    let s = SpectrumReport::new(eig.to_vec(), SpectrumMethod::Dense);
    let a = SparseOperator::from_diagonal(&eig);
    let b = [1.0, 1.0, 1.0];
    let exact: Vec<f64> = b.iter().zip(&eig).map(|(x, l)| x / l).collect();
    let energy = |u: &[f64]| -> f64 {
        u.iter().zip(&exact).zip(&eig).map(|((x, e), l)| l * (x - e).powi(2)).sum::<f64>().sqrt()
    };
    let mut ratios = Vec::new();
    let e0 = energy(&[0.0; 3]);
    solver::pcg_observed(&a, &b, &Identity, &[0.0; 3], 1e-14, 10, &mut |_, u| ratios.push(energy(u) / e0)).unwrap();
    for (k, r) in ratios.iter().enumerate().skip(2) {
        assert!(*r <= spectral::pcg_bound(&s, 1, k).unwrap(), "k = {k}");
    }
    assert!(spectral::pcg_bound(&s, 1, 10).unwrap() >= *ratios.last().unwrap());
}
