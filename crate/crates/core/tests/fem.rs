use approx::assert_relative_eq;
use jumpmg::adapt::Problem;
use jumpmg::fem::{self, CoefficientField, DofMap};
use jumpmg::mesh::{presets, BoundaryKind, Triangulation};
use jumpmg::solver;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn dense_solve(a: &fem::SparseOperator, b: &[f64]) -> Vec<f64> {
    let chol = a.to_dense().cholesky().expect("stiffness matrix is positive definite");
    chol.solve(&nalgebra::DVector::from_column_slice(b)).as_slice().to_vec()
}

#[test]
fn stiffness_scales_with_coefficient() {
    let mesh = presets::jump_domain(4).unwrap();
    let dofs = DofMap::homogeneous(&mesh);
    let one = fem::assemble_stiffness(&mesh, &CoefficientField::constant(3, 1.0).unwrap(), &dofs).unwrap();
    let big = fem::assemble_stiffness(&mesh, &CoefficientField::constant(3, 1e4).unwrap(), &dofs).unwrap();
    for i in 0..one.dim() {
        let (cols, vals) = one.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            assert_relative_eq!(big.get(i, j), 1e4 * v, max_relative = 1e-14);
        }
    }
}

#[test]
fn pure_neumann_rows_sum_to_zero() {
    let mesh = presets::two_triangle_square(BoundaryKind::Neumann).unwrap();
    let dofs = DofMap::homogeneous(&mesh);
    assert_eq!(dofs.num_dofs(), 4);
    let a = fem::assemble_stiffness(&mesh, &CoefficientField::constant(1, 2.5).unwrap(), &dofs).unwrap();
    for i in 0..4 {
        let s: f64 = a.row(i).1.iter().sum();
        assert!(s.abs() < 1e-14, "row {i} sums to {s}");
    }
}

#[test]
fn zero_data_gives_zero_load() {
    let mesh = presets::jump_domain(8).unwrap();
    let dofs = DofMap::homogeneous(&mesh);
    let coeff = CoefficientField::new([(1, 1.0), (2, 1.0), (3, 1e-4)]).unwrap();
    let b = fem::assemble_load(&mesh, &|_, _| 0.0, &|_, _| 0.0, &coeff, &dofs).unwrap();
    assert!(b.iter().all(|&x| x == 0.0));
}

#[test]
fn constant_source_gives_a_third_of_the_area() {
    let mesh = presets::two_triangle_square(BoundaryKind::Neumann).unwrap();
    let dofs = DofMap::homogeneous(&mesh);
    let coeff = CoefficientField::constant(1, 1.0).unwrap();
    let b = fem::assemble_load(&mesh, &|_, _| 1.0, &|_, _| 0.0, &coeff, &dofs).unwrap();
    // vertices 0 and 2 lie on both triangles
    let expected = [1.0 / 3.0, 1.0 / 6.0, 1.0 / 3.0, 1.0 / 6.0];
    for (x, e) in b.iter().zip(expected) {
        assert_relative_eq!(*x, e, max_relative = 1e-14);
    }
}

#[test]
fn linear_dirichlet_data_is_reproduced() {
    let mesh = presets::unit_square(4).unwrap().uniform_refine().unwrap();
    let g = |x: f64, y: f64| 2.0 * x - 3.0 * y + 0.5;
    let dofs = DofMap::new(&mesh, &g);
    let coeff = CoefficientField::constant(1, 7.0).unwrap();
    let a = fem::assemble_stiffness(&mesh, &coeff, &dofs).unwrap();
    let b = fem::assemble_load(&mesh, &|_, _| 0.0, &|_, _| 0.0, &coeff, &dofs).unwrap();
    let u = dense_solve(&a, &b);
    for (d, &x) in u.iter().enumerate() {
        let p = mesh.coords(dofs.vertex(d));
        assert!((x - g(p[0], p[1])).abs() < 1e-12);
    }
}

#[test]
fn linear_solution_with_neumann_flux() {
    // u = x on the jump domain with a = 1 everywhere: g_N = du/dn vanishes on
    // y = +-1, so only the Dirichlet lift drives the solution
    let mesh = presets::jump_domain(8).unwrap();
    let dofs = DofMap::new(&mesh, &|x, _| x);
    let coeff = CoefficientField::constant(3, 1.0).unwrap();
    let a = fem::assemble_stiffness(&mesh, &coeff, &dofs).unwrap();
    let b = fem::assemble_load(&mesh, &|_, _| 0.0, &|_, _| 0.0, &coeff, &dofs).unwrap();
    let u = dense_solve(&a, &b);
    for (d, &x) in u.iter().enumerate() {
        assert!((x - mesh.coords(dofs.vertex(d))[0]).abs() < 1e-12);
    }
}

#[test]
fn stiffness_is_exactly_symmetric_and_positive_definite() {
    let problem = Problem::jump(1e-6, 8).unwrap();
    let mesh = problem.initial.uniform_refine_n(2).unwrap();
    let disc = problem.discretize(&mesh).unwrap();
    assert_eq!(disc.a.max_asymmetry(), 0.0);
    let eig = disc.a.to_dense().symmetric_eigenvalues();
    assert!(eig.min() > 0.0);
}

#[test]
fn energy_norm_examples() {
    let mesh = presets::two_triangle_square(BoundaryKind::Neumann).unwrap();
    let dofs = DofMap::homogeneous(&mesh);
    let a = fem::assemble_stiffness(&mesh, &CoefficientField::constant(1, 1.0).unwrap(), &dofs).unwrap();
    assert_eq!(fem::energy_norm(&a, &[0.0; 4]).unwrap(), 0.0);
    // vertex 1 sits at the right angle of one triangle only
    assert_relative_eq!(fem::energy_norm(&a, &[0.0, 1.0, 0.0, 0.0]).unwrap(), 1.0, max_relative = 1e-14);
    let v = vec![1.0; mesh.num_vertices()];
    let unit = CoefficientField::constant(1, 1.0).unwrap();
    assert_relative_eq!(fem::weighted_l2_norm(&mesh, &unit, &v).unwrap(), 1.0, max_relative = 1e-14);
    assert!(fem::energy_norm(&a, &[1.0]).is_err());
}

#[test]
fn sine_solution_converges_at_first_order() {
    let problem = Problem::sine(2).unwrap();
    let exact = problem.exact_gradient.clone().unwrap();
    let mut errors = Vec::new();
    let mut mesh = problem.initial.uniform_refine_n(2).unwrap();
    for _ in 0..5 {
        let disc = problem.discretize(&mesh).unwrap();
        let x0 = vec![0.0; disc.num_dofs()];
        let (u, report) = solver::cg(&disc.a, &disc.b, &x0, 1e-12, 10_000).unwrap();
        assert!(report.converged);
        let v = disc.dofs.to_vertex_values(&u).unwrap();
        errors.push(fem::energy_error(&mesh, &problem.coeff, &v, &*exact).unwrap());
        // two bisection sweeps halve the mesh size
        mesh = mesh.uniform_refine_n(2).unwrap();
    }
    for w in errors.windows(2) {
        let ratio = w[0] / w[1];
        assert!((1.8..=2.1).contains(&ratio), "ratio {ratio} from {errors:?}");
    }
}

#[test]
fn matrix_market_export_round_trips() {
    let problem = Problem::jump(1e-2, 4).unwrap();
    let disc = problem.discretize(&problem.initial).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.mtx");
    disc.a.write_matrix_market(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('%'));
    let header: Vec<usize> = lines.next().unwrap().split_whitespace().map(|s| s.parse().unwrap()).collect();
    let n = disc.a.dim();
    assert_eq!(&header[..2], &[n, n]);
    let mut dense = DMatrix::zeros(n, n);
    let mut count = 0;
    for l in lines {
        let f: Vec<&str> = l.split_whitespace().collect();
        let (i, j): (usize, usize) = (f[0].parse().unwrap(), f[1].parse().unwrap());
        dense[(i - 1, j - 1)] = f[2].parse::<f64>().unwrap();
        count += 1;
    }
    assert_eq!(count, header[2]);
    assert_eq!(dense, disc.a.to_dense());
}

#[test]
fn assembly_is_deterministic() {
    let problem = Problem::jump(1e-4, 8).unwrap();
    let mesh = problem.initial.uniform_refine_n(3).unwrap();
    let a = problem.discretize(&mesh).unwrap();
    let b = problem.discretize(&mesh).unwrap();
    assert_eq!(a.a, b.a);
    assert_eq!(a.b, b.b);
}

#[test]
fn missing_coefficient_is_an_error() {
    let mesh = presets::jump_domain(4).unwrap();
    let dofs = DofMap::homogeneous(&mesh);
    let coeff = CoefficientField::new([(1, 1.0), (3, 1.0)]).unwrap();
    assert!(fem::assemble_stiffness(&mesh, &coeff, &dofs).is_err());
}

fn random_mesh(seed: u64) -> Triangulation {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut mesh = presets::jump_domain(4).unwrap();
    for _ in 0..3 {
        let marked: Vec<usize> = (0..mesh.num_elements()).filter(|_| rng.gen::<f64>() < 0.3).collect();
        mesh.refine_in_place(&marked).unwrap();
    }
    mesh
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn stiffness_is_linear_in_the_coefficient(
        seed in 0u64..1000,
        a1 in 1e-6f64..1e6,
        a3 in 1e-6f64..1e6,
        c in 1e-3f64..1e3,
    ) {
        let mesh = random_mesh(seed);
        let dofs = DofMap::homogeneous(&mesh);
        let coeff = CoefficientField::new([(1, a1), (2, 1.0), (3, a3)]).unwrap();
        let a = fem::assemble_stiffness(&mesh, &coeff, &dofs).unwrap();
        let ca = fem::assemble_stiffness(&mesh, &coeff.scaled(c).unwrap(), &dofs).unwrap();
        let scale = a.diagonal().iter().fold(0.0f64, |m, d| m.max(d.abs()));
        for i in 0..a.dim() {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                prop_assert!((ca.get(i, j) - c * v).abs() <= 1e-14 * c * scale);
            }
        }
        prop_assert_eq!(a.max_asymmetry(), 0.0);
    }
}
