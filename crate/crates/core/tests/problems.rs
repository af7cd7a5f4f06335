use momentum_risk::linalg::Mat;
use momentum_risk::problems::{eig_sym, HuberProblem, Problem, ProblemSpec, QuadraticProblem};
use proptest::prelude::*;

#[test]
fn identity_and_diagonal_spectra() {
    let s = eig_sym(&Mat::identity(2)).unwrap();
    assert_eq!(s.eigenvalues, vec![1.0, 1.0]);
    let q = QuadraticProblem::diagonal(&[1.0, 3.0]).unwrap();
    assert_eq!(q.eigenvalues(), &[1.0, 3.0]);
    let u = &q.spectral().basis;
    for i in 0..2 {
        for j in 0..2 {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((u[(i, j)].abs() - want).abs() < 1e-15);
        }
    }
}

#[test]
fn eigenvalues_match_characteristic_roots() {
    // Roots of the characteristic polynomial via a companion-matrix solver.
    let a = Mat::from_rows(&[
        vec![4.0, 1.0, 0.5, 0.2],
        vec![1.0, 3.0, 0.3, 0.1],
        vec![0.5, 0.3, 2.0, 0.4],
        vec![0.2, 0.1, 0.4, 1.5],
    ])
    .unwrap();
    let want = [1.2755092805572623, 2.0714275756200498, 2.3829848186553475, 4.77007832516734];
    let s = eig_sym(&a).unwrap();
    for (got, want) in s.eigenvalues.iter().zip(want) {
        assert!((got - want).abs() < 1e-8);
    }
    let back = s.reconstruct();
    let err = back.sub(&a).max_abs();
    assert!(err < 1e-12, "reconstruction error {err:e}");
}

#[test]
fn quadratic_gradient_and_suboptimality() {
    let q = Problem::Quadratic(QuadraticProblem::diagonal(&[1.0, 3.0]).unwrap());
    assert_eq!(q.gradient(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    assert_eq!(q.gradient(&[1.0, 1.0]).unwrap(), vec![1.0, 3.0]);
    assert_eq!(q.suboptimality(&[1.0, 0.0]).unwrap(), 0.5);
    assert_eq!(q.suboptimality(q.x_star()).unwrap(), 0.0);
    assert!(q.gradient(&[1.0]).unwrap_err().is_validation());
}

#[test]
fn huber_clamped_derivative() {
    let a = Mat::from_rows(&[vec![1.0]]).unwrap();
    let h = HuberProblem::new(&a, vec![0.0], 1e-12, 0.1).unwrap();
    let mut g = vec![0.0];
    h.gradient_into(&[5.0], &mut g);
    assert!((g[0] - 0.1).abs() < 1e-10);
    h.gradient_into(&[0.05], &mut g);
    assert!((g[0] - 0.05).abs() < 1e-10);
}

#[test]
fn huber_minimizer_beats_dense_grid() {
    let h = HuberProblem::generate(2, 10, 0.005, 20.0, 0.1, 3).unwrap();
    let xs = h.x_star().to_vec();
    let step = 1e-3;
    let mut best = f64::INFINITY;
    let mut arg = [0.0; 2];
    for i in -400..=400 {
        for j in -400..=400 {
            let x = [xs[0] + i as f64 * step, xs[1] + j as f64 * step];
            let v = h.value(&x);
            if v < best {
                best = v;
                arg = x;
            }
        }
    }
    assert!(h.f_star() <= best + 1e-12);
    assert!((arg[0] - xs[0]).abs() <= step && (arg[1] - xs[1]).abs() <= step);
    let mut g = vec![0.0; 2];
    h.gradient_into(&xs, &mut g);
    assert!(g.iter().all(|v| v.abs() < 1e-8));
}

#[test]
fn huber_smoothness_constant() {
    let h = HuberProblem::generate(5, 40, 0.1, 4.0, 1.0, 9).unwrap();
    assert!((h.l() - 4.0).abs() < 1e-9);
    assert_eq!(h.mu(), 0.1);
}

#[test]
fn problem_spec_parsing() {
    let s = ProblemSpec::parse("# test\nquadratic.eigenvalues = 1, 3\n").unwrap();
    assert_eq!(
        s,
        ProblemSpec::Quadratic {
            eigenvalues: vec![1.0, 3.0],
            basis_seed: None
        }
    );
    let p = s.build().unwrap();
    assert_eq!((p.mu(), p.l()), (1.0, 3.0));
    let s = ProblemSpec::parse("huber.d = 3\nhuber.p = 20\nhuber.seed = 4").unwrap();
    assert!(matches!(s, ProblemSpec::Huber { d: 3, p: 20, seed: 4, .. }));
    assert!(ProblemSpec::parse("nonsense").is_err());
    assert!(ProblemSpec::parse("huber.d = 1.5\nhuber.p = 3").is_err());
}

#[test]
fn rejects_bad_quadratics() {
    assert!(QuadraticProblem::diagonal(&[0.0, 1.0]).is_err());
    assert!(QuadraticProblem::diagonal(&[]).is_err());
    let nonsym = Mat::from_rows(&[vec![1.0, 0.5], vec![0.0, 1.0]]).unwrap();
    assert!(QuadraticProblem::new(nonsym, vec![0.0; 2], 0.0).is_err());
}

proptest! {
    #[test]
    fn random_basis_preserves_spectrum(e1 in 0.1f64..10.0, e2 in 0.1f64..10.0, e3 in 0.1f64..10.0, seed in 0u64..1000) {
        let q = QuadraticProblem::with_random_basis(&[e1, e2, e3], seed).unwrap();
        let mut want = vec![e1, e2, e3];
        want.sort_by(f64::total_cmp);
        for (g, w) in q.eigenvalues().iter().zip(&want) {
            prop_assert!((g - w).abs() < 1e-10 * w.max(1.0));
        }
        prop_assert!(q.q().is_symmetric(1e-12));
    }
}

#[test]
fn huber_data_csv_round_trips() {
    let h = HuberProblem::generate(3, 7, 0.01, 5.0, 0.1, 4).unwrap();
    let mut buf = Vec::new();
    h.write_data_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("a1,a2,a3,b"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 7);
    let a = h.a_matrix();
    for (i, row) in rows.iter().enumerate() {
        for j in 0..3 {
            assert_eq!(row[j], a[(j, i)]);
        }
        assert_eq!(row[3], h.b()[i]);
    }
    // Rebuilding from the exported data gives the same problem.
    let mut a2 = Mat::zeros(3, 7);
    for (i, row) in rows.iter().enumerate() {
        for j in 0..3 {
            a2[(j, i)] = row[j];
        }
    }
    let b2: Vec<f64> = rows.iter().map(|r| r[3]).collect();
    let h2 = HuberProblem::new(&a2, b2, 0.01, 0.1).unwrap();
    assert_eq!(h2.l(), h.l());
    assert_eq!(h2.f_star(), h.f_star());
}
