use momentum_risk::dare::{
    gd_closed_form, lyapunov_2x2, solve_dare_2x2, verify_dimension_reduction, DareInstance,
    DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use momentum_risk::{resolve_preset, Error, ExtReal, GmmParams, PresetId, QuadraticProblem};

fn solve(params: &GmmParams, lambda: f64, theta: f64, d: usize) -> momentum_risk::dare::DareSolution {
    let inst = DareInstance::for_theta(params, lambda, theta, d).unwrap();
    solve_dare_2x2(&inst, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap()
}

#[test]
fn gd_with_unit_contraction_factor_has_half_lambda() {
    let p = GmmParams::gd(1.0 / 3.0).unwrap();
    for theta in [0.01, 0.3, 1.0] {
        let sol = solve(&p, 3.0, theta, 2);
        assert!((sol.x_tilde[0][0] - 1.5).abs() < 1e-12);
        assert!(sol.x_tilde[0][1].abs() < 1e-14 && sol.x_tilde[1][1].abs() < 1e-14);
    }
    assert_eq!(gd_closed_form(3.0, 1.0 / 3.0, 0.5, 2).unwrap(), ExtReal::Finite(1.5));
}

#[test]
fn gd_radical_value() {
    // ½(10.5 − √74.25), evaluated by hand.
    let expected = 0.5 * (10.5 - 74.25f64.sqrt());
    let p = GmmParams::gd(1.0 / 3.0).unwrap();
    let sol = solve(&p, 1.0, 1.0, 2);
    assert!((sol.x_tilde[0][0] - expected).abs() < 1e-10);
    let cf = gd_closed_form(1.0, 1.0 / 3.0, 1.0, 2).unwrap().finite().unwrap();
    assert!((cf - expected).abs() < 1e-14);
    assert!((expected - 0.94158).abs() < 1e-5);
}

#[test]
fn closed_form_agrees_with_value_iteration_on_grid() {
    let d = 2;
    for ai in 1..=12 {
        let alpha = 0.05 * ai as f64;
        for lambda in [1.0, 2.0, 3.0] {
            if alpha * lambda >= 2.0 {
                continue;
            }
            for theta in [0.1, 0.5, 1.0] {
                let cf = gd_closed_form(lambda, alpha, theta, d).unwrap();
                let p = GmmParams::gd(alpha).unwrap();
                let inst = DareInstance::for_theta(&p, lambda, theta, d).unwrap();
                match (cf, solve_dare_2x2(&inst, DEFAULT_TOL, DEFAULT_MAX_ITER)) {
                    (ExtReal::Finite(v), Ok(sol)) => {
                        assert!((v - sol.x_tilde[0][0]).abs() < 1e-9, "alpha={alpha} lambda={lambda} theta={theta}")
                    }
                    (ExtReal::PosInf, Err(_)) => {}
                    (cf, sol) => panic!("disagreement at alpha={alpha} lambda={lambda} theta={theta}: {cf:?} vs {sol:?}"),
                }
            }
        }
    }
}

#[test]
fn small_theta_approaches_truncated_lyapunov_series() {
    let p = resolve_preset(PresetId::Hb, 1.0, 3.0).unwrap();
    for lambda in [1.0, 2.0, 3.0] {
        // Independent series oracle: Σ (Ãᵀ)^k Q̃ Ã^k until terms fall below 1e-14.
        let a = momentum_risk::gmm::BlockCompanion::new(&p, lambda).a;
        let mut term = [[lambda / 2.0, 0.0], [0.0, 0.0]];
        let mut sum = term;
        loop {
            let mut next = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    for k in 0..2 {
                        for l in 0..2 {
                            next[i][j] += a[k][i] * term[k][l] * a[l][j];
                        }
                    }
                }
            }
            term = next;
            let norm: f64 = term.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
            for i in 0..2 {
                for j in 0..2 {
                    sum[i][j] += term[i][j];
                }
            }
            if norm < 1e-14 {
                break;
            }
        }
        let sol = solve(&p, lambda, 1e-9, 2);
        let lyap = lyapunov_2x2(&p, lambda).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((sol.x_tilde[i][j] - sum[i][j]).abs() < 1e-7 * (1.0 + sum[i][j].abs()));
                assert!((lyap[i][j] - sum[i][j]).abs() < 1e-12 * (1.0 + sum[i][j].abs()));
            }
        }
    }
}

#[test]
fn solution_is_psd_stabilizing_and_monotone_in_theta() {
    let p = resolve_preset(PresetId::NagPop, 1.0, 3.0).unwrap();
    let mut last = 0.0;
    for i in 1..=20 {
        let theta = 0.1 * i as f64;
        let sol = solve(&p, 3.0, theta, 2);
        assert!(sol.closed_loop_radius < 1.0);
        assert!(sol.residual < 1e-10);
        assert!(p.alpha * p.alpha * sol.x_tilde[0][0] < 2.0 / theta);
        assert!(sol.x_tilde[0][0] >= last - 1e-12);
        last = sol.x_tilde[0][0];
    }
}

#[test]
fn gain_exceeded_is_reported() {
    // GD α=1, λ=1, d=1: finiteness boundary at θ = 2.
    let p = GmmParams::gd(1.0).unwrap();
    let inst = DareInstance::for_theta(&p, 1.0, 2.5, 1).unwrap();
    let err = solve_dare_2x2(&inst, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap_err();
    assert!(matches!(err, Error::GainExceeded { .. }), "{err}");
    assert!(DareInstance::for_theta(&p, 1.0, 0.0, 1).is_err());
    assert!(DareInstance::for_theta(&p, 1.0, -1.0, 1).is_err());
}

#[test]
fn closed_form_reports_infinite_mode() {
    // GD α=0.6 on λ=3 has gain α√λ/(√2(2−αλ)) ≈ 3.67, so θ=0.5, d=2 is past it.
    assert_eq!(gd_closed_form(3.0, 0.6, 0.5, 2).unwrap(), ExtReal::PosInf);
    assert!(gd_closed_form(3.0, 0.7, 0.5, 2).is_err());
}

#[test]
fn dimension_reduction_scalar_case() {
    let q = QuadraticProblem::diagonal(&[1.0]).unwrap();
    let p = GmmParams::gd(1.0).unwrap();
    let chk = verify_dimension_reduction(&q, &p, 1.0, DEFAULT_TOL).unwrap();
    assert!(chk.residual < 1e-12);
    assert!(chk.closed_loop_radius < 1.0);
}

#[test]
fn dimension_reduction_hb_diagonal() {
    let q = QuadraticProblem::diagonal(&[1.0, 3.0]).unwrap();
    let p = resolve_preset(PresetId::Hb, 1.0, 3.0).unwrap();
    let chk = verify_dimension_reduction(&q, &p, 0.5, DEFAULT_TOL).unwrap();
    assert!(chk.residual < 1e-9, "{}", chk.residual);
    assert!(chk.closed_loop_radius < 1.0);
}

#[test]
fn dimension_reduction_random_basis_nag() {
    let q = QuadraticProblem::with_random_basis(&[1.0, 1.7, 2.2, 3.0], 11).unwrap();
    let p = resolve_preset(PresetId::NagPop, 1.0, 3.0).unwrap();
    let chk = verify_dimension_reduction(&q, &p, 0.05, DEFAULT_TOL).unwrap();
    assert!(chk.residual < 1e-9, "{}", chk.residual);
    assert!(chk.closed_loop_radius < 1.0);
    assert!(chk.x_bar.is_symmetric(1e-10));
}
