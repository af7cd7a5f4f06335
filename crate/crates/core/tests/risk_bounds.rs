use momentum_risk::ext::ExtReal;
use momentum_risk::gmm::GmmParams;
use momentum_risk::numeric::linspace;
use momentum_risk::problems::{Problem, QuadraticProblem};
use momentum_risk::risk_bounds::*;

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs().max(1e-300)
}

#[test]
fn gd_table_matches_best_certificate() {
    let (mu, l) = (1.0, 3.0);
    for alpha in linspace(0.01, 2.0 / l - 0.01, 21) {
        let c = certificate_gd_best(alpha, mu, l).unwrap();
        let t = gd_h_bar_table(alpha, mu, l);
        assert!(close(c.h_bar_inf, t, 1e-10), "alpha={alpha}: {} vs {t}", c.h_bar_inf);
    }
    let c = certificate_gd_best(1.0 / 3.0, 1.0, 3.0).unwrap();
    assert!(close(c.h_bar_inf, 0.5f64.sqrt(), 1e-12));
    let c = certificate_gd_best(0.6, 1.0, 3.0).unwrap();
    // α√L/(√2(2−αL)) = 0.6·√3/(√2·0.2)
    assert!(close(c.h_bar_inf, 3.674234614174767, 1e-12));
}

#[test]
fn gd_certificates_satisfy_the_inequality() {
    let (mu, l) = (1.0, 3.0);
    for variant in [GdVariant::Distance, GdVariant::Function] {
        for alpha in linspace(0.02, 2.0 / l - 0.02, 21) {
            let c = certificate_gd(alpha, mu, l, variant).unwrap();
            assert!(c.mi_min_eig >= -MI_SLACK, "{variant:?} alpha={alpha}: {}", c.mi_min_eig);
        }
    }
    assert!(certificate_gd(2.0 / l, mu, l, GdVariant::Distance).unwrap_err().is_validation());
}

#[test]
fn nag_certificate_feasible_and_closed_form() {
    for (mu, l) in [(1.0, 3.0), (1.0, 10.0), (0.5, 4.0)] {
        for alpha in linspace(0.05 / l, 1.0 / l, 21) {
            let c = certificate_nag(alpha, mu, l).unwrap();
            assert!(c.mi_min_eig >= -MI_SLACK, "alpha={alpha}: {}", c.mi_min_eig);
            let e = (alpha * mu).sqrt();
            assert!(close(c.p + c.q, 1.0 - e / 2.0, 1e-12));
            assert!(close(c.h_bar_inf, nag_h_bar_formula(alpha, mu, l), 1e-10));
            assert!(close(c.h_bar_inf * c.h_bar_inf, 2.0 * c.r / e, 1e-10));
        }
    }
    let c = certificate_nag(1.0 / 3.0, 1.0, 3.0).unwrap();
    assert!(close(c.p, 0.6905554747250388, 1e-12));
    assert!(close(c.q, 0.020769390680148388, 1e-10));
    assert!(close(c.r, 13.908504937773785, 1e-12));
    assert!(close(c.h_bar_inf, 6.941215629779384, 1e-12));
}

#[test]
fn recurrence_closed_form_matches_recursion() {
    for (p, q) in [(0.5, 0.25), (0.9, 0.0), (0.1, 0.8)] {
        for k in [10usize, 1000] {
            let a = recurrence_coeffs(p, q, k).unwrap();
            let b = recurrence_direct(p, q, k).unwrap();
            for i in 0..=k {
                assert!((a.a[i] - b.a[i]).abs() <= 1e-12 * a.a[i].abs().max(1.0));
                assert!((a.b[i] - b.b[i]).abs() <= 1e-12 * a.b[i].abs().max(1.0));
            }
        }
    }
    assert!(recurrence_coeffs(0.6, 0.4, 5).is_err());
}

#[test]
fn psi_matches_numerical_supremum() {
    let cases = [
        (5.0, 0.5, 0.3, 1.0, 3.8636373123039522),
        (2.0, 0.0, 0.25, 0.5, 4.294287436425876),
        (10.0, 1.0, 2.0, 0.1, 17.71607275138197),
        (0.9, 0.0, 0.25, 1.0, 0.0),
    ];
    for (t, a, b, s2, want) in cases {
        let got = psi(t, a, b, s2).unwrap();
        assert!((got - want).abs() <= 1e-8 * want.max(1.0), "{got} vs {want}");
        // and against a θ-grid of the defining supremum
        let grid = linspace(1e-9, (1.0 - 1e-9) / b, 20001);
        let sup = grid
            .iter()
            .map(|&th| th / (2.0 * s2) * (t - phi(th, a, b, s2)))
            .fold(0.0, f64::max);
        assert!(got >= sup - 1e-9 && got - sup <= 1e-3 * got.max(1.0));
    }
}

fn gd_distance_problem() -> (BoundCoefficients, Problem) {
    let problem = Problem::Quadratic(QuadraticProblem::diagonal(&[1.0, 3.0]).unwrap());
    let c = certificate_gd(0.25, 1.0, 3.0, GdVariant::Distance).unwrap();
    // ‖x₀ − x*‖² = 1 so that V(ξ₀) = 1
    let c = c.with_initial_state(&problem, &[1.0, 0.0]).unwrap();
    (c, problem)
}

#[test]
fn finite_horizon_bound_oracles() {
    let (c, _) = gd_distance_problem();
    assert!(close(c.v0, 1.0, 1e-14));
    for (th, want) in [(0.0, 5.1448957791036), (0.2, 5.272436860914825), (0.6, 7.392388728374242)] {
        let got = risk_bound_finite(&c, th, 20, 1.0).unwrap().to_f64();
        assert!(close(got, want, 1e-10), "theta={th}: {got} vs {want}");
    }
    let problem = Problem::Quadratic(QuadraticProblem::diagonal(&[1.0, 3.0]).unwrap());
    let n = certificate_nag(0.1, 1.0, 3.0).unwrap();
    assert!(close(n.h_bar_inf, 3.5209456673172457, 1e-12));
    // P̃ is rank one, so r̃ = 0 and C = c₁ = 1; pick x₀ with V(ξ₀) = 2
    let v_unit = n.lyapunov_value(&problem, &[1.0, 0.0], &[1.0, 0.0]).unwrap();
    let s = (2.0 / v_unit).sqrt();
    let n = n.with_initial_state(&problem, &[s, 0.0]).unwrap();
    assert!(close(n.v0, 2.0, 1e-12));
    for (th, want) in [(0.0, 16.584716440489334), (0.005, 16.59720128401893), (0.02, 16.789526624507754)] {
        let got = risk_bound_finite(&n, th, 15, 0.5).unwrap().to_f64();
        assert!(close(got, want, 1e-10), "theta={th}: {got} vs {want}");
    }
}

#[test]
fn bounds_are_infinite_past_threshold() {
    let (c, _) = gd_distance_problem();
    let th = 1.0 / (c.h_bar_inf * c.h_bar_inf);
    assert_eq!(risk_bound_asymptotic(&c, th, 1.0).unwrap(), ExtReal::PosInf);
    assert_eq!(risk_bound_finite(&c, th * 1.01, 10, 1.0).unwrap(), ExtReal::PosInf);
    assert!(risk_bound_asymptotic(&c, th * 0.99, 1.0).unwrap().is_finite());
}

#[test]
fn asymptotic_bound_limit_and_monotonicity() {
    let (c, _) = gd_distance_problem();
    let zero = risk_bound_asymptotic(&c, 0.0, 2.0).unwrap().to_f64();
    assert!(close(zero, 4.0 * 2.0 * 1.5, 1e-12));
    let small = risk_bound_asymptotic(&c, 1e-9, 2.0).unwrap().to_f64();
    assert!(close(small, zero, 1e-6));
    let mut prev = zero;
    for th in linspace(0.01, 0.66, 30) {
        let v = risk_bound_asymptotic(&c, th, 2.0).unwrap().to_f64();
        assert!(v >= prev);
        prev = v;
    }
}

#[test]
fn finite_bound_approaches_asymptotic() {
    // With V(ξ₀) = 0 the finite bound is at most the asymptotic one.
    let problem = Problem::Quadratic(QuadraticProblem::diagonal(&[1.0, 3.0]).unwrap());
    let c = certificate_nag(0.2, 1.0, 3.0).unwrap().with_initial_state(&problem, &[0.0, 0.0]).unwrap();
    for th in [0.0, 0.01, 0.05] {
        let asym = risk_bound_asymptotic(&c, th, 1.0).unwrap().to_f64();
        let fin = risk_bound_finite(&c, th, 100_000, 1.0).unwrap().to_f64();
        assert!(fin <= asym * (1.0 + 1e-12));
        assert!(fin >= asym * 0.99, "theta={th}: {fin} vs {asym}");
    }
}

#[test]
fn ldp_bounds() {
    let (c, _) = gd_distance_problem();
    let h2 = c.h_bar_inf * c.h_bar_inf;
    // zero below the mean-bias bound 4σ²H̄²
    assert_eq!(ldp_bound_asymptotic(&c, 3.9 * h2, 1.0).unwrap(), 0.0);
    let hi = ldp_bound_asymptotic(&c, 10.0 * h2, 1.0).unwrap();
    assert!(hi > 0.0);
    assert!(close(hi, psi(10.0 * h2, 0.0, h2, 1.0).unwrap(), 1e-15));
    let f = ldp_bound_finite(&c, 50, 40.0, 1.0, Some(0.3)).unwrap();
    let p = f.prob_bound.unwrap();
    assert!(p > 0.0 && p <= 1.0);
    assert!(f.i_bar_k > 0.0);
    let f = ldp_bound_finite(&c, 50, 0.1, 1.0, Some(0.3)).unwrap();
    assert_eq!(f.prob_bound, Some(1.0));
    assert!(ldp_bound_finite(&c, 0, 1.0, 1.0, None).unwrap_err().is_validation());
}

#[test]
fn custom_certificate_round_trip() {
    let c = certificate_nag(0.2, 1.0, 3.0).unwrap();
    let m = c.certificate;
    let text = format!(
        "# nesterov\nrho0 = {}\nrho3 = {}\na = {}\nb = {}\nc0 = {}\nc1 = {}\np11 = {}\np12 = {}\np22 = {}\n",
        m.rho0, m.rho3, m.a, m.b, m.c0, m.c1, m.p_tilde[0][0], m.p_tilde[0][1], m.p_tilde[1][1]
    );
    let parsed = MiCertificate::parse(&text).unwrap();
    let params = GmmParams::new(c.params.alpha, c.params.beta, c.params.nu).unwrap();
    let d = coefficients_from_certificate(&params, 1.0, 3.0, &parsed, Provenance::Custom).unwrap();
    assert!(close(d.h_bar_inf, c.h_bar_inf, 1e-12));
    assert!(MiCertificate::parse("rho9 = 1").is_err());
    // an infeasible certificate is rejected
    let mut bad = parsed;
    bad.a = 0.0;
    assert!(coefficients_from_certificate(&params, 1.0, 3.0, &bad, Provenance::Custom).is_err());
}
